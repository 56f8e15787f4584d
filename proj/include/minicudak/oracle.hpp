#pragma once

#include <memory>
#include <string>

#include "minicudak/machine.hpp"

namespace mck {

struct OracleOptions {
    uint64_t maxInterleavings = 1'000'000;
    int maxThreads = 3;
    int maxAccessesPerThread = 8;
    ArchParams arch;
};

struct OracleResult {
    bool oracleRace = false;    // ground truth from exhaustive trace analysis
    bool detectorRace = false;  // any explored schedule where the shadow detector reports
    uint64_t interleavings = 0;
    bool aborted = false;       // a limit was exceeded
    std::string error;
};

// Explores every interleaving of monitored shared-memory accesses of a tiny
// program (bounds enforced). Steps that cannot affect shared memory commute
// and run eagerly between choice points, so the number of explored
// interleavings is the multinomial over per-thread access counts.
//
// The ground-truth verdict scans each terminal access trace for a
// conflicting pair unordered by a barrier of its block; it never consults
// the shadow-memory detector, whose per-schedule verdict is reported
// separately for comparison.
OracleResult oracleRace(std::shared_ptr<const Program> prog, OracleOptions opts = {});

}  // namespace mck
