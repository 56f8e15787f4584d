#pragma once

#include <string>
#include <vector>

#include "minicudak/machine.hpp"

namespace mck {

// Exit codes: 0 clean, 1 diagnostics (races and other run-time findings),
// 2 frontend/usage error, 3 deadlock or stuck, otherwise main's nonzero
// return value when nothing outranks it.
struct CliOptions {
    std::string inputPath;
    bool raceCheck = true;
    uint64_t seed = 0;
    SchedulePolicy schedule = SchedulePolicy::SeededRandom;
    bool trace = false;
    uint64_t stepLimit = 50'000'000;
    std::string archFile;
    std::string reportPath;  // empty: no report file on stuck runs
    ArchParams arch;
};

struct FileRunOutcome {
    int exitCode = 0;
    std::string stdoutText;
    std::string stderrText;  // diagnostics (and trace) lines, "cudak: "-prefixed
    bool frontendError = false;
    RunResult run;
};

// Interprets one .cu file in-process. When `live` is set, program output is
// flushed to stdout at each newline and trace lines stream to stderr as
// they happen.
FileRunOutcome runFile(const CliOptions& opts, bool live = false);

// Architecture-parameter file: one `key = integer` pair per line.
// Keys: warpSize, computeCapabilityMajor, computeCapabilityMinor,
// maxThreadsPerBlock, driverVersion, runtimeVersion.
ArchParams loadArchFile(const std::string& path);

struct CorpusOutcome {
    int passed = 0;
    int failed = 0;
    std::string table;  // one PASS/FAIL line per fixture
};

// Runs every .cu file in a directory against its .expect sidecar.
// Sidecar format (line oriented):
//   exit <code>
//   args <extra command line options>
//   stderr-re <anchored regex, one per expected stderr line, in order>
//   stdout<<EOF
//   <exact expected stdout bytes>
//   EOF
CorpusOutcome runCorpus(const std::string& directory);

}  // namespace mck
