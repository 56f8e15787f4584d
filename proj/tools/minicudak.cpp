#include <sys/stat.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "minicudak/driver.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"minicudak - CUDA-C interpreter and concurrency checker"};

    mck::CliOptions opts;
    std::string schedule = "random";
    std::string corpusDir;
    bool noRaceCheck = false;
    bool emitScript = false;

    app.add_flag("--no-race-check", noRaceCheck, "disable the shared-memory race checker");
    app.add_option("--seed", opts.seed, "scheduler seed (default 0)");
    app.add_option("--schedule", schedule, "scheduler policy: random|roundrobin")
        ->check(CLI::IsMember({"random", "roundrobin"}));
    app.add_flag("--trace", opts.trace, "emit per-transition trace lines to stderr");
    app.add_option("--step-limit", opts.stepLimit, "abort after this many small steps");
    app.add_option("--arch", opts.archFile, "architecture-parameter file (key = integer lines)");
    app.add_flag("--emit-script", emitScript,
                 "write an a.out wrapper script instead of interpreting");
    app.add_option("--run-corpus", corpusDir,
                   "run every .cu fixture in a directory against its .expect sidecar");
    app.add_option("file", opts.inputPath, "CUDA-C source file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << "cudak: " << e.what() << "\n"
                  << app.help() << std::flush;
        return 2;
    }

    if (!corpusDir.empty()) {
        mck::CorpusOutcome c = mck::runCorpus(corpusDir);
        std::cout << c.table;
        std::cout << c.passed << " passed, " << c.failed << " failed\n";
        return c.failed == 0 ? 0 : 1;
    }

    if (opts.inputPath.empty()) {
        std::cerr << "cudak: no input file\n" << app.help() << std::flush;
        return 2;
    }

    opts.raceCheck = !noRaceCheck;
    opts.schedule = schedule == "roundrobin" ? mck::SchedulePolicy::RoundRobin
                                             : mck::SchedulePolicy::SeededRandom;
    opts.reportPath = opts.inputPath + ".cudak-report.txt";
    if (!opts.archFile.empty()) {
        try {
            opts.arch = mck::loadArchFile(opts.archFile);
        } catch (const std::exception& e) {
            std::cerr << "cudak: " << e.what() << "\n";
            return 2;
        }
    }

    if (emitScript) {
        // preserves the two-step compile-then-run feel: write ./a.out that
        // re-invokes the interpreter on this input
        std::string self = fs::weakly_canonical(fs::path(argv[0])).string();
        std::string input = fs::weakly_canonical(fs::path(opts.inputPath)).string();
        std::ofstream script("a.out");
        if (!script) {
            std::cerr << "cudak: cannot write a.out\n";
            return 2;
        }
        script << "#!/bin/sh\nexec \"" << self << "\"";
        if (!opts.raceCheck) script << " --no-race-check";
        if (opts.trace) script << " --trace";
        script << " --seed " << opts.seed << " --schedule " << schedule << " --step-limit "
               << opts.stepLimit;
        if (!opts.archFile.empty())
            script << " --arch \"" << fs::weakly_canonical(fs::path(opts.archFile)).string()
                   << "\"";
        script << " \"" << input << "\" \"$@\"\n";
        script.close();
        ::chmod("a.out", 0755);
        return 0;
    }

    mck::FileRunOutcome r = mck::runFile(opts, /*live=*/true);
    return r.exitCode;
}
