#include "minicudak/driver.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "minicudak/diagnostics.hpp"
#include "minicudak/parser.hpp"

namespace fs = std::filesystem;

namespace mck {

namespace {

std::string readWholeFile(const std::string& path, bool& ok) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    ok = true;
    return ss.str();
}

std::string frontendErrorLine(const std::string& file, const FrontendError& e) {
    return "cudak: " + file + ":" + std::to_string(e.loc.line) + ":" +
           std::to_string(e.loc.col) + ": " + e.stage + " error: " + e.message;
}

}  // namespace

ArchParams loadArchFile(const std::string& path) {
    ArchParams arch;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open architecture file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t h = line.find('#');
        if (h != std::string::npos) line = line.substr(0, h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'key = integer'");
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        int64_t v;
        try {
            v = std::stoll(val);
        } catch (...) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": '" + val + "' is not an integer");
        }
        if (key == "warpSize")
            arch.warpSize = v;
        else if (key == "computeCapabilityMajor")
            arch.computeCapabilityMajor = v;
        else if (key == "computeCapabilityMinor")
            arch.computeCapabilityMinor = v;
        else if (key == "maxThreadsPerBlock")
            arch.maxThreadsPerBlock = v;
        else if (key == "driverVersion")
            arch.driverVersion = v;
        else if (key == "runtimeVersion")
            arch.runtimeVersion = v;
        else
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": unknown architecture key '" + key + "'");
    }
    return arch;
}

FileRunOutcome runFile(const CliOptions& opts, bool live) {
    FileRunOutcome out;

    bool ok = false;
    std::string source = readWholeFile(opts.inputPath, ok);
    if (!ok) {
        out.frontendError = true;
        out.exitCode = 2;
        out.stderrText = "cudak: cannot open input file '" + opts.inputPath + "'\n";
        if (live) std::fputs(out.stderrText.c_str(), stderr);
        return out;
    }

    std::shared_ptr<const Program> prog;
    try {
        prog = compileSource(source, opts.inputPath);
    } catch (const FrontendError& e) {
        out.frontendError = true;
        out.exitCode = 2;
        out.stderrText = frontendErrorLine(opts.inputPath, e) + "\n";
        if (live) std::fputs(out.stderrText.c_str(), stderr);
        return out;
    }

    RunOptions ro;
    ro.policy = opts.schedule;
    ro.seed = opts.seed;
    ro.raceCheck = opts.raceCheck;
    ro.stepLimit = opts.stepLimit;
    ro.trace = opts.trace;
    ro.arch = opts.arch;

    Machine m(prog, ro);
    size_t flushed = 0;
    if (live) {
        m.onOutput = [&](const std::string&) {
            const std::string& o = m.config().output;
            size_t nl = o.find_last_of('\n');
            if (nl != std::string::npos && nl + 1 > flushed) {
                std::fwrite(o.data() + flushed, 1, nl + 1 - flushed, stdout);
                std::fflush(stdout);
                flushed = nl + 1;
            }
        };
    }
    if (opts.trace) {
        m.onTrace = [&](const std::string& line) {
            std::string t = "cudak: trace: " + line + "\n";
            out.stderrText += t;
            if (live) std::fputs(t.c_str(), stderr);
        };
    }

    out.run = m.run();
    out.exitCode = out.run.exitCode;
    out.stdoutText = out.run.output;
    if (live && out.stdoutText.size() > flushed)
        std::fwrite(out.stdoutText.data() + flushed, 1, out.stdoutText.size() - flushed, stdout);

    for (const Diagnostic& d : out.run.diagnostics) {
        std::string line = "cudak: " + d.message + "\n";
        out.stderrText += line;
        if (live) std::fputs(line.c_str(), stderr);
    }

    if (out.run.stuck && !opts.reportPath.empty()) {
        std::ofstream rep(opts.reportPath);
        if (rep) {
            rep << "stuck-state report for " << opts.inputPath << "\n\n";
            rep << formatStuckReports(out.run.stuckReports) << "\n";
            rep << "final configuration:\n" << dumpConfiguration(m);
        }
    }
    return out;
}

namespace {

struct Expectation {
    int exitCode = 0;
    std::vector<std::string> extraArgs;
    std::vector<std::string> stderrRes;
    std::string stdoutText;
    bool valid = true;
    std::string problem;
};

Expectation parseExpect(const std::string& path) {
    Expectation e;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        e.valid = false;
        e.problem = "missing sidecar " + path;
        return e;
    }
    std::string line;
    bool inStdout = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (inStdout) {
            if (line == "EOF") {
                inStdout = false;
                continue;
            }
            e.stdoutText += line + "\n";
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        if (line == "stdout<<EOF") {
            inStdout = true;
        } else if (line.rfind("exit ", 0) == 0) {
            e.exitCode = std::stoi(line.substr(5));
        } else if (line.rfind("args ", 0) == 0) {
            std::istringstream ss(line.substr(5));
            std::string a;
            while (ss >> a) e.extraArgs.push_back(a);
        } else if (line.rfind("stderr-re ", 0) == 0) {
            e.stderrRes.push_back(line.substr(10));
        } else {
            e.valid = false;
            e.problem = "unrecognized sidecar line: " + line;
            return e;
        }
    }
    if (inStdout) {
        e.valid = false;
        e.problem = "unterminated stdout<<EOF block";
    }
    return e;
}

// Minimal option parsing for sidecar `args` lines.
bool applyExtraArgs(CliOptions& opts, const std::vector<std::string>& args, std::string& err) {
    for (size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        auto next = [&](uint64_t& dst) {
            if (i + 1 >= args.size()) return false;
            dst = std::stoull(args[++i]);
            return true;
        };
        if (a == "--no-race-check") {
            opts.raceCheck = false;
        } else if (a == "--trace") {
            opts.trace = true;
        } else if (a == "--seed") {
            if (!next(opts.seed)) {
                err = "--seed needs a value";
                return false;
            }
        } else if (a == "--step-limit") {
            if (!next(opts.stepLimit)) {
                err = "--step-limit needs a value";
                return false;
            }
        } else if (a == "--schedule") {
            if (i + 1 >= args.size()) {
                err = "--schedule needs a value";
                return false;
            }
            std::string v = args[++i];
            if (v == "random")
                opts.schedule = SchedulePolicy::SeededRandom;
            else if (v == "roundrobin")
                opts.schedule = SchedulePolicy::RoundRobin;
            else {
                err = "unknown schedule '" + v + "'";
                return false;
            }
        } else {
            err = "unknown option '" + a + "' in sidecar args";
            return false;
        }
    }
    return true;
}

std::vector<std::string> splitLines(const std::string& text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

}  // namespace

CorpusOutcome runCorpus(const std::string& directory) {
    CorpusOutcome out;
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(directory, ec)) {
        if (entry.path().extension() == ".cu") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    for (const fs::path& f : files) {
        std::string name = f.filename().string();
        fs::path sidecar = f;
        sidecar.replace_extension(".expect");
        Expectation e = parseExpect(sidecar.string());
        auto fail = [&](const std::string& why) {
            ++out.failed;
            out.table += "FAIL " + name + " (" + why + ")\n";
        };
        if (!e.valid) {
            fail(e.problem);
            continue;
        }
        CliOptions opts;
        opts.inputPath = f.string();
        std::string argErr;
        if (!applyExtraArgs(opts, e.extraArgs, argErr)) {
            fail(argErr);
            continue;
        }
        FileRunOutcome r = runFile(opts);
        if (r.exitCode != e.exitCode) {
            fail("exit code " + std::to_string(r.exitCode) + ", expected " +
                 std::to_string(e.exitCode));
            continue;
        }
        if (r.stdoutText != e.stdoutText) {
            fail("stdout mismatch");
            continue;
        }
        std::vector<std::string> errLines = splitLines(r.stderrText);
        if (errLines.size() != e.stderrRes.size()) {
            fail("stderr has " + std::to_string(errLines.size()) + " line(s), expected " +
                 std::to_string(e.stderrRes.size()));
            continue;
        }
        bool matched = true;
        for (size_t i = 0; i < errLines.size(); ++i) {
            std::regex re(e.stderrRes[i]);
            if (!std::regex_match(errLines[i], re)) {
                fail("stderr line " + std::to_string(i + 1) + " does not match /" +
                     e.stderrRes[i] + "/");
                matched = false;
                break;
            }
        }
        if (!matched) continue;
        ++out.passed;
        out.table += "PASS " + name + "\n";
    }
    return out;
}

}  // namespace mck
