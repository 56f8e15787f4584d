#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "minicudak/driver.hpp"
#include "minicudak/machine.hpp"
#include "minicudak/parser.hpp"

namespace mcktest {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::shared_ptr<const mck::Program> compile(const std::string& src,
                                                   const std::string& name = "test.cu") {
    return mck::compileSource(src, name);
}

inline mck::RunResult runSource(const std::string& src, mck::RunOptions opts = {},
                                const std::string& name = "test.cu") {
    mck::Machine m(compile(src, name), opts);
    return m.run();
}

inline int raceDiagCount(const mck::RunResult& r) {
    int n = 0;
    for (const auto& d : r.diagnostics)
        if (d.category == mck::DiagCategory::Race) ++n;
    return n;
}

inline bool hasCategory(const mck::RunResult& r, mck::DiagCategory cat) {
    for (const auto& d : r.diagnostics)
        if (d.category == cat) return true;
    return false;
}

inline std::string corpusPath(const std::string& name) {
    return std::string(MCK_CORPUS_DIR) + "/" + name;
}

}  // namespace mcktest
