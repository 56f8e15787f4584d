#pragma once

#include <compare>
#include <string>

namespace mck {

// Line/column position in the single input file. The file name itself is
// carried once by the translation unit, not by every token.
struct SourceLoc {
    int line = 0;  // 1-based
    int col = 0;   // 1-based

    bool valid() const { return line > 0; }
    auto operator<=>(const SourceLoc&) const = default;
};

inline std::string locStr(const std::string& file, SourceLoc loc) {
    return file + ":" + std::to_string(loc.line);
}

}  // namespace mck
