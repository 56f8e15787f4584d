#include "minicudak/diagnostics.hpp"

namespace mck {

const char* categoryName(DiagCategory c) {
    switch (c) {
        case DiagCategory::Race: return "race";
        case DiagCategory::Deadlock: return "deadlock";
        case DiagCategory::MemBoundary: return "memBoundary";
        case DiagCategory::UndefinedBehavior: return "undefinedBehavior";
        case DiagCategory::ApiError: return "apiError";
    }
    return "?";
}

}  // namespace mck
