#pragma once

#include <string>
#include <vector>

#include "minicudak/source_loc.hpp"

namespace mck {

enum class Severity { Error, Warning };

enum class DiagCategory {
    Race,
    Deadlock,
    MemBoundary,
    UndefinedBehavior,
    ApiError,
};

const char* categoryName(DiagCategory c);

// One reported problem. `message` is the full text as printed after the
// "cudak: " prefix; it already names file:line where applicable.
struct Diagnostic {
    Severity severity = Severity::Error;
    DiagCategory category = DiagCategory::UndefinedBehavior;
    std::string message;
    SourceLoc loc;

    bool operator==(const Diagnostic&) const = default;
};

// Frontend failures abort interpretation outright, so they are exceptions
// rather than accumulated diagnostics.
struct FrontendError {
    std::string stage;  // "lex", "parse", "semantic"
    SourceLoc loc;
    std::string message;
};

struct LexError : FrontendError {
    LexError(SourceLoc l, std::string m) : FrontendError{"lex", l, std::move(m)} {}
};

struct ParseError : FrontendError {
    ParseError(SourceLoc l, std::string expected, std::string found)
        : FrontendError{"parse", l, "expected " + expected + ", found " + found},
          expected(std::move(expected)),
          found(std::move(found)) {}
    std::string expected;
    std::string found;
};

struct SemanticError : FrontendError {
    SemanticError(SourceLoc l, std::string m) : FrontendError{"semantic", l, std::move(m)} {}
};

}  // namespace mck
