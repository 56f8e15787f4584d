#pragma once

#include <string>
#include <vector>

#include "minicudak/token.hpp"

namespace mck {

// Runs the tiny preprocessor (strip #include, expand object-like #define)
// and scans the result into a token stream terminated by Tok::End.
//
// <<< is produced only directly after an identifier, >>> only while a
// launch is open; otherwise the characters lex as shift/compare runs.
std::vector<Token> tokenize(const std::string& source, const std::string& filename);

}  // namespace mck
