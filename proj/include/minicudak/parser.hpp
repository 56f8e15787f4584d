#pragma once

#include <memory>
#include <string>
#include <vector>

#include "minicudak/ast.hpp"
#include "minicudak/token.hpp"

namespace mck {

// Parses a token stream into a translation unit. Throws ParseError.
std::shared_ptr<TranslationUnit> parse(std::vector<Token> tokens, const std::string& filename);

// Convenience: tokenize + parse.
std::shared_ptr<TranslationUnit> parseSource(const std::string& source, const std::string& filename);

}  // namespace mck
