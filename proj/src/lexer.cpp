#include "minicudak/lexer.hpp"

#include <cctype>
#include <map>
#include <set>

#include "minicudak/diagnostics.hpp"

namespace mck {

const char* tokName(Tok t) {
    switch (t) {
        case Tok::End: return "end of input";
        case Tok::Ident: return "identifier";
        case Tok::IntLit: return "integer literal";
        case Tok::FloatLit: return "float literal";
        case Tok::CharLit: return "character literal";
        case Tok::StrLit: return "string literal";
        case Tok::KwVoid: return "'void'";
        case Tok::KwChar: return "'char'";
        case Tok::KwInt: return "'int'";
        case Tok::KwUnsigned: return "'unsigned'";
        case Tok::KwLong: return "'long'";
        case Tok::KwFloat: return "'float'";
        case Tok::KwDouble: return "'double'";
        case Tok::KwIf: return "'if'";
        case Tok::KwElse: return "'else'";
        case Tok::KwWhile: return "'while'";
        case Tok::KwFor: return "'for'";
        case Tok::KwReturn: return "'return'";
        case Tok::KwBreak: return "'break'";
        case Tok::KwContinue: return "'continue'";
        case Tok::KwSizeof: return "'sizeof'";
        case Tok::KwExtern: return "'extern'";
        case Tok::KwGlobal: return "'__global__'";
        case Tok::KwDevice: return "'__device__'";
        case Tok::KwHost: return "'__host__'";
        case Tok::KwShared: return "'__shared__'";
        case Tok::KwNoinline: return "'__noinline__'";
        case Tok::KwForceinline: return "'__forceinline__'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::LBrace: return "'{'";
        case Tok::RBrace: return "'}'";
        case Tok::LBracket: return "'['";
        case Tok::RBracket: return "']'";
        case Tok::Semi: return "';'";
        case Tok::Comma: return "','";
        case Tok::Dot: return "'.'";
        case Tok::Arrow: return "'->'";
        case Tok::Question: return "'?'";
        case Tok::Colon: return "':'";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::Percent: return "'%'";
        case Tok::PlusPlus: return "'++'";
        case Tok::MinusMinus: return "'--'";
        case Tok::Amp: return "'&'";
        case Tok::Pipe: return "'|'";
        case Tok::Caret: return "'^'";
        case Tok::Tilde: return "'~'";
        case Tok::Bang: return "'!'";
        case Tok::AmpAmp: return "'&&'";
        case Tok::PipePipe: return "'||'";
        case Tok::Shl: return "'<<'";
        case Tok::Shr: return "'>>'";
        case Tok::Lt: return "'<'";
        case Tok::Le: return "'<='";
        case Tok::Gt: return "'>'";
        case Tok::Ge: return "'>='";
        case Tok::EqEq: return "'=='";
        case Tok::BangEq: return "'!='";
        case Tok::Assign: return "'='";
        case Tok::PlusAssign: return "'+='";
        case Tok::MinusAssign: return "'-='";
        case Tok::StarAssign: return "'*='";
        case Tok::SlashAssign: return "'/='";
        case Tok::PercentAssign: return "'%='";
        case Tok::ShlAssign: return "'<<='";
        case Tok::ShrAssign: return "'>>='";
        case Tok::AmpAssign: return "'&='";
        case Tok::PipeAssign: return "'|='";
        case Tok::CaretAssign: return "'^='";
        case Tok::LaunchOpen: return "'<<<'";
        case Tok::LaunchClose: return "'>>>'";
    }
    return "?";
}

namespace {

const std::map<std::string, Tok>& keywordTable() {
    static const std::map<std::string, Tok> table = {
        {"void", Tok::KwVoid},
        {"char", Tok::KwChar},
        {"int", Tok::KwInt},
        {"unsigned", Tok::KwUnsigned},
        {"long", Tok::KwLong},
        {"float", Tok::KwFloat},
        {"double", Tok::KwDouble},
        {"if", Tok::KwIf},
        {"else", Tok::KwElse},
        {"while", Tok::KwWhile},
        {"for", Tok::KwFor},
        {"return", Tok::KwReturn},
        {"break", Tok::KwBreak},
        {"continue", Tok::KwContinue},
        {"sizeof", Tok::KwSizeof},
        {"extern", Tok::KwExtern},
        {"__global__", Tok::KwGlobal},
        {"__device__", Tok::KwDevice},
        {"__host__", Tok::KwHost},
        {"__shared__", Tok::KwShared},
        {"__noinline__", Tok::KwNoinline},
        {"__forceinline__", Tok::KwForceinline},
    };
    return table;
}

// Raw scanner over preprocessed text. Produces tokens without macro
// expansion or launch-bracket context (those are applied by the caller).
class Scanner {
public:
    Scanner(const std::string& text) : src_(text) {}

    bool atEnd() const { return pos_ >= src_.size(); }

    void skipSpaceAndComments() {
        while (!atEnd()) {
            char c = src_[pos_];
            if (c == '\n') {
                ++line_;
                col_ = 1;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && peek(1) == '/') {
                while (!atEnd() && src_[pos_] != '\n') advance();
            } else if (c == '/' && peek(1) == '*') {
                SourceLoc start = here();
                advance();
                advance();
                while (!atEnd() && !(src_[pos_] == '*' && peek(1) == '/')) {
                    if (src_[pos_] == '\n') {
                        ++line_;
                        col_ = 1;
                        ++pos_;
                    } else {
                        advance();
                    }
                }
                if (atEnd()) throw LexError(start, "unterminated comment");
                advance();
                advance();
            } else {
                break;
            }
        }
    }

    SourceLoc here() const { return SourceLoc{line_, col_}; }
    char cur() const { return atEnd() ? '\0' : src_[pos_]; }
    char peek(size_t n) const { return pos_ + n < src_.size() ? src_[pos_ + n] : '\0'; }

    void advance() {
        ++pos_;
        ++col_;
    }

    Token scanIdent() {
        Token t;
        t.loc = here();
        size_t start = pos_;
        while (!atEnd() && (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_')) advance();
        t.text = src_.substr(start, pos_ - start);
        auto it = keywordTable().find(t.text);
        t.kind = it != keywordTable().end() ? it->second : Tok::Ident;
        return t;
    }

    Token scanNumber() {
        Token t;
        t.loc = here();
        size_t start = pos_;
        bool isFloat = false;
        if (cur() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
            advance();
            advance();
            while (std::isxdigit(static_cast<unsigned char>(cur()))) advance();
            t.kind = Tok::IntLit;
            t.text = src_.substr(start, pos_ - start);
            t.ival = static_cast<int64_t>(std::stoull(t.text, nullptr, 16));
            scanIntSuffix(t);
            return t;
        }
        while (std::isdigit(static_cast<unsigned char>(cur()))) advance();
        if (cur() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            isFloat = true;
            advance();
            while (std::isdigit(static_cast<unsigned char>(cur()))) advance();
        }
        if (cur() == 'e' || cur() == 'E') {
            size_t save = pos_;
            advance();
            if (cur() == '+' || cur() == '-') advance();
            if (std::isdigit(static_cast<unsigned char>(cur()))) {
                isFloat = true;
                while (std::isdigit(static_cast<unsigned char>(cur()))) advance();
            } else {
                pos_ = save;  // not an exponent after all
            }
        }
        t.text = src_.substr(start, pos_ - start);
        if (isFloat) {
            t.kind = Tok::FloatLit;
            t.fval = std::stod(t.text);
            if (cur() == 'f' || cur() == 'F') {
                t.isFloat = true;
                advance();
            }
        } else {
            t.kind = Tok::IntLit;
            t.ival = static_cast<int64_t>(std::stoll(t.text));
            scanIntSuffix(t);
        }
        return t;
    }

    void scanIntSuffix(Token& t) {
        while (cur() == 'u' || cur() == 'U' || cur() == 'l' || cur() == 'L') {
            if (cur() == 'u' || cur() == 'U') t.isUnsigned = true;
            if (cur() == 'l' || cur() == 'L') t.isLong = true;
            advance();
        }
    }

    char scanEscape(SourceLoc start) {
        advance();  // backslash
        char c = cur();
        advance();
        switch (c) {
            case 'n': return '\n';
            case 't': return '\t';
            case 'r': return '\r';
            case '0': return '\0';
            case '\\': return '\\';
            case '\'': return '\'';
            case '"': return '"';
            default: throw LexError(start, std::string("unknown escape sequence '\\") + c + "'");
        }
    }

    Token scanChar() {
        Token t;
        t.loc = here();
        t.kind = Tok::CharLit;
        advance();  // opening quote
        if (atEnd() || cur() == '\n') throw LexError(t.loc, "unterminated character literal");
        char v;
        if (cur() == '\\') {
            v = scanEscape(t.loc);
        } else {
            v = cur();
            advance();
        }
        if (cur() != '\'') throw LexError(t.loc, "unterminated character literal");
        advance();
        t.ival = static_cast<int64_t>(v);
        return t;
    }

    Token scanString() {
        Token t;
        t.loc = here();
        t.kind = Tok::StrLit;
        advance();  // opening quote
        while (!atEnd() && cur() != '"') {
            if (cur() == '\n') throw LexError(t.loc, "unterminated string literal");
            if (cur() == '\\') {
                t.strval += scanEscape(t.loc);
            } else {
                t.strval += cur();
                advance();
            }
        }
        if (atEnd()) throw LexError(t.loc, "unterminated string literal");
        advance();
        return t;
    }

    // Scans one punctuation token, without launch-bracket merging.
    Token scanPunct() {
        Token t;
        t.loc = here();
        char c = cur();
        auto make = [&](Tok k, int len) {
            t.kind = k;
            for (int i = 0; i < len; ++i) advance();
            return t;
        };
        switch (c) {
            case '(': return make(Tok::LParen, 1);
            case ')': return make(Tok::RParen, 1);
            case '{': return make(Tok::LBrace, 1);
            case '}': return make(Tok::RBrace, 1);
            case '[': return make(Tok::LBracket, 1);
            case ']': return make(Tok::RBracket, 1);
            case ';': return make(Tok::Semi, 1);
            case ',': return make(Tok::Comma, 1);
            case '?': return make(Tok::Question, 1);
            case ':': return make(Tok::Colon, 1);
            case '~': return make(Tok::Tilde, 1);
            case '.': return make(Tok::Dot, 1);
            case '+':
                if (peek(1) == '+') return make(Tok::PlusPlus, 2);
                if (peek(1) == '=') return make(Tok::PlusAssign, 2);
                return make(Tok::Plus, 1);
            case '-':
                if (peek(1) == '-') return make(Tok::MinusMinus, 2);
                if (peek(1) == '=') return make(Tok::MinusAssign, 2);
                if (peek(1) == '>') return make(Tok::Arrow, 2);
                return make(Tok::Minus, 1);
            case '*':
                if (peek(1) == '=') return make(Tok::StarAssign, 2);
                return make(Tok::Star, 1);
            case '/':
                if (peek(1) == '=') return make(Tok::SlashAssign, 2);
                return make(Tok::Slash, 1);
            case '%':
                if (peek(1) == '=') return make(Tok::PercentAssign, 2);
                return make(Tok::Percent, 1);
            case '&':
                if (peek(1) == '&') return make(Tok::AmpAmp, 2);
                if (peek(1) == '=') return make(Tok::AmpAssign, 2);
                return make(Tok::Amp, 1);
            case '|':
                if (peek(1) == '|') return make(Tok::PipePipe, 2);
                if (peek(1) == '=') return make(Tok::PipeAssign, 2);
                return make(Tok::Pipe, 1);
            case '^':
                if (peek(1) == '=') return make(Tok::CaretAssign, 2);
                return make(Tok::Caret, 1);
            case '!':
                if (peek(1) == '=') return make(Tok::BangEq, 2);
                return make(Tok::Bang, 1);
            case '=':
                if (peek(1) == '=') return make(Tok::EqEq, 2);
                return make(Tok::Assign, 1);
            case '<':
                if (peek(1) == '<' && peek(2) == '=') return make(Tok::ShlAssign, 3);
                if (peek(1) == '<') return make(Tok::Shl, 2);
                if (peek(1) == '=') return make(Tok::Le, 2);
                return make(Tok::Lt, 1);
            case '>':
                if (peek(1) == '>' && peek(2) == '=') return make(Tok::ShrAssign, 3);
                if (peek(1) == '>') return make(Tok::Shr, 2);
                if (peek(1) == '=') return make(Tok::Ge, 2);
                return make(Tok::Gt, 1);
            default:
                throw LexError(t.loc, std::string("illegal character '") + c + "'");
        }
    }

    // True when the next three characters are exactly this run.
    bool lookingAt3(char c) const { return cur() == c && peek(1) == c && peek(2) == c; }

private:
    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

struct Macro {
    std::vector<Token> replacement;
};

// Strips #include lines and collects #define NAME value macros. Directive
// lines are blanked in place so source line numbers stay intact.
std::string preprocess(const std::string& source, std::map<std::string, Macro>& macros) {
    std::string out;
    out.reserve(source.size());
    size_t pos = 0;
    int line = 1;
    while (pos < source.size()) {
        size_t eol = source.find('\n', pos);
        if (eol == std::string::npos) eol = source.size();
        std::string text = source.substr(pos, eol - pos);
        size_t first = text.find_first_not_of(" \t");
        if (first != std::string::npos && text[first] == '#') {
            std::string body = text.substr(first + 1);
            size_t b = body.find_first_not_of(" \t");
            std::string directive = b == std::string::npos ? "" : body.substr(b);
            if (directive.rfind("include", 0) == 0) {
                // dropped entirely
            } else if (directive.rfind("define", 0) == 0) {
                std::string rest = directive.substr(6);
                size_t np = rest.find_first_not_of(" \t");
                if (np == std::string::npos)
                    throw LexError({line, static_cast<int>(first) + 1}, "#define without a name");
                size_t ne = np;
                while (ne < rest.size() &&
                       (std::isalnum(static_cast<unsigned char>(rest[ne])) || rest[ne] == '_'))
                    ++ne;
                std::string name = rest.substr(np, ne - np);
                if (name.empty())
                    throw LexError({line, static_cast<int>(first) + 1}, "#define without a name");
                if (ne < rest.size() && rest[ne] == '(')
                    throw LexError({line, static_cast<int>(first) + 1},
                                   "function-like macro '" + name + "' is not supported");
                std::string value = rest.substr(ne);
                // Lex the replacement once, then relocate per use.
                Scanner s(value);
                std::vector<Token> repl;
                s.skipSpaceAndComments();
                while (!s.atEnd()) {
                    char c = s.cur();
                    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                        repl.push_back(s.scanIdent());
                    } else if (std::isdigit(static_cast<unsigned char>(c))) {
                        repl.push_back(s.scanNumber());
                    } else if (c == '\'') {
                        repl.push_back(s.scanChar());
                    } else if (c == '"') {
                        repl.push_back(s.scanString());
                    } else {
                        repl.push_back(s.scanPunct());
                    }
                    s.skipSpaceAndComments();
                }
                macros[name] = Macro{std::move(repl)};
            } else {
                throw LexError({line, static_cast<int>(first) + 1},
                               "unsupported preprocessor directive");
            }
            // keep the newline, drop the content
        } else {
            out += text;
        }
        if (eol < source.size()) out += '\n';
        pos = eol + 1;
        ++line;
    }
    return out;
}

}  // namespace

std::vector<Token> tokenize(const std::string& source, const std::string& filename) {
    (void)filename;
    std::map<std::string, Macro> macros;
    std::string text = preprocess(source, macros);

    Scanner s(text);
    std::vector<Token> out;
    int launchDepth = 0;

    // Pending tokens from macro expansion, consumed before scanning more
    // input. Expansion is rescanning: identifiers inside a replacement may
    // expand again, guarded by a depth limit.
    struct Pending {
        Token tok;
        int depth;
    };
    std::vector<Pending> pending;  // stack, back = next

    auto lastKind = [&]() { return out.empty() ? Tok::End : out.back().kind; };

    auto pushExpansion = [&](const Macro& m, SourceLoc useLoc, int depth) {
        if (depth > 32) throw LexError(useLoc, "macro expansion too deep");
        for (auto it = m.replacement.rbegin(); it != m.replacement.rend(); ++it) {
            Token t = *it;
            t.loc = useLoc;  // diagnostics point at the use site
            pending.push_back(Pending{std::move(t), depth});
        }
    };

    while (true) {
        Token t;
        int depth = 0;
        if (!pending.empty()) {
            t = std::move(pending.back().tok);
            depth = pending.back().depth;
            pending.pop_back();
        } else {
            s.skipSpaceAndComments();
            if (s.atEnd()) break;
            char c = s.cur();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t = s.scanIdent();
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                t = s.scanNumber();
            } else if (c == '\'') {
                t = s.scanChar();
            } else if (c == '"') {
                t = s.scanString();
            } else if (s.lookingAt3('<') && lastKind() == Tok::Ident && launchDepth == 0) {
                t.kind = Tok::LaunchOpen;
                t.loc = s.here();
                s.advance();
                s.advance();
                s.advance();
            } else if (s.lookingAt3('>') && launchDepth > 0) {
                t.kind = Tok::LaunchClose;
                t.loc = s.here();
                s.advance();
                s.advance();
                s.advance();
            } else {
                t = s.scanPunct();
            }
        }

        if (t.kind == Tok::Ident) {
            auto it = macros.find(t.text);
            if (it != macros.end()) {
                pushExpansion(it->second, t.loc, depth + 1);
                continue;
            }
        }
        if (t.kind == Tok::LaunchOpen) ++launchDepth;
        if (t.kind == Tok::LaunchClose) --launchDepth;
        out.push_back(std::move(t));
    }

    Token end;
    end.kind = Tok::End;
    end.loc = s.here();
    out.push_back(end);
    return out;
}

}  // namespace mck
