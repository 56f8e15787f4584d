#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minicudak/source_loc.hpp"

namespace mck {

enum class Tok {
    End,
    Ident,
    IntLit,
    FloatLit,
    CharLit,
    StrLit,
    // keywords
    KwVoid,
    KwChar,
    KwInt,
    KwUnsigned,
    KwLong,
    KwFloat,
    KwDouble,
    KwIf,
    KwElse,
    KwWhile,
    KwFor,
    KwReturn,
    KwBreak,
    KwContinue,
    KwSizeof,
    KwExtern,
    // CUDA attributes
    KwGlobal,       // __global__
    KwDevice,       // __device__
    KwHost,         // __host__
    KwShared,       // __shared__
    KwNoinline,     // __noinline__
    KwForceinline,  // __forceinline__
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    Arrow,
    Question,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    PlusPlus,
    MinusMinus,
    Amp,
    Pipe,
    Caret,
    Tilde,
    Bang,
    AmpAmp,
    PipePipe,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    BangEq,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    SlashAssign,
    PercentAssign,
    ShlAssign,
    ShrAssign,
    AmpAssign,
    PipeAssign,
    CaretAssign,
    LaunchOpen,   // <<<
    LaunchClose,  // >>>
};

const char* tokName(Tok t);

struct Token {
    Tok kind = Tok::End;
    std::string text;       // identifier spelling / literal spelling
    int64_t ival = 0;       // IntLit / CharLit value
    double fval = 0.0;      // FloatLit value
    std::string strval;     // StrLit decoded bytes (no quotes, escapes applied)
    bool isUnsigned = false;  // literal suffix u/U
    bool isLong = false;      // literal suffix l/L
    bool isFloat = false;     // literal suffix f/F (FloatLit)
    SourceLoc loc;
};

}  // namespace mck
