#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minicudak/source_loc.hpp"

namespace mck {

// Where a function may execute. Unattributed functions default to HostOnly;
// __global__ maps to Kernel, __device__ to DeviceOnly, and the combination
// __host__ __device__ to HostAndDevice.
enum class ExecSpace { HostOnly, DeviceOnly, HostAndDevice, Kernel };

const char* execSpaceName(ExecSpace s);

enum class BaseType { Void, Char, Int, UInt, Long, Float, Double };

// The supported C type shapes: scalar, pointer chains, and 1-D arrays
// (an array length of 0 marks the unsized `extern __shared__ T x[]` form).
struct CType {
    BaseType base = BaseType::Int;
    int ptr = 0;           // pointer depth
    int64_t arrayLen = -1; // -1: not an array

    bool isArray() const { return arrayLen >= 0; }
    bool isPointer() const { return !isArray() && ptr > 0; }
    bool isVoid() const { return base == BaseType::Void && ptr == 0 && !isArray(); }
    bool isFloating() const { return ptr == 0 && !isArray() && (base == BaseType::Float || base == BaseType::Double); }
    bool isInteger() const {
        return ptr == 0 && !isArray() &&
               (base == BaseType::Char || base == BaseType::Int || base == BaseType::UInt ||
                base == BaseType::Long);
    }

    // Type of one element / pointee.
    CType element() const {
        CType t = *this;
        if (isArray())
            t.arrayLen = -1;
        else
            --t.ptr;
        return t;
    }

    CType decayed() const {
        if (!isArray()) return *this;
        CType t = *this;
        t.arrayLen = -1;
        ++t.ptr;
        return t;
    }

    int64_t scalarSize() const;             // size of one element (pointer = 8)
    int64_t byteSize() const;               // whole object size (arrays included)
    int64_t bitSizeof() const { return byteSize() * 8; }
    std::string str() const;

    bool operator==(const CType&) const = default;
};

enum class UnOp { Neg, Not, BitNot, Deref, AddrOf };
enum class BinOp { Add, Sub, Mul, Div, Rem, Shl, Shr, Lt, Le, Gt, Ge, Eq, Ne, BitAnd, BitXor, BitOr, LAnd, LOr };

enum class ExprKind {
    IntLit,
    FloatLit,
    StrLit,
    Ident,
    Unary,
    Binary,
    Assign,   // plain or compound (see compoundOp)
    IncDec,
    Ternary,
    Call,
    Index,
    Member,   // lowered into Builtin or rejected
    Cast,
    SizeofType,
    Launch,
    Builtin,  // threadIdx.x and friends, produced by lowering
};

enum class BuiltinVar { ThreadIdx, BlockIdx, BlockDim, GridDim, WarpSize };

// How a resolved identifier binds.
enum class BindKind { Unresolved, LocalVar, GlobalVar, Function, EnumConst };

// Classification of a call's callee, filled in by lowering.
enum class CalleeKind { None, User, Printf, Api, Sync };
enum class SyncKind { Plain, And, Or, Count };

struct Expr {
    ExprKind kind = ExprKind::IntLit;
    SourceLoc loc;

    // literals / names
    int64_t ival = 0;
    double fval = 0.0;
    std::string text;    // identifier spelling, member name, or literal spelling
    std::string strval;  // StrLit bytes
    CType litType;       // literal type (suffix-aware)

    UnOp uop = UnOp::Neg;
    BinOp bop = BinOp::Add;
    bool hasCompoundOp = false;  // Assign: compound (bop applies)
    bool prefix = false;         // IncDec
    int incDelta = 0;            // IncDec: +1 / -1

    CType castType;  // Cast / SizeofType

    Expr* a = nullptr;  // operand / lhs / callee / cond
    Expr* b = nullptr;  // rhs / then
    Expr* c = nullptr;  // else
    std::vector<Expr*> args;  // Call and Launch arguments

    // Launch configuration <<<grid, block[, shmem[, stream]]>>>
    Expr* cfgGrid = nullptr;
    Expr* cfgBlock = nullptr;
    Expr* cfgShmem = nullptr;
    Expr* cfgStream = nullptr;

    // filled by lowering
    BindKind bind = BindKind::Unresolved;
    int bindIndex = -1;        // function index / global index
    int64_t constVal = 0;      // EnumConst value
    BuiltinVar builtinVar = BuiltinVar::ThreadIdx;
    int builtinComp = 0;       // 0=x 1=y 2=z
    CalleeKind callee = CalleeKind::None;
    int calleeIndex = -1;      // User: function index; Api: api id
    SyncKind syncKind = SyncKind::Plain;
    int strId = -1;            // StrLit: index into string pool
};

enum class StmtKind { Block, If, While, For, Return, Break, Continue, ExprSt, Decl, Empty };

struct Declarator {
    std::string name;
    CType type;
    Expr* init = nullptr;
    SourceLoc loc;
    bool isDynShared = false;  // extern __shared__ T name[]
    int symId = -1;            // interned name, filled by lowering
};

struct Stmt {
    StmtKind kind = StmtKind::Empty;
    SourceLoc loc;

    std::vector<Stmt*> body;  // Block
    Expr* cond = nullptr;     // If / While / For condition
    Stmt* thenS = nullptr;
    Stmt* elseS = nullptr;
    Stmt* loopBody = nullptr;
    Stmt* forInit = nullptr;  // Decl, ExprSt, or Empty
    Expr* forIncr = nullptr;
    Expr* expr = nullptr;     // ExprSt / Return value

    std::vector<Declarator> decls;  // Decl
    bool isExternShared = false;    // Decl: extern __shared__
};

struct Param {
    std::string name;  // may be empty in prototypes
    CType type;
    SourceLoc loc;
    int symId = -1;
};

struct FunctionDef {
    std::string name;
    CType ret;
    std::vector<Param> params;
    Stmt* body = nullptr;  // null for a prototype
    ExecSpace space = ExecSpace::HostOnly;
    bool noinline = false;
    SourceLoc loc;
    std::string dynSharedName;  // kernel's extern __shared__ symbol, if any
    int dynSharedSym = -1;
    int64_t dynSharedElem = 0;  // element size of the dynamic shared array
};

struct GlobalVar {
    std::string name;
    CType type;
    Expr* init = nullptr;  // constant expression or null
    bool isDevice = false; // __device__
    SourceLoc loc;
    int symId = -1;
    int64_t constInit = 0;   // lowered constant initializer (integers)
    double constInitF = 0.0; // for float/double globals
    bool hasInit = false;
};

struct TranslationUnit {
    std::string filename;
    std::deque<Expr> exprArena;
    std::deque<Stmt> stmtArena;
    std::vector<FunctionDef> functions;
    std::vector<GlobalVar> globals;
    std::vector<std::string> strings;  // string literal pool
    int mainIndex = -1;

    Expr* newExpr(ExprKind k, SourceLoc loc) {
        exprArena.emplace_back();
        exprArena.back().kind = k;
        exprArena.back().loc = loc;
        return &exprArena.back();
    }
    Stmt* newStmt(StmtKind k, SourceLoc loc) {
        stmtArena.emplace_back();
        stmtArena.back().kind = k;
        stmtArena.back().loc = loc;
        return &stmtArena.back();
    }
    const FunctionDef* findFunction(const std::string& name) const {
        for (const auto& f : functions)
            if (f.name == name) return &f;
        return nullptr;
    }
};

// Pretty-printing (parenthesized per precedence) and structural comparison,
// used by the reparse round-trip checks.
std::string printTranslationUnit(const TranslationUnit& tu);
bool structurallyEqual(const TranslationUnit& a, const TranslationUnit& b);

// Invokes fn on the source location of every node reachable from tu.
void forEachLoc(const TranslationUnit& tu, const std::function<void(SourceLoc)>& fn);

}  // namespace mck
