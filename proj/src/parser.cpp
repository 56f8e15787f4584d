#include "minicudak/parser.hpp"

#include <set>

#include "minicudak/diagnostics.hpp"
#include "minicudak/lexer.hpp"

namespace mck {

namespace {

// Type-name identifiers accepted as aliases of built-in bases. Handle types
// are plain integers in this model.
struct TypeAlias {
    BaseType base;
    int ptr;
};

const std::map<std::string, TypeAlias>& typeAliases() {
    static const std::map<std::string, TypeAlias> table = {
        {"cudaStream_t", {BaseType::Long, 0}},
        {"cudaEvent_t", {BaseType::Long, 0}},
        {"cudaError_t", {BaseType::Int, 0}},
        {"size_t", {BaseType::Long, 0}},
    };
    return table;
}

class Parser {
public:
    Parser(std::vector<Token> toks, const std::string& filename)
        : toks_(std::move(toks)) {
        tu_ = std::make_shared<TranslationUnit>();
        tu_->filename = filename;
    }

    std::shared_ptr<TranslationUnit> run() {
        while (!at(Tok::End)) topLevel();
        return tu_;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
    std::shared_ptr<TranslationUnit> tu_;

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(size_t n = 1) const {
        size_t i = pos_ + n;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    bool at(Tok k) const { return cur().kind == k; }

    Token take() { return toks_[pos_++]; }

    [[noreturn]] void fail(const std::string& expected) {
        std::string found = tokName(cur().kind);
        if (cur().kind == Tok::Ident) found = "'" + cur().text + "'";
        throw ParseError(cur().loc, expected, found);
    }

    Token expect(Tok k, const std::string& what) {
        if (!at(k)) fail(what);
        return take();
    }

    bool accept(Tok k) {
        if (at(k)) {
            ++pos_;
            return true;
        }
        return false;
    }

    // ----- types -----

    bool atTypeStart() const {
        switch (cur().kind) {
            case Tok::KwVoid:
            case Tok::KwChar:
            case Tok::KwInt:
            case Tok::KwUnsigned:
            case Tok::KwLong:
            case Tok::KwFloat:
            case Tok::KwDouble:
                return true;
            case Tok::Ident:
                return typeAliases().count(cur().text) > 0;
            default:
                return false;
        }
    }

    // Parses a base type specifier (no declarator part).
    CType parseBaseType() {
        CType t;
        switch (cur().kind) {
            case Tok::KwVoid: t.base = BaseType::Void; take(); break;
            case Tok::KwChar: t.base = BaseType::Char; take(); break;
            case Tok::KwInt: t.base = BaseType::Int; take(); break;
            case Tok::KwLong:
                t.base = BaseType::Long;
                take();
                accept(Tok::KwInt);  // "long int"
                break;
            case Tok::KwFloat: t.base = BaseType::Float; take(); break;
            case Tok::KwDouble: t.base = BaseType::Double; take(); break;
            case Tok::KwUnsigned:
                take();
                accept(Tok::KwInt);  // "unsigned" / "unsigned int"
                t.base = BaseType::UInt;
                break;
            case Tok::Ident: {
                auto it = typeAliases().find(cur().text);
                if (it == typeAliases().end()) fail("a type name");
                t.base = it->second.base;
                t.ptr = it->second.ptr;
                take();
                break;
            }
            default:
                fail("a type name");
        }
        return t;
    }

    // ----- expressions -----

    Expr* newE(ExprKind k, SourceLoc loc) { return tu_->newExpr(k, loc); }

    Expr* parseExpr() { return parseAssign(); }

    Expr* parseAssign() {
        Expr* lhs = parseTernary();
        struct CompoundMap {
            Tok tok;
            BinOp op;
        };
        static const CompoundMap compounds[] = {
            {Tok::PlusAssign, BinOp::Add}, {Tok::MinusAssign, BinOp::Sub},
            {Tok::StarAssign, BinOp::Mul}, {Tok::SlashAssign, BinOp::Div},
            {Tok::PercentAssign, BinOp::Rem}, {Tok::ShlAssign, BinOp::Shl},
            {Tok::ShrAssign, BinOp::Shr}, {Tok::AmpAssign, BinOp::BitAnd},
            {Tok::PipeAssign, BinOp::BitOr}, {Tok::CaretAssign, BinOp::BitXor},
        };
        if (at(Tok::Assign)) {
            SourceLoc loc = take().loc;
            Expr* e = newE(ExprKind::Assign, loc);
            e->a = lhs;
            e->b = parseAssign();
            return e;
        }
        for (const auto& m : compounds) {
            if (at(m.tok)) {
                SourceLoc loc = take().loc;
                Expr* e = newE(ExprKind::Assign, loc);
                e->hasCompoundOp = true;
                e->bop = m.op;
                e->a = lhs;
                e->b = parseAssign();
                return e;
            }
        }
        return lhs;
    }

    Expr* parseTernary() {
        Expr* cond = parseBinary(1);
        if (!at(Tok::Question)) return cond;
        SourceLoc loc = take().loc;
        Expr* e = newE(ExprKind::Ternary, loc);
        e->a = cond;
        e->b = parseAssign();
        expect(Tok::Colon, "':'");
        e->c = parseAssign();
        return e;
    }

    struct BinInfo {
        int prec;
        BinOp op;
    };

    bool binInfo(Tok t, BinInfo& out) const {
        switch (t) {
            case Tok::Star: out = {10, BinOp::Mul}; return true;
            case Tok::Slash: out = {10, BinOp::Div}; return true;
            case Tok::Percent: out = {10, BinOp::Rem}; return true;
            case Tok::Plus: out = {9, BinOp::Add}; return true;
            case Tok::Minus: out = {9, BinOp::Sub}; return true;
            case Tok::Shl: out = {8, BinOp::Shl}; return true;
            case Tok::Shr: out = {8, BinOp::Shr}; return true;
            case Tok::Lt: out = {7, BinOp::Lt}; return true;
            case Tok::Le: out = {7, BinOp::Le}; return true;
            case Tok::Gt: out = {7, BinOp::Gt}; return true;
            case Tok::Ge: out = {7, BinOp::Ge}; return true;
            case Tok::EqEq: out = {6, BinOp::Eq}; return true;
            case Tok::BangEq: out = {6, BinOp::Ne}; return true;
            case Tok::Amp: out = {5, BinOp::BitAnd}; return true;
            case Tok::Caret: out = {4, BinOp::BitXor}; return true;
            case Tok::Pipe: out = {3, BinOp::BitOr}; return true;
            case Tok::AmpAmp: out = {2, BinOp::LAnd}; return true;
            case Tok::PipePipe: out = {1, BinOp::LOr}; return true;
            default: return false;
        }
    }

    Expr* parseBinary(int minPrec) {
        Expr* lhs = parseUnary();
        while (true) {
            BinInfo info;
            if (!binInfo(cur().kind, info) || info.prec < minPrec) return lhs;
            SourceLoc loc = take().loc;
            Expr* rhs = parseBinary(info.prec + 1);
            Expr* e = newE(ExprKind::Binary, loc);
            e->bop = info.op;
            e->a = lhs;
            e->b = rhs;
            lhs = e;
        }
    }

    Expr* parseUnary() {
        SourceLoc loc = cur().loc;
        switch (cur().kind) {
            case Tok::PlusPlus:
            case Tok::MinusMinus: {
                int delta = at(Tok::PlusPlus) ? 1 : -1;
                take();
                Expr* e = newE(ExprKind::IncDec, loc);
                e->prefix = true;
                e->incDelta = delta;
                e->a = parseUnary();
                return e;
            }
            case Tok::Plus:
                take();
                return parseUnary();  // unary plus is a no-op
            case Tok::Minus: {
                take();
                Expr* e = newE(ExprKind::Unary, loc);
                e->uop = UnOp::Neg;
                e->a = parseUnary();
                return e;
            }
            case Tok::Bang: {
                take();
                Expr* e = newE(ExprKind::Unary, loc);
                e->uop = UnOp::Not;
                e->a = parseUnary();
                return e;
            }
            case Tok::Tilde: {
                take();
                Expr* e = newE(ExprKind::Unary, loc);
                e->uop = UnOp::BitNot;
                e->a = parseUnary();
                return e;
            }
            case Tok::Star: {
                take();
                Expr* e = newE(ExprKind::Unary, loc);
                e->uop = UnOp::Deref;
                e->a = parseUnary();
                return e;
            }
            case Tok::Amp: {
                take();
                Expr* e = newE(ExprKind::Unary, loc);
                e->uop = UnOp::AddrOf;
                e->a = parseUnary();
                return e;
            }
            case Tok::KwSizeof: {
                take();
                // sizeof(type) or sizeof expr / sizeof(expr)
                if (at(Tok::LParen) && isTypeToken(peek(1).kind, peek(1))) {
                    take();
                    CType t = parseBaseType();
                    while (accept(Tok::Star)) ++t.ptr;
                    expect(Tok::RParen, "')'");
                    Expr* e = newE(ExprKind::SizeofType, loc);
                    e->castType = t;
                    return e;
                }
                Expr* operand = parseUnary();
                Expr* e = newE(ExprKind::SizeofType, loc);
                e->a = operand;  // sizeof(expr): type resolved at lowering
                return e;
            }
            case Tok::LParen: {
                // cast?
                if (isTypeToken(peek(1).kind, peek(1))) {
                    take();
                    CType t = parseBaseType();
                    while (accept(Tok::Star)) ++t.ptr;
                    expect(Tok::RParen, "')'");
                    Expr* e = newE(ExprKind::Cast, loc);
                    e->castType = t;
                    e->a = parseUnary();
                    return e;
                }
                return parsePostfixFrom(parsePrimary());
            }
            default:
                return parsePostfixFrom(parsePrimary());
        }
    }

    bool isTypeToken(Tok k, const Token& t) const {
        switch (k) {
            case Tok::KwVoid:
            case Tok::KwChar:
            case Tok::KwInt:
            case Tok::KwUnsigned:
            case Tok::KwLong:
            case Tok::KwFloat:
            case Tok::KwDouble:
                return true;
            case Tok::Ident:
                return typeAliases().count(t.text) > 0;
            default:
                return false;
        }
    }

    Expr* parsePrimary() {
        SourceLoc loc = cur().loc;
        switch (cur().kind) {
            case Tok::IntLit: {
                Token t = take();
                Expr* e = newE(ExprKind::IntLit, loc);
                e->ival = t.ival;
                e->litType.base = t.isUnsigned ? BaseType::UInt
                                 : t.isLong    ? BaseType::Long
                                               : BaseType::Int;
                return e;
            }
            case Tok::CharLit: {
                Token t = take();
                Expr* e = newE(ExprKind::IntLit, loc);
                e->ival = t.ival;
                e->litType.base = BaseType::Int;  // character constants have type int
                return e;
            }
            case Tok::FloatLit: {
                Token t = take();
                Expr* e = newE(ExprKind::FloatLit, loc);
                e->fval = t.fval;
                e->litType.base = t.isFloat ? BaseType::Float : BaseType::Double;
                return e;
            }
            case Tok::StrLit: {
                Token t = take();
                Expr* e = newE(ExprKind::StrLit, loc);
                e->strval = t.strval;
                return e;
            }
            case Tok::Ident: {
                Token t = take();
                Expr* e = newE(ExprKind::Ident, loc);
                e->text = t.text;
                return e;
            }
            case Tok::LParen: {
                take();
                Expr* e = parseExpr();
                expect(Tok::RParen, "')'");
                return e;
            }
            default:
                fail("an expression");
        }
    }

    Expr* parsePostfixFrom(Expr* e) {
        while (true) {
            SourceLoc loc = cur().loc;
            if (at(Tok::LParen)) {
                take();
                Expr* call = newE(ExprKind::Call, loc);
                call->a = e;
                if (!at(Tok::RParen)) {
                    call->args.push_back(parseAssign());
                    while (accept(Tok::Comma)) call->args.push_back(parseAssign());
                }
                expect(Tok::RParen, "')'");
                e = call;
            } else if (at(Tok::LBracket)) {
                take();
                Expr* idx = newE(ExprKind::Index, loc);
                idx->a = e;
                idx->b = parseExpr();
                expect(Tok::RBracket, "']'");
                e = idx;
            } else if (at(Tok::Dot)) {
                take();
                Token name = expect(Tok::Ident, "a member name");
                Expr* m = newE(ExprKind::Member, loc);
                m->a = e;
                m->text = name.text;
                e = m;
            } else if (at(Tok::PlusPlus) || at(Tok::MinusMinus)) {
                int delta = at(Tok::PlusPlus) ? 1 : -1;
                take();
                Expr* p = newE(ExprKind::IncDec, loc);
                p->prefix = false;
                p->incDelta = delta;
                p->a = e;
                e = p;
            } else if (at(Tok::LaunchOpen)) {
                take();
                Expr* launch = newE(ExprKind::Launch, loc);
                launch->a = e;
                launch->cfgGrid = parseAssign();
                expect(Tok::Comma, "','");
                launch->cfgBlock = parseAssign();
                if (accept(Tok::Comma)) {
                    launch->cfgShmem = parseAssign();
                    if (accept(Tok::Comma)) launch->cfgStream = parseAssign();
                }
                expect(Tok::LaunchClose, "'>>>'");
                expect(Tok::LParen, "'('");
                if (!at(Tok::RParen)) {
                    launch->args.push_back(parseAssign());
                    while (accept(Tok::Comma)) launch->args.push_back(parseAssign());
                }
                expect(Tok::RParen, "')'");
                e = launch;
            } else {
                return e;
            }
        }
    }

    // ----- statements -----

    Stmt* newS(StmtKind k, SourceLoc loc) { return tu_->newStmt(k, loc); }

    bool atDeclStart() const {
        if (at(Tok::KwExtern)) return true;
        if (at(Tok::KwShared)) return true;
        return atTypeStart();
    }

    Declarator parseDeclarator(CType base) {
        Declarator d;
        d.type = base;
        while (accept(Tok::Star)) ++d.type.ptr;
        Token name = expect(Tok::Ident, "a declarator name");
        d.name = name.text;
        d.loc = name.loc;
        if (accept(Tok::LBracket)) {
            if (at(Tok::RBracket)) {
                d.type.arrayLen = 0;  // unsized
            } else {
                Expr* len = parseExpr();
                int64_t n = foldConst(len);
                if (n <= 0)
                    throw ParseError(len->loc, "a positive array length", std::to_string(n));
                d.type.arrayLen = n;
            }
            expect(Tok::RBracket, "']'");
            if (at(Tok::LBracket)) fail("a 1-D array (multi-dimensional arrays are not supported)");
        }
        if (accept(Tok::Assign)) d.init = parseAssign();
        return d;
    }

    // Array lengths are constant expressions (N, NBLOCKS*2, ...), folded
    // with a tiny evaluator so the parser output is self-contained.
    int64_t foldConst(const Expr* e) {
        switch (e->kind) {
            case ExprKind::IntLit: return e->ival;
            case ExprKind::SizeofType:
                if (!e->a) return e->castType.byteSize();
                break;
            case ExprKind::Unary:
                if (e->uop == UnOp::Neg) return -foldConst(e->a);
                if (e->uop == UnOp::BitNot) return ~foldConst(e->a);
                if (e->uop == UnOp::Not) return !foldConst(e->a);
                break;
            case ExprKind::Binary: {
                int64_t l = foldConst(e->a);
                int64_t r = foldConst(e->b);
                switch (e->bop) {
                    case BinOp::Add: return l + r;
                    case BinOp::Sub: return l - r;
                    case BinOp::Mul: return l * r;
                    case BinOp::Div:
                        if (r == 0) throw ParseError(e->loc, "a nonzero divisor", "0");
                        return l / r;
                    case BinOp::Rem:
                        if (r == 0) throw ParseError(e->loc, "a nonzero divisor", "0");
                        return l % r;
                    case BinOp::Shl: return l << r;
                    case BinOp::Shr: return l >> r;
                    case BinOp::BitAnd: return l & r;
                    case BinOp::BitOr: return l | r;
                    case BinOp::BitXor: return l ^ r;
                    default: break;
                }
                break;
            }
            default: break;
        }
        throw ParseError(e->loc, "a constant expression", "a non-constant expression");
    }

    Stmt* parseDeclStmt() {
        SourceLoc loc = cur().loc;
        bool isExtern = accept(Tok::KwExtern);
        bool isShared = accept(Tok::KwShared);
        if (isShared && !isExtern)
            throw ParseError(loc, "'extern __shared__' (static __shared__ is not supported)",
                             "'__shared__'");
        if (isExtern && !isShared) fail("'__shared__' after 'extern'");
        CType base = parseBaseType();
        Stmt* s = newS(StmtKind::Decl, loc);
        s->isExternShared = isExtern && isShared;
        s->decls.push_back(parseDeclarator(base));
        while (accept(Tok::Comma)) s->decls.push_back(parseDeclarator(base));
        expect(Tok::Semi, "';'");
        if (s->isExternShared) {
            for (auto& d : s->decls) {
                if (!d.type.isArray() || d.type.arrayLen != 0)
                    throw ParseError(d.loc, "an unsized array declarator for extern __shared__",
                                     d.name);
                d.isDynShared = true;
            }
        }
        return s;
    }

    Stmt* parseStmt() {
        SourceLoc loc = cur().loc;
        switch (cur().kind) {
            case Tok::LBrace: return parseBlock();
            case Tok::KwIf: {
                take();
                expect(Tok::LParen, "'('");
                Stmt* s = newS(StmtKind::If, loc);
                s->cond = parseExpr();
                expect(Tok::RParen, "')'");
                s->thenS = parseStmt();
                if (accept(Tok::KwElse)) s->elseS = parseStmt();
                return s;
            }
            case Tok::KwWhile: {
                take();
                expect(Tok::LParen, "'('");
                Stmt* s = newS(StmtKind::While, loc);
                s->cond = parseExpr();
                expect(Tok::RParen, "')'");
                s->loopBody = parseStmt();
                return s;
            }
            case Tok::KwFor: {
                take();
                expect(Tok::LParen, "'('");
                Stmt* s = newS(StmtKind::For, loc);
                if (at(Tok::Semi)) {
                    s->forInit = newS(StmtKind::Empty, cur().loc);
                    take();
                } else if (atDeclStart()) {
                    s->forInit = parseDeclStmt();  // consumes ';'
                } else {
                    Stmt* init = newS(StmtKind::ExprSt, cur().loc);
                    init->expr = parseExpr();
                    s->forInit = init;
                    expect(Tok::Semi, "';'");
                }
                if (!at(Tok::Semi)) s->cond = parseExpr();
                expect(Tok::Semi, "';'");
                if (!at(Tok::RParen)) s->forIncr = parseExpr();
                expect(Tok::RParen, "')'");
                s->loopBody = parseStmt();
                return s;
            }
            case Tok::KwReturn: {
                take();
                Stmt* s = newS(StmtKind::Return, loc);
                if (!at(Tok::Semi)) s->expr = parseExpr();
                expect(Tok::Semi, "';'");
                return s;
            }
            case Tok::KwBreak:
                take();
                expect(Tok::Semi, "';'");
                return newS(StmtKind::Break, loc);
            case Tok::KwContinue:
                take();
                expect(Tok::Semi, "';'");
                return newS(StmtKind::Continue, loc);
            case Tok::Semi:
                take();
                return newS(StmtKind::Empty, loc);
            default:
                if (atDeclStart()) return parseDeclStmt();
                {
                    Stmt* s = newS(StmtKind::ExprSt, loc);
                    s->expr = parseExpr();
                    expect(Tok::Semi, "';'");
                    return s;
                }
        }
    }

    Stmt* parseBlock() {
        SourceLoc loc = expect(Tok::LBrace, "'{'").loc;
        Stmt* s = newS(StmtKind::Block, loc);
        while (!at(Tok::RBrace)) {
            if (at(Tok::End)) fail("'}'");
            s->body.push_back(parseStmt());
        }
        take();
        return s;
    }

    // ----- top level -----

    void topLevel() {
        SourceLoc loc = cur().loc;

        // attributes
        bool sawGlobal = false, sawDevice = false, sawHost = false, sawNoinline = false;
        while (true) {
            if (accept(Tok::KwGlobal)) {
                if (sawGlobal) throw ParseError(loc, "at most one '__global__'", "'__global__'");
                sawGlobal = true;
            } else if (accept(Tok::KwDevice)) {
                if (sawDevice) throw ParseError(loc, "at most one '__device__'", "'__device__'");
                sawDevice = true;
            } else if (accept(Tok::KwHost)) {
                if (sawHost) throw ParseError(loc, "at most one '__host__'", "'__host__'");
                sawHost = true;
            } else if (accept(Tok::KwNoinline) || accept(Tok::KwForceinline)) {
                sawNoinline = true;  // parsed, semantically inert
            } else {
                break;
            }
        }

        CType base = parseBaseType();
        CType declType = base;
        while (accept(Tok::Star)) ++declType.ptr;
        Token name = expect(Tok::Ident, "a declaration name");

        if (at(Tok::LParen)) {
            // function definition or prototype
            take();
            FunctionDef f;
            f.name = name.text;
            f.ret = declType;
            f.loc = loc;
            f.noinline = sawNoinline;
            if (sawGlobal && (sawDevice || sawHost))
                throw ParseError(loc, "'__global__' without other execution-space attributes",
                                 "conflicting attributes");
            if (sawGlobal)
                f.space = ExecSpace::Kernel;
            else if (sawDevice && sawHost)
                f.space = ExecSpace::HostAndDevice;
            else if (sawDevice)
                f.space = ExecSpace::DeviceOnly;
            else
                f.space = ExecSpace::HostOnly;

            if (at(Tok::KwVoid) && peek(1).kind == Tok::RParen) {
                take();
                take();
            } else if (accept(Tok::RParen)) {
                // empty parameter list
            } else {
                while (true) {
                    CType pt = parseBaseType();
                    while (accept(Tok::Star)) ++pt.ptr;
                    Param p;
                    p.type = pt;
                    p.loc = cur().loc;
                    if (at(Tok::Ident)) {
                        p.name = take().text;
                    }
                    if (accept(Tok::LBracket)) {
                        // array parameters decay to pointers
                        if (!at(Tok::RBracket)) parseExpr();
                        expect(Tok::RBracket, "']'");
                        ++p.type.ptr;
                    }
                    f.params.push_back(std::move(p));
                    if (!accept(Tok::Comma)) break;
                }
                expect(Tok::RParen, "')'");
            }

            if (accept(Tok::Semi)) {
                f.body = nullptr;  // prototype
            } else {
                for (const auto& p : f.params)
                    if (p.name.empty())
                        throw ParseError(p.loc, "a named parameter in a function definition",
                                         "an unnamed parameter");
                f.body = parseBlock();
            }
            tu_->functions.push_back(std::move(f));
            return;
        }

        // global variable(s)
        if (sawGlobal || sawHost)
            throw ParseError(loc, "a function after '__global__'/'__host__'", "a variable");
        GlobalVar g;
        g.name = name.text;
        g.type = declType;
        g.isDevice = sawDevice;
        g.loc = loc;
        if (accept(Tok::LBracket)) {
            if (at(Tok::RBracket)) {
                throw ParseError(cur().loc, "an array length", "']'");
            }
            Expr* len = parseExpr();
            g.type.arrayLen = foldConst(len);
            if (g.type.arrayLen <= 0)
                throw ParseError(loc, "a positive array length", std::to_string(g.type.arrayLen));
            expect(Tok::RBracket, "']'");
        }
        if (accept(Tok::Assign)) g.init = parseAssign();
        tu_->globals.push_back(std::move(g));
        while (accept(Tok::Comma)) {
            GlobalVar g2;
            g2.type = base;
            while (accept(Tok::Star)) ++g2.type.ptr;
            Token n2 = expect(Tok::Ident, "a declaration name");
            g2.name = n2.text;
            g2.isDevice = sawDevice;
            g2.loc = n2.loc;
            if (accept(Tok::Assign)) g2.init = parseAssign();
            tu_->globals.push_back(std::move(g2));
        }
        expect(Tok::Semi, "';'");
    }
};

}  // namespace

std::shared_ptr<TranslationUnit> parse(std::vector<Token> tokens, const std::string& filename) {
    Parser p(std::move(tokens), filename);
    return p.run();
}

std::shared_ptr<TranslationUnit> parseSource(const std::string& source,
                                             const std::string& filename) {
    return parse(tokenize(source, filename), filename);
}

}  // namespace mck
