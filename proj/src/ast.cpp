#include "minicudak/ast.hpp"

#include <cassert>
#include <sstream>

namespace mck {

const char* execSpaceName(ExecSpace s) {
    switch (s) {
        case ExecSpace::HostOnly: return "host";
        case ExecSpace::DeviceOnly: return "device";
        case ExecSpace::HostAndDevice: return "host+device";
        case ExecSpace::Kernel: return "kernel";
    }
    return "?";
}

int64_t CType::scalarSize() const {
    if (ptr > 0) return 8;
    switch (base) {
        case BaseType::Void: return 0;
        case BaseType::Char: return 1;
        case BaseType::Int: return 4;
        case BaseType::UInt: return 4;
        case BaseType::Long: return 8;
        case BaseType::Float: return 4;
        case BaseType::Double: return 8;
    }
    return 0;
}

int64_t CType::byteSize() const {
    if (isArray()) return scalarSize() * arrayLen;
    return scalarSize();
}

std::string CType::str() const {
    std::string s;
    switch (base) {
        case BaseType::Void: s = "void"; break;
        case BaseType::Char: s = "char"; break;
        case BaseType::Int: s = "int"; break;
        case BaseType::UInt: s = "unsigned int"; break;
        case BaseType::Long: s = "long"; break;
        case BaseType::Float: s = "float"; break;
        case BaseType::Double: s = "double"; break;
    }
    for (int i = 0; i < ptr; ++i) s += "*";
    if (isArray()) s += "[" + (arrayLen > 0 ? std::to_string(arrayLen) : "") + "]";
    return s;
}

namespace {

// ----- printer -----

struct Printer {
    std::ostringstream out;
    int indent = 0;

    void nl() {
        out << "\n";
        for (int i = 0; i < indent; ++i) out << "    ";
    }

    static int precOf(BinOp op) {
        switch (op) {
            case BinOp::Mul: case BinOp::Div: case BinOp::Rem: return 10;
            case BinOp::Add: case BinOp::Sub: return 9;
            case BinOp::Shl: case BinOp::Shr: return 8;
            case BinOp::Lt: case BinOp::Le: case BinOp::Gt: case BinOp::Ge: return 7;
            case BinOp::Eq: case BinOp::Ne: return 6;
            case BinOp::BitAnd: return 5;
            case BinOp::BitXor: return 4;
            case BinOp::BitOr: return 3;
            case BinOp::LAnd: return 2;
            case BinOp::LOr: return 1;
        }
        return 0;
    }

    static const char* opStr(BinOp op) {
        switch (op) {
            case BinOp::Add: return "+";
            case BinOp::Sub: return "-";
            case BinOp::Mul: return "*";
            case BinOp::Div: return "/";
            case BinOp::Rem: return "%";
            case BinOp::Shl: return "<<";
            case BinOp::Shr: return ">>";
            case BinOp::Lt: return "<";
            case BinOp::Le: return "<=";
            case BinOp::Gt: return ">";
            case BinOp::Ge: return ">=";
            case BinOp::Eq: return "==";
            case BinOp::Ne: return "!=";
            case BinOp::BitAnd: return "&";
            case BinOp::BitXor: return "^";
            case BinOp::BitOr: return "|";
            case BinOp::LAnd: return "&&";
            case BinOp::LOr: return "||";
        }
        return "?";
    }

    static std::string escape(const std::string& s) {
        std::string r;
        for (char c : s) {
            switch (c) {
                case '\n': r += "\\n"; break;
                case '\t': r += "\\t"; break;
                case '\r': r += "\\r"; break;
                case '\0': r += "\\0"; break;
                case '\\': r += "\\\\"; break;
                case '"': r += "\\\""; break;
                default: r += c;
            }
        }
        return r;
    }

    // prec: minimum precedence of the context; parenthesize below it.
    // Assignment = 0, ternary = 0.5-ish (we simply wrap those when nested).
    void expr(const Expr* e, int prec = 0) {
        switch (e->kind) {
            case ExprKind::IntLit:
                out << e->ival;
                if (e->litType.base == BaseType::UInt) out << "u";
                if (e->litType.base == BaseType::Long) out << "l";
                break;
            case ExprKind::FloatLit: {
                std::ostringstream f;
                f << e->fval;
                std::string s = f.str();
                if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
                out << s;
                if (e->litType.base == BaseType::Float) out << "f";
                break;
            }
            case ExprKind::StrLit:
                out << '"' << escape(e->strval) << '"';
                break;
            case ExprKind::Ident:
                out << e->text;
                break;
            case ExprKind::Builtin:
                out << e->text;  // printed exactly as written (threadIdx.x etc.)
                break;
            case ExprKind::Unary: {
                if (prec > 11) out << "(";
                switch (e->uop) {
                    case UnOp::Neg: out << "-"; break;
                    case UnOp::Not: out << "!"; break;
                    case UnOp::BitNot: out << "~"; break;
                    case UnOp::Deref: out << "*"; break;
                    case UnOp::AddrOf: out << "&"; break;
                }
                expr(e->a, 12);
                if (prec > 11) out << ")";
                break;
            }
            case ExprKind::IncDec: {
                if (prec > 11) out << "(";
                if (e->prefix) out << (e->incDelta > 0 ? "++" : "--");
                expr(e->a, 12);
                if (!e->prefix) out << (e->incDelta > 0 ? "++" : "--");
                if (prec > 11) out << ")";
                break;
            }
            case ExprKind::Binary: {
                int p = precOf(e->bop);
                if (prec > p) out << "(";
                expr(e->a, p);
                out << " " << opStr(e->bop) << " ";
                expr(e->b, p + 1);
                if (prec > p) out << ")";
                break;
            }
            case ExprKind::Assign: {
                if (prec > 0) out << "(";
                expr(e->a, 12);
                out << " ";
                if (e->hasCompoundOp) out << opStr(e->bop);
                out << "= ";
                expr(e->b, 0);
                if (prec > 0) out << ")";
                break;
            }
            case ExprKind::Ternary: {
                if (prec > 0) out << "(";
                expr(e->a, 1);
                out << " ? ";
                expr(e->b, 0);
                out << " : ";
                expr(e->c, 0);
                if (prec > 0) out << ")";
                break;
            }
            case ExprKind::Call: {
                expr(e->a, 13);
                out << "(";
                for (size_t i = 0; i < e->args.size(); ++i) {
                    if (i) out << ", ";
                    expr(e->args[i], 1);
                }
                out << ")";
                break;
            }
            case ExprKind::Index: {
                expr(e->a, 13);
                out << "[";
                expr(e->b, 0);
                out << "]";
                break;
            }
            case ExprKind::Member: {
                expr(e->a, 13);
                out << "." << e->text;
                break;
            }
            case ExprKind::Cast: {
                if (prec > 11) out << "(";
                out << "(" << e->castType.str() << ")";
                expr(e->a, 12);
                if (prec > 11) out << ")";
                break;
            }
            case ExprKind::SizeofType:
                if (e->a) {
                    out << "sizeof(";
                    expr(e->a, 0);
                    out << ")";
                } else {
                    out << "sizeof(" << e->castType.str() << ")";
                }
                break;
            case ExprKind::Launch: {
                expr(e->a, 13);
                out << "<<<";
                expr(e->cfgGrid, 1);
                out << ", ";
                expr(e->cfgBlock, 1);
                if (e->cfgShmem) {
                    out << ", ";
                    expr(e->cfgShmem, 1);
                }
                if (e->cfgStream) {
                    out << ", ";
                    expr(e->cfgStream, 1);
                }
                out << ">>>(";
                for (size_t i = 0; i < e->args.size(); ++i) {
                    if (i) out << ", ";
                    expr(e->args[i], 1);
                }
                out << ")";
                break;
            }
        }
    }

    void declarator(const Declarator& d) {
        CType t = d.type;
        for (int i = 0; i < t.ptr; ++i) out << "*";
        out << d.name;
        if (t.isArray()) {
            out << "[";
            if (t.arrayLen > 0) out << t.arrayLen;
            out << "]";
        }
        if (d.init) {
            out << " = ";
            expr(d.init, 1);
        }
    }

    static const char* baseStr(BaseType b) {
        switch (b) {
            case BaseType::Void: return "void";
            case BaseType::Char: return "char";
            case BaseType::Int: return "int";
            case BaseType::UInt: return "unsigned int";
            case BaseType::Long: return "long";
            case BaseType::Float: return "float";
            case BaseType::Double: return "double";
        }
        return "?";
    }

    void stmt(const Stmt* s) {
        switch (s->kind) {
            case StmtKind::Block: {
                out << "{";
                ++indent;
                for (const Stmt* child : s->body) {
                    nl();
                    stmt(child);
                }
                --indent;
                nl();
                out << "}";
                break;
            }
            case StmtKind::If: {
                out << "if (";
                expr(s->cond);
                out << ") ";
                stmt(s->thenS);
                if (s->elseS) {
                    out << " else ";
                    stmt(s->elseS);
                }
                break;
            }
            case StmtKind::While: {
                out << "while (";
                expr(s->cond);
                out << ") ";
                stmt(s->loopBody);
                break;
            }
            case StmtKind::For: {
                out << "for (";
                if (s->forInit && s->forInit->kind != StmtKind::Empty) {
                    if (s->forInit->kind == StmtKind::Decl) {
                        declStmtInline(s->forInit);
                    } else {
                        expr(s->forInit->expr);
                    }
                }
                out << "; ";
                if (s->cond) expr(s->cond);
                out << "; ";
                if (s->forIncr) expr(s->forIncr);
                out << ") ";
                stmt(s->loopBody);
                break;
            }
            case StmtKind::Return:
                out << "return";
                if (s->expr) {
                    out << " ";
                    expr(s->expr);
                }
                out << ";";
                break;
            case StmtKind::Break: out << "break;"; break;
            case StmtKind::Continue: out << "continue;"; break;
            case StmtKind::ExprSt:
                expr(s->expr);
                out << ";";
                break;
            case StmtKind::Decl:
                declStmtInline(s);
                out << ";";
                break;
            case StmtKind::Empty: out << ";"; break;
        }
    }

    void declStmtInline(const Stmt* s) {
        if (s->isExternShared) out << "extern __shared__ ";
        out << baseStr(s->decls.front().type.base) << " ";
        for (size_t i = 0; i < s->decls.size(); ++i) {
            if (i) out << ", ";
            declarator(s->decls[i]);
        }
    }

    void function(const FunctionDef& f) {
        switch (f.space) {
            case ExecSpace::Kernel: out << "__global__ "; break;
            case ExecSpace::DeviceOnly: out << "__device__ "; break;
            case ExecSpace::HostAndDevice: out << "__host__ __device__ "; break;
            case ExecSpace::HostOnly: break;
        }
        if (f.noinline) out << "__noinline__ ";
        out << f.ret.str() << " " << f.name << "(";
        if (f.params.empty()) {
            out << "void";
        } else {
            for (size_t i = 0; i < f.params.size(); ++i) {
                if (i) out << ", ";
                out << baseStr(f.params[i].type.base);
                out << " ";
                for (int p = 0; p < f.params[i].type.ptr; ++p) out << "*";
                out << f.params[i].name;
            }
        }
        out << ")";
        if (f.body) {
            out << " ";
            stmt(f.body);
        } else {
            out << ";";
        }
        nl();
    }

    void global(const GlobalVar& g) {
        if (g.isDevice) out << "__device__ ";
        out << baseStr(g.type.base) << " ";
        for (int i = 0; i < g.type.ptr; ++i) out << "*";
        out << g.name;
        if (g.type.isArray()) {
            out << "[";
            if (g.type.arrayLen > 0) out << g.type.arrayLen;
            out << "]";
        }
        if (g.init) {
            out << " = ";
            expr(g.init, 1);
        }
        out << ";";
        nl();
    }
};

// ----- structural equality -----

bool eqExpr(const Expr* a, const Expr* b);

bool eqExprList(const std::vector<Expr*>& a, const std::vector<Expr*>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!eqExpr(a[i], b[i])) return false;
    return true;
}

bool eqOpt(const Expr* a, const Expr* b) {
    if (!a || !b) return a == b;
    return eqExpr(a, b);
}

bool eqExpr(const Expr* a, const Expr* b) {
    if (a->kind != b->kind) return false;
    switch (a->kind) {
        case ExprKind::IntLit: return a->ival == b->ival && a->litType == b->litType;
        case ExprKind::FloatLit: return a->fval == b->fval && a->litType == b->litType;
        case ExprKind::StrLit: return a->strval == b->strval;
        case ExprKind::Ident: return a->text == b->text;
        case ExprKind::Builtin: return a->text == b->text;
        case ExprKind::Unary: return a->uop == b->uop && eqExpr(a->a, b->a);
        case ExprKind::IncDec:
            return a->prefix == b->prefix && a->incDelta == b->incDelta && eqExpr(a->a, b->a);
        case ExprKind::Binary: return a->bop == b->bop && eqExpr(a->a, b->a) && eqExpr(a->b, b->b);
        case ExprKind::Assign:
            return a->hasCompoundOp == b->hasCompoundOp &&
                   (!a->hasCompoundOp || a->bop == b->bop) && eqExpr(a->a, b->a) &&
                   eqExpr(a->b, b->b);
        case ExprKind::Ternary:
            return eqExpr(a->a, b->a) && eqExpr(a->b, b->b) && eqExpr(a->c, b->c);
        case ExprKind::Call: return eqExpr(a->a, b->a) && eqExprList(a->args, b->args);
        case ExprKind::Index: return eqExpr(a->a, b->a) && eqExpr(a->b, b->b);
        case ExprKind::Member: return a->text == b->text && eqExpr(a->a, b->a);
        case ExprKind::Cast: return a->castType == b->castType && eqExpr(a->a, b->a);
        case ExprKind::SizeofType:
            if (a->a || b->a) return eqOpt(a->a, b->a);
            return a->castType == b->castType;
        case ExprKind::Launch:
            return eqExpr(a->a, b->a) && eqExpr(a->cfgGrid, b->cfgGrid) &&
                   eqExpr(a->cfgBlock, b->cfgBlock) && eqOpt(a->cfgShmem, b->cfgShmem) &&
                   eqOpt(a->cfgStream, b->cfgStream) && eqExprList(a->args, b->args);
    }
    return false;
}

bool eqStmt(const Stmt* a, const Stmt* b) {
    if (a->kind != b->kind) return false;
    auto eqOptS = [](const Stmt* x, const Stmt* y) { return (!x || !y) ? x == y : eqStmt(x, y); };
    auto eqOptE = [](const Expr* x, const Expr* y) { return (!x || !y) ? x == y : eqExpr(x, y); };
    switch (a->kind) {
        case StmtKind::Block: {
            if (a->body.size() != b->body.size()) return false;
            for (size_t i = 0; i < a->body.size(); ++i)
                if (!eqStmt(a->body[i], b->body[i])) return false;
            return true;
        }
        case StmtKind::If:
            return eqExpr(a->cond, b->cond) && eqStmt(a->thenS, b->thenS) &&
                   eqOptS(a->elseS, b->elseS);
        case StmtKind::While: return eqExpr(a->cond, b->cond) && eqStmt(a->loopBody, b->loopBody);
        case StmtKind::For:
            return eqOptS(a->forInit, b->forInit) && eqOptE(a->cond, b->cond) &&
                   eqOptE(a->forIncr, b->forIncr) && eqStmt(a->loopBody, b->loopBody);
        case StmtKind::Return: return eqOptE(a->expr, b->expr);
        case StmtKind::Break:
        case StmtKind::Continue:
        case StmtKind::Empty: return true;
        case StmtKind::ExprSt: return eqExpr(a->expr, b->expr);
        case StmtKind::Decl: {
            if (a->isExternShared != b->isExternShared) return false;
            if (a->decls.size() != b->decls.size()) return false;
            for (size_t i = 0; i < a->decls.size(); ++i) {
                const auto& da = a->decls[i];
                const auto& db = b->decls[i];
                if (da.name != db.name || !(da.type == db.type)) return false;
                if (!eqOptE(da.init, db.init)) return false;
            }
            return true;
        }
    }
    return false;
}

// ----- location walker -----

void walkExprLocs(const Expr* e, const std::function<void(SourceLoc)>& fn) {
    if (!e) return;
    fn(e->loc);
    walkExprLocs(e->a, fn);
    walkExprLocs(e->b, fn);
    walkExprLocs(e->c, fn);
    walkExprLocs(e->cfgGrid, fn);
    walkExprLocs(e->cfgBlock, fn);
    walkExprLocs(e->cfgShmem, fn);
    walkExprLocs(e->cfgStream, fn);
    for (const Expr* arg : e->args) walkExprLocs(arg, fn);
}

void walkStmtLocs(const Stmt* s, const std::function<void(SourceLoc)>& fn) {
    if (!s) return;
    fn(s->loc);
    for (const Stmt* c : s->body) walkStmtLocs(c, fn);
    walkExprLocs(s->cond, fn);
    walkStmtLocs(s->thenS, fn);
    walkStmtLocs(s->elseS, fn);
    walkStmtLocs(s->loopBody, fn);
    walkStmtLocs(s->forInit, fn);
    walkExprLocs(s->forIncr, fn);
    walkExprLocs(s->expr, fn);
    for (const auto& d : s->decls) {
        fn(d.loc);
        walkExprLocs(d.init, fn);
    }
}

}  // namespace

std::string printTranslationUnit(const TranslationUnit& tu) {
    Printer p;
    // Globals and functions are printed in their original relative order as
    // far as we track it: globals first is not correct in general, so we
    // interleave by source line.
    size_t gi = 0, fi = 0;
    while (gi < tu.globals.size() || fi < tu.functions.size()) {
        bool takeGlobal;
        if (gi >= tu.globals.size())
            takeGlobal = false;
        else if (fi >= tu.functions.size())
            takeGlobal = true;
        else
            takeGlobal = tu.globals[gi].loc < tu.functions[fi].loc;
        if (takeGlobal)
            p.global(tu.globals[gi++]);
        else
            p.function(tu.functions[fi++]);
    }
    return p.out.str();
}

bool structurallyEqual(const TranslationUnit& a, const TranslationUnit& b) {
    if (a.functions.size() != b.functions.size()) return false;
    if (a.globals.size() != b.globals.size()) return false;
    for (size_t i = 0; i < a.functions.size(); ++i) {
        const auto& fa = a.functions[i];
        const auto& fb = b.functions[i];
        if (fa.name != fb.name || !(fa.ret == fb.ret) || fa.space != fb.space) return false;
        if (fa.params.size() != fb.params.size()) return false;
        for (size_t j = 0; j < fa.params.size(); ++j) {
            if (fa.params[j].name != fb.params[j].name) return false;
            if (!(fa.params[j].type == fb.params[j].type)) return false;
        }
        if ((fa.body == nullptr) != (fb.body == nullptr)) return false;
        if (fa.body && !eqStmt(fa.body, fb.body)) return false;
    }
    for (size_t i = 0; i < a.globals.size(); ++i) {
        const auto& ga = a.globals[i];
        const auto& gb = b.globals[i];
        if (ga.name != gb.name || !(ga.type == gb.type) || ga.isDevice != gb.isDevice)
            return false;
        if ((ga.init == nullptr) != (gb.init == nullptr)) return false;
        if (ga.init && !eqExpr(ga.init, gb.init)) return false;
    }
    return true;
}

void forEachLoc(const TranslationUnit& tu, const std::function<void(SourceLoc)>& fn) {
    for (const auto& f : tu.functions) {
        fn(f.loc);
        walkStmtLocs(f.body, fn);
    }
    for (const auto& g : tu.globals) {
        fn(g.loc);
        walkExprLocs(g.init, fn);
    }
}

}  // namespace mck
