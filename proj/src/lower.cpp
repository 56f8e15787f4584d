#include "minicudak/program.hpp"

#include <map>
#include <optional>

#include "minicudak/diagnostics.hpp"
#include "minicudak/parser.hpp"

namespace mck {

const char* apiName(ApiId id) {
    switch (id) {
        case ApiId::Malloc: return "cudaMalloc";
        case ApiId::Free: return "cudaFree";
        case ApiId::Memcpy: return "cudaMemcpy";
        case ApiId::MemcpyAsync: return "cudaMemcpyAsync";
        case ApiId::Memset: return "cudaMemset";
        case ApiId::DeviceSynchronize: return "cudaDeviceSynchronize";
        case ApiId::StreamCreate: return "cudaStreamCreate";
        case ApiId::StreamDestroy: return "cudaStreamDestroy";
        case ApiId::StreamSynchronize: return "cudaStreamSynchronize";
        case ApiId::StreamQuery: return "cudaStreamQuery";
        case ApiId::StreamWaitEvent: return "cudaStreamWaitEvent";
        case ApiId::EventCreate: return "cudaEventCreate";
        case ApiId::EventDestroy: return "cudaEventDestroy";
        case ApiId::EventRecord: return "cudaEventRecord";
        case ApiId::EventSynchronize: return "cudaEventSynchronize";
        case ApiId::EventQuery: return "cudaEventQuery";
        case ApiId::EventElapsedTime: return "cudaEventElapsedTime";
        case ApiId::GetLastError: return "cudaGetLastError";
        case ApiId::GetErrorString: return "cudaGetErrorString";
        case ApiId::DeviceGetAttribute: return "cudaDeviceGetAttribute";
        case ApiId::DriverGetVersion: return "cudaDriverGetVersion";
        case ApiId::RuntimeGetVersion: return "cudaRuntimeGetVersion";
    }
    return "?";
}

namespace {

struct ApiInfo {
    ApiId id;
    int minArgs;
    int maxArgs;
};

const std::map<std::string, ApiInfo>& apiTable() {
    static const std::map<std::string, ApiInfo> table = {
        {"cudaMalloc", {ApiId::Malloc, 2, 2}},
        {"cudaFree", {ApiId::Free, 1, 1}},
        {"cudaMemcpy", {ApiId::Memcpy, 4, 4}},
        {"cudaMemcpyAsync", {ApiId::MemcpyAsync, 4, 5}},
        {"cudaMemset", {ApiId::Memset, 3, 3}},
        {"cudaDeviceSynchronize", {ApiId::DeviceSynchronize, 0, 0}},
        {"cudaStreamCreate", {ApiId::StreamCreate, 1, 1}},
        {"cudaStreamDestroy", {ApiId::StreamDestroy, 1, 1}},
        {"cudaStreamSynchronize", {ApiId::StreamSynchronize, 1, 1}},
        {"cudaStreamQuery", {ApiId::StreamQuery, 1, 1}},
        {"cudaStreamWaitEvent", {ApiId::StreamWaitEvent, 2, 3}},
        {"cudaEventCreate", {ApiId::EventCreate, 1, 1}},
        {"cudaEventDestroy", {ApiId::EventDestroy, 1, 1}},
        {"cudaEventRecord", {ApiId::EventRecord, 1, 2}},
        {"cudaEventSynchronize", {ApiId::EventSynchronize, 1, 1}},
        {"cudaEventQuery", {ApiId::EventQuery, 1, 1}},
        {"cudaEventElapsedTime", {ApiId::EventElapsedTime, 3, 3}},
        {"cudaGetLastError", {ApiId::GetLastError, 0, 0}},
        {"cudaGetErrorString", {ApiId::GetErrorString, 1, 1}},
        {"cudaDeviceGetAttribute", {ApiId::DeviceGetAttribute, 2, 3}},
        {"cudaDriverGetVersion", {ApiId::DriverGetVersion, 1, 1}},
        {"cudaRuntimeGetVersion", {ApiId::RuntimeGetVersion, 1, 1}},
    };
    return table;
}

// Paper-era (CUDA 4.x) runtime constants.
const std::map<std::string, int64_t>& enumConstants() {
    static const std::map<std::string, int64_t> table = {
        {"cudaMemcpyHostToHost", 0},
        {"cudaMemcpyHostToDevice", 1},
        {"cudaMemcpyDeviceToHost", 2},
        {"cudaMemcpyDeviceToDevice", 3},
        {"cudaSuccess", 0},
        {"cudaErrorInvalidValue", 11},
        {"cudaErrorInvalidDevicePointer", 17},
        {"cudaErrorInvalidMemcpyDirection", 21},
        {"cudaErrorInvalidResourceHandle", 33},
        {"cudaErrorNotReady", 34},
        {"cudaDevAttrMaxThreadsPerBlock", 1},
        {"cudaDevAttrWarpSize", 10},
        {"cudaDevAttrComputeCapabilityMajor", 75},
        {"cudaDevAttrComputeCapabilityMinor", 76},
        {"NULL", 0},
    };
    return table;
}

struct SyncInfo {
    SyncKind kind;
    int args;
};

const std::map<std::string, SyncInfo>& syncTable() {
    static const std::map<std::string, SyncInfo> table = {
        {"__syncthreads", {SyncKind::Plain, 0}},
        {"__syncthreads_and", {SyncKind::And, 1}},
        {"__syncthreads_or", {SyncKind::Or, 1}},
        {"__syncthreads_count", {SyncKind::Count, 1}},
    };
    return table;
}

class Lowerer {
public:
    Lowerer(std::shared_ptr<TranslationUnit> tu) : tu_(std::move(tu)) {
        prog_ = std::make_shared<Program>();
        prog_->tu = tu_;
        prog_->filename = tu_->filename;
    }

    std::shared_ptr<const Program> run() {
        checkMain();
        registerGlobals();
        for (size_t i = 0; i < tu_->functions.size(); ++i) lowerFunction(tu_->functions[i]);
        prog_->mainIndex = tu_->mainIndex;
        prog_->symNames = symNames_;
        return prog_;
    }

private:
    std::shared_ptr<TranslationUnit> tu_;
    std::shared_ptr<Program> prog_;

    std::vector<std::string> symNames_;
    std::map<std::string, int> symIds_;

    struct VarInfo {
        int symId;
        CType type;
    };
    std::vector<std::map<std::string, VarInfo>> scopes_;
    const FunctionDef* curFn_ = nullptr;
    int loopDepth_ = 0;

    int intern(const std::string& name) {
        auto it = symIds_.find(name);
        if (it != symIds_.end()) return it->second;
        int id = static_cast<int>(symNames_.size());
        symNames_.push_back(name);
        symIds_[name] = id;
        return id;
    }

    [[noreturn]] void err(SourceLoc loc, const std::string& msg) { throw SemanticError(loc, msg); }

    void checkMain() {
        int mainCount = 0;
        SourceLoc lastMainLoc{1, 1};
        for (size_t i = 0; i < tu_->functions.size(); ++i) {
            const FunctionDef& f = tu_->functions[i];
            if (f.name != "main" || !f.body) continue;
            ++mainCount;
            lastMainLoc = f.loc;
            tu_->mainIndex = static_cast<int>(i);
            if (!(f.ret == CType{BaseType::Int, 0, -1}))
                err(f.loc, "'main' must return int");
            if (!f.params.empty()) err(f.loc, "'main' must take no parameters");
            if (f.space != ExecSpace::HostOnly)
                err(f.loc, "'main' cannot carry execution-space attributes");
        }
        if (mainCount == 0) {
            SourceLoc loc = tu_->functions.empty() ? SourceLoc{1, 1} : tu_->functions[0].loc;
            err(loc, "program has no 'main' function");
        }
        if (mainCount > 1) err(lastMainLoc, "program has more than one 'main' function");
        // duplicate definitions
        for (size_t i = 0; i < tu_->functions.size(); ++i) {
            for (size_t j = i + 1; j < tu_->functions.size(); ++j) {
                if (tu_->functions[i].name == tu_->functions[j].name && tu_->functions[i].body &&
                    tu_->functions[j].body)
                    err(tu_->functions[j].loc,
                        "redefinition of function '" + tu_->functions[j].name + "'");
            }
        }
        for (auto& f : tu_->functions) {
            if (f.space == ExecSpace::Kernel && !f.ret.isVoid())
                err(f.loc, "__global__ function '" + f.name + "' must return void");
        }
    }

    void registerGlobals() {
        for (auto& g : tu_->globals) {
            g.symId = intern(g.name);
            if (g.type.isVoid()) err(g.loc, "variable '" + g.name + "' declared void");
            if (g.init) {
                foldInit(g);
            }
        }
    }

    void foldInit(GlobalVar& g) {
        const Expr* e = g.init;
        if (e->kind == ExprKind::IntLit) {
            g.constInit = e->ival;
            g.hasInit = true;
        } else if (e->kind == ExprKind::FloatLit) {
            g.constInitF = e->fval;
            g.constInit = static_cast<int64_t>(e->fval);
            g.hasInit = true;
        } else if (e->kind == ExprKind::Unary && e->uop == UnOp::Neg &&
                   e->a->kind == ExprKind::IntLit) {
            g.constInit = -e->a->ival;
            g.hasInit = true;
        } else {
            err(e->loc, "global initializer must be a constant");
        }
    }

    // function index by name (definitions shadow prototypes)
    int findFunction(const std::string& name) const {
        int proto = -1;
        for (size_t i = 0; i < tu_->functions.size(); ++i) {
            if (tu_->functions[i].name != name) continue;
            if (tu_->functions[i].body) return static_cast<int>(i);
            proto = static_cast<int>(i);
        }
        return proto;
    }

    int findGlobal(const std::string& name) const {
        for (size_t i = 0; i < tu_->globals.size(); ++i)
            if (tu_->globals[i].name == name) return static_cast<int>(i);
        return -1;
    }

    bool deviceContext() const {
        return curFn_->space == ExecSpace::Kernel || curFn_->space == ExecSpace::DeviceOnly ||
               curFn_->space == ExecSpace::HostAndDevice;
    }

    void lowerFunction(FunctionDef& f) {
        if (!f.body) return;
        curFn_ = &f;
        scopes_.clear();
        scopes_.emplace_back();
        loopDepth_ = 0;
        for (auto& p : f.params) {
            if (p.type.isVoid()) err(p.loc, "parameter declared void");
            p.symId = intern(p.name);
            if (scopes_.back().count(p.name)) err(p.loc, "duplicate parameter '" + p.name + "'");
            scopes_.back()[p.name] = {p.symId, p.type};
        }
        lowerStmt(f.body);
        scopes_.pop_back();
        curFn_ = nullptr;
    }

    void declareLocal(Declarator& d) {
        if (d.type.isVoid()) err(d.loc, "variable '" + d.name + "' declared void");
        d.symId = intern(d.name);
        if (scopes_.back().count(d.name))
            err(d.loc, "redeclaration of '" + d.name + "' in the same scope");
        scopes_.back()[d.name] = {d.symId, d.type};
    }

    std::optional<VarInfo> lookupLocal(const std::string& name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end()) return f->second;
        }
        return std::nullopt;
    }

    void lowerStmt(Stmt* s) {
        switch (s->kind) {
            case StmtKind::Block: {
                scopes_.emplace_back();
                for (Stmt* c : s->body) lowerStmt(c);
                scopes_.pop_back();
                break;
            }
            case StmtKind::If:
                lowerExpr(s->cond, true);
                lowerStmt(s->thenS);
                if (s->elseS) lowerStmt(s->elseS);
                break;
            case StmtKind::While:
                lowerExpr(s->cond, true);
                ++loopDepth_;
                lowerStmt(s->loopBody);
                --loopDepth_;
                break;
            case StmtKind::For: {
                scopes_.emplace_back();
                if (s->forInit) lowerStmt(s->forInit);
                if (s->cond) lowerExpr(s->cond, true);
                if (s->forIncr) lowerExpr(s->forIncr, true);
                ++loopDepth_;
                lowerStmt(s->loopBody);
                --loopDepth_;
                scopes_.pop_back();
                break;
            }
            case StmtKind::Return:
                if (s->expr) {
                    if (curFn_->ret.isVoid())
                        err(s->loc, "void function '" + curFn_->name + "' returns a value");
                    lowerExpr(s->expr, true);
                } else if (!curFn_->ret.isVoid() && curFn_->name != "main") {
                    err(s->loc, "non-void function '" + curFn_->name + "' returns no value");
                }
                break;
            case StmtKind::Break:
                if (loopDepth_ == 0) err(s->loc, "'break' outside of a loop");
                break;
            case StmtKind::Continue:
                if (loopDepth_ == 0) err(s->loc, "'continue' outside of a loop");
                break;
            case StmtKind::ExprSt:
                lowerExpr(s->expr, true);
                break;
            case StmtKind::Decl: {
                if (s->isExternShared) {
                    if (curFn_->space != ExecSpace::Kernel)
                        err(s->loc, "extern __shared__ is only valid inside a __global__ kernel");
                    for (auto& d : s->decls) {
                        if (!curFn_->dynSharedName.empty())
                            err(d.loc, "kernel '" + curFn_->name +
                                           "' already has a dynamic shared array '" +
                                           curFn_->dynSharedName + "'");
                        declareLocal(d);
                        const_cast<FunctionDef*>(curFn_)->dynSharedName = d.name;
                        const_cast<FunctionDef*>(curFn_)->dynSharedSym = d.symId;
                        const_cast<FunctionDef*>(curFn_)->dynSharedElem =
                            d.type.element().scalarSize();
                        if (d.init) err(d.loc, "extern __shared__ arrays cannot have initializers");
                    }
                    break;
                }
                for (auto& d : s->decls) {
                    // the name is visible in its own initializer, as in C
                    declareLocal(d);
                    if (d.init) lowerExpr(d.init, true);
                    if (d.init && d.type.isArray())
                        err(d.loc, "array '" + d.name + "' cannot have a scalar initializer");
                }
                break;
            }
            case StmtKind::Empty:
                break;
        }
    }

    bool isLvalueForm(const Expr* e) const {
        return e->kind == ExprKind::Ident ||
               e->kind == ExprKind::Index ||
               (e->kind == ExprKind::Unary && e->uop == UnOp::Deref);
    }

    // rvalueUse: the expression's value is consumed (always true except for
    // direct callee positions handled separately).
    void lowerExpr(Expr* e, bool rvalueUse) {
        switch (e->kind) {
            case ExprKind::IntLit:
            case ExprKind::FloatLit:
                break;
            case ExprKind::StrLit:
                err(e->loc, "string literals may only appear as the first argument of printf");
            case ExprKind::Ident: {
                resolveIdent(e);
                break;
            }
            case ExprKind::Member: {
                lowerBuiltinMember(e);
                break;
            }
            case ExprKind::Unary:
                lowerExpr(e->a, true);
                if (e->uop == UnOp::AddrOf && !isLvalueForm(e->a))
                    err(e->loc, "cannot take the address of this expression");
                if (e->uop == UnOp::AddrOf && e->a->kind == ExprKind::Ident &&
                    e->a->bind == BindKind::Function)
                    err(e->loc, "function pointers are not supported");
                break;
            case ExprKind::IncDec:
                lowerExpr(e->a, true);
                requireAssignable(e->a, e->loc);
                break;
            case ExprKind::Binary:
                lowerExpr(e->a, true);
                lowerExpr(e->b, true);
                break;
            case ExprKind::Assign:
                lowerExpr(e->a, true);
                lowerExpr(e->b, true);
                requireAssignable(e->a, e->loc);
                break;
            case ExprKind::Ternary:
                lowerExpr(e->a, true);
                lowerExpr(e->b, true);
                lowerExpr(e->c, true);
                break;
            case ExprKind::Cast:
                lowerExpr(e->a, true);
                break;
            case ExprKind::SizeofType:
                if (e->a) {
                    lowerExpr(e->a, true);
                    e->castType = typeOf(e->a, e->loc);
                }
                break;
            case ExprKind::Index:
                lowerExpr(e->a, true);
                lowerExpr(e->b, true);
                break;
            case ExprKind::Call:
                lowerCall(e);
                break;
            case ExprKind::Launch:
                lowerLaunch(e);
                break;
            case ExprKind::Builtin:
                break;
        }
        (void)rvalueUse;
    }

    void requireAssignable(const Expr* target, SourceLoc loc) {
        if (!isLvalueForm(target)) err(loc, "assignment target is not an lvalue");
        if (target->kind == ExprKind::Ident) {
            if (target->bind == BindKind::Function || target->bind == BindKind::EnumConst)
                err(loc, "'" + target->text + "' is not assignable");
            CType t = identType(target);
            if (t.isArray()) err(loc, "array '" + target->text + "' is not assignable");
        }
    }

    CType identType(const Expr* e) const {
        if (e->bind == BindKind::LocalVar) return e->litType;  // stashed at resolution
        if (e->bind == BindKind::GlobalVar) return tu_->globals[e->bindIndex].type;
        return CType{};
    }

    void resolveIdent(Expr* e) {
        // locals and parameters first
        if (auto v = lookupLocal(e->text)) {
            e->bind = BindKind::LocalVar;
            e->bindIndex = v->symId;
            e->litType = v->type;  // carried for static checks
            return;
        }
        int g = findGlobal(e->text);
        if (g >= 0) {
            // access legality is a runtime property; holding a device-global
            // name from host code is fine, dereferencing it is not
            e->bind = BindKind::GlobalVar;
            e->bindIndex = g;
            return;
        }
        if (e->text == "warpSize") {
            if (!deviceContext()) err(e->loc, "'warpSize' is only available in device code");
            e->kind = ExprKind::Builtin;
            e->builtinVar = BuiltinVar::WarpSize;
            e->builtinComp = 0;
            return;
        }
        auto ec = enumConstants().find(e->text);
        if (ec != enumConstants().end()) {
            e->bind = BindKind::EnumConst;
            e->constVal = ec->second;
            return;
        }
        int f = findFunction(e->text);
        if (f >= 0) {
            e->bind = BindKind::Function;
            e->bindIndex = f;
            return;
        }
        err(e->loc, "use of undeclared identifier '" + e->text + "'");
    }

    void lowerBuiltinMember(Expr* e) {
        static const std::map<std::string, BuiltinVar> vars = {
            {"threadIdx", BuiltinVar::ThreadIdx},
            {"blockIdx", BuiltinVar::BlockIdx},
            {"blockDim", BuiltinVar::BlockDim},
            {"gridDim", BuiltinVar::GridDim},
        };
        if (e->a->kind != ExprKind::Ident)
            err(e->loc, "member access is only supported on CUDA builtins");
        auto it = vars.find(e->a->text);
        if (it == vars.end())
            err(e->loc, "member access is only supported on CUDA builtins (structs are not "
                        "supported)");
        if (!deviceContext())
            err(e->loc, "'" + e->a->text + "' is only available in device code");
        int comp;
        if (e->text == "x")
            comp = 0;
        else if (e->text == "y")
            comp = 1;
        else if (e->text == "z")
            comp = 2;
        else
            err(e->loc, "unknown component '." + e->text + "' on '" + e->a->text + "'");
        std::string spelled = e->a->text + "." + e->text;
        e->kind = ExprKind::Builtin;
        e->builtinVar = it->second;
        e->builtinComp = comp;
        e->text = spelled;
        e->a = nullptr;
    }

    void lowerCall(Expr* e) {
        if (e->a->kind != ExprKind::Ident)
            err(e->loc, "only direct calls of named functions are supported");
        const std::string& name = e->a->text;

        // local variables shadow everything
        if (lookupLocal(name))
            err(e->loc, "'" + name + "' is not a function");

        if (name == "printf") {
            if (curFn_->space != ExecSpace::HostOnly)
                err(e->loc, "printf is only supported in host code");
            if (e->args.empty() || e->args[0]->kind != ExprKind::StrLit)
                err(e->loc, "printf requires a string literal format as its first argument");
            e->callee = CalleeKind::Printf;
            e->args[0]->strId = static_cast<int>(tu_->strings.size());
            tu_->strings.push_back(e->args[0]->strval);
            for (size_t i = 1; i < e->args.size(); ++i) lowerExpr(e->args[i], true);
            return;
        }

        auto sync = syncTable().find(name);
        if (sync != syncTable().end()) {
            if (curFn_->space != ExecSpace::Kernel && curFn_->space != ExecSpace::DeviceOnly)
                err(e->loc, "'" + name + "' may only be called from device code");
            if (static_cast<int>(e->args.size()) != sync->second.args)
                err(e->loc, "'" + name + "' takes " + std::to_string(sync->second.args) +
                                " argument(s)");
            e->callee = CalleeKind::Sync;
            e->syncKind = sync->second.kind;
            for (Expr* a : e->args) lowerExpr(a, true);
            return;
        }

        auto api = apiTable().find(name);
        if (api != apiTable().end()) {
            if (curFn_->space != ExecSpace::HostOnly)
                err(e->loc, "CUDA runtime API call '" + name + "' is only allowed in host code");
            int n = static_cast<int>(e->args.size());
            if (n < api->second.minArgs || n > api->second.maxArgs)
                err(e->loc, "wrong number of arguments to '" + name + "'");
            e->callee = CalleeKind::Api;
            e->calleeIndex = static_cast<int>(api->second.id);
            for (Expr* a : e->args) lowerExpr(a, true);
            return;
        }

        if (name.rfind("cuda", 0) == 0)
            err(e->loc, "unsupported CUDA runtime API function '" + name + "'");

        int f = findFunction(name);
        if (f < 0) err(e->loc, "call to undeclared function '" + name + "'");
        const FunctionDef& callee = tu_->functions[f];
        if (!calleeAllowed(curFn_->space, callee.space)) {
            if (callee.space == ExecSpace::Kernel)
                err(e->loc, "kernel '" + name + "' must be launched with <<<...>>>");
            err(e->loc, std::string("function '") + name + "' (" + execSpaceName(callee.space) +
                            ") cannot be called from " + execSpaceName(curFn_->space) +
                            " function '" + curFn_->name + "'");
        }
        if (e->args.size() != callee.params.size())
            err(e->loc, "wrong number of arguments to '" + name + "' (expected " +
                            std::to_string(callee.params.size()) + ")");
        e->callee = CalleeKind::User;
        e->calleeIndex = f;
        e->a->bind = BindKind::Function;
        e->a->bindIndex = f;
        for (Expr* a : e->args) lowerExpr(a, true);
    }

    static bool calleeAllowed(ExecSpace caller, ExecSpace callee) {
        switch (caller) {
            case ExecSpace::HostOnly:
                return callee == ExecSpace::HostOnly || callee == ExecSpace::HostAndDevice;
            case ExecSpace::Kernel:
            case ExecSpace::DeviceOnly:
                return callee == ExecSpace::DeviceOnly || callee == ExecSpace::HostAndDevice;
            case ExecSpace::HostAndDevice:
                return callee == ExecSpace::HostAndDevice;
        }
        return false;
    }

    void lowerLaunch(Expr* e) {
        if (curFn_->space != ExecSpace::HostOnly)
            err(e->loc, "kernel launches are only allowed in host code");
        if (e->a->kind != ExprKind::Ident) err(e->loc, "launch target must be a kernel name");
        int f = findFunction(e->a->text);
        if (f < 0) err(e->loc, "launch of undeclared function '" + e->a->text + "'");
        const FunctionDef& k = tu_->functions[f];
        if (k.space != ExecSpace::Kernel)
            err(e->loc, "'" + e->a->text + "' is not a __global__ kernel");
        if (!k.body) err(e->loc, "launch of kernel '" + e->a->text + "' with no definition");
        if (e->args.size() != k.params.size())
            err(e->loc, "wrong number of arguments to kernel '" + e->a->text + "' (expected " +
                            std::to_string(k.params.size()) + ")");
        e->callee = CalleeKind::User;
        e->calleeIndex = f;
        e->a->bind = BindKind::Function;
        e->a->bindIndex = f;
        lowerExpr(e->cfgGrid, true);
        lowerExpr(e->cfgBlock, true);
        if (e->cfgShmem) lowerExpr(e->cfgShmem, true);
        if (e->cfgStream) lowerExpr(e->cfgStream, true);
        for (Expr* a : e->args) lowerExpr(a, true);
    }

    // Static expression typing, used by sizeof(expr) and a few checks.
    CType typeOf(const Expr* e, SourceLoc loc) {
        switch (e->kind) {
            case ExprKind::IntLit:
            case ExprKind::FloatLit:
                return e->litType;
            case ExprKind::StrLit: return CType{BaseType::Char, 1, -1};
            case ExprKind::Ident:
                if (e->bind == BindKind::LocalVar) return e->litType;
                if (e->bind == BindKind::GlobalVar) return tu_->globals[e->bindIndex].type;
                if (e->bind == BindKind::EnumConst) return CType{BaseType::Int, 0, -1};
                err(loc, "cannot take the size of this expression");
            case ExprKind::Builtin: return CType{BaseType::Int, 0, -1};
            case ExprKind::Unary:
                if (e->uop == UnOp::Deref) return typeOf(e->a, loc).decayed().element();
                if (e->uop == UnOp::AddrOf) {
                    CType t = typeOf(e->a, loc);
                    ++t.ptr;
                    return t;
                }
                return typeOf(e->a, loc);
            case ExprKind::IncDec: return typeOf(e->a, loc);
            case ExprKind::Binary: {
                CType l = typeOf(e->a, loc).decayed();
                CType r = typeOf(e->b, loc).decayed();
                if (e->bop == BinOp::LAnd || e->bop == BinOp::LOr) return CType{BaseType::Int, 0, -1};
                switch (e->bop) {
                    case BinOp::Lt: case BinOp::Le: case BinOp::Gt: case BinOp::Ge:
                    case BinOp::Eq: case BinOp::Ne:
                        return CType{BaseType::Int, 0, -1};
                    default: break;
                }
                if (l.isPointer()) return l;
                if (r.isPointer()) return r;
                if (l.base == BaseType::Double || r.base == BaseType::Double)
                    return CType{BaseType::Double, 0, -1};
                if (l.base == BaseType::Float || r.base == BaseType::Float)
                    return CType{BaseType::Float, 0, -1};
                if (l.base == BaseType::Long || r.base == BaseType::Long)
                    return CType{BaseType::Long, 0, -1};
                if (l.base == BaseType::UInt || r.base == BaseType::UInt)
                    return CType{BaseType::UInt, 0, -1};
                return CType{BaseType::Int, 0, -1};
            }
            case ExprKind::Assign: return typeOf(e->a, loc);
            case ExprKind::Ternary: return typeOf(e->b, loc);
            case ExprKind::Cast: return e->castType;
            case ExprKind::SizeofType: return CType{BaseType::Long, 0, -1};
            case ExprKind::Index: return typeOf(e->a, loc).decayed().element();
            case ExprKind::Call: {
                if (e->callee == CalleeKind::User) return tu_->functions[e->calleeIndex].ret;
                return CType{BaseType::Int, 0, -1};
            }
            case ExprKind::Member:
            case ExprKind::Launch:
                return CType{BaseType::Void, 0, -1};
        }
        return CType{};
    }
};

}  // namespace

std::shared_ptr<const Program> lower(std::shared_ptr<TranslationUnit> tu) {
    Lowerer l(std::move(tu));
    return l.run();
}

std::shared_ptr<const Program> compileSource(const std::string& source,
                                             const std::string& filename) {
    return lower(parseSource(source, filename));
}

}  // namespace mck
