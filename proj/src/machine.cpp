#include "minicudak/machine.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <sstream>
#include <stdexcept>

// Internal invariant violations abort the run loudly regardless of NDEBUG.
#define MCK_CHECK(cond, msg) \
    do {                     \
        if (!(cond)) throw std::logic_error(msg); \
    } while (0)

namespace mck {

std::string Transition::str() const {
    switch (kind) {
        case TransitionKind::HostStep: return "host";
        case TransitionKind::DeviceStep:
            return "thread(" + std::to_string(thread.gid) + "," + std::to_string(thread.bid) +
                   "," + std::to_string(thread.tid) + ")";
        case TransitionKind::BarrierRule: {
            const char* r = rule == BarrierRuleKind::UpSweep      ? "up"
                            : rule == BarrierRuleKind::Turnaround ? "turn"
                            : rule == BarrierRuleKind::DownSweep  ? "down"
                                                                  : "release";
            return std::string("sync-") + r + "(" + std::to_string(thread.gid) + "," +
                   std::to_string(thread.bid) + "," + std::to_string(thread.tid) + ")";
        }
        case TransitionKind::StreamDispatch: return "stream(" + std::to_string(sid) + ")";
    }
    return "?";
}

Machine::Machine(std::shared_ptr<const Program> prog, RunOptions opts)
    : prog_(std::move(prog)), opts_(opts) {
    reset();
}

void Machine::addDiagnostic(Severity sev, DiagCategory cat, const std::string& msg,
                            SourceLoc loc) {
    for (const Diagnostic& d : cfg_.diagnostics)
        if (d.category == cat && d.message == msg) return;
    cfg_.diagnostics.push_back(Diagnostic{sev, cat, msg, loc});
}

std::string Machine::atLoc(SourceLoc loc) const {
    return " at " + prog_->filename + ":" + std::to_string(loc.line) + ".";
}

void Machine::trace(const std::string& line) {
    if (opts_.trace && onTrace) onTrace(line);
}

void Machine::allocGlobals() {
    for (const GlobalVar& g : prog_->tu->globals) {
        MemSpace space = g.isDevice ? MemSpace::deviceGlobal() : MemSpace::host();
        Location loc = allocObject(space, g.type.byteSize(), g.name);
        cfg_.globalLocs.push_back(loc);
        if (g.hasInit) {
            MemObject& obj = cfg_.memory.objects.at(loc.object);
            Value v = g.type.isFloating() ? Value::floatV(g.constInitF, g.type)
                                          : Value::intV(g.constInit, g.type);
            pokeValue(obj, 0, g.type, v);
        }
    }
}

void Machine::reset() {
    cfg_ = Configuration{};
    cfg_.rng.seed(opts_.seed);
    cfg_.race.enabled = opts_.raceCheck;
    Stream s0;
    s0.sid = 0;
    cfg_.streams.emplace(0u, std::move(s0));
    allocGlobals();

    ThreadState& host = cfg_.host;
    host.key = ThreadKey{0, 0, 0};
    const FunctionDef& mainFn = prog_->mainFn();
    host.k.push_back(Item{ItemOp::CallFrame, nullptr, nullptr, 0, 0});
    host.k.push_back(Item{ItemOp::Stmt, mainFn.body, nullptr, 0, 0});
    rrValid_ = false;
}

// ----- expression/statement helpers -----

namespace {

bool lvalueForm(const Expr* e) {
    if (e->kind == ExprKind::Ident)
        return e->bind == BindKind::LocalVar || e->bind == BindKind::GlobalVar;
    return e->kind == ExprKind::Index || (e->kind == ExprKind::Unary && e->uop == UnOp::Deref);
}

void pushRV(ThreadState& th, const Expr* e) {
    if (lvalueForm(e)) th.k.push_back(Item{ItemOp::LoadRV, nullptr, e, 0, 0});
    th.k.push_back(Item{ItemOp::Expr, nullptr, e, 0, 0});
}

CType intType() { return CType{BaseType::Int, 0, -1}; }
CType longType() { return CType{BaseType::Long, 0, -1}; }

// integer promotion for arithmetic: char joins int
CType arithResultType(CType l, CType r) {
    if (l.base == BaseType::Double || r.base == BaseType::Double)
        return CType{BaseType::Double, 0, -1};
    if (l.base == BaseType::Float || r.base == BaseType::Float)
        return CType{BaseType::Float, 0, -1};
    if (l.base == BaseType::Long || r.base == BaseType::Long) return longType();
    if (l.base == BaseType::UInt || r.base == BaseType::UInt)
        return CType{BaseType::UInt, 0, -1};
    return intType();
}

int64_t wrapToType(int64_t v, BaseType base) {
    switch (base) {
        case BaseType::Char: return static_cast<int8_t>(v);
        case BaseType::Int: return static_cast<int32_t>(v);
        case BaseType::UInt: return static_cast<int64_t>(static_cast<uint32_t>(v));
        default: return v;
    }
}

double asDouble(const Value& v) { return v.kind == ValueKind::Float ? v.f : static_cast<double>(v.i); }

}  // namespace

// Conversion applied at assignment, argument binding, casts and returns.
std::optional<Value> convertValueImpl(Machine& m, const Value& v, CType t, SourceLoc loc) {
    if (t.isVoid()) return Value::voidV();
    if (t.ptr > 0) {
        if (v.kind == ValueKind::Ptr) return Value::ptrV(v.p, t);
        if (v.kind == ValueKind::Int && v.i == 0) return Value::ptrV(Location{}, t);
        m.addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                        "invalid conversion of a non-pointer value to a pointer" + m.atLoc(loc),
                        loc);
        return std::nullopt;
    }
    if (t.isFloating()) {
        double d;
        if (v.kind == ValueKind::Float)
            d = v.f;
        else if (v.kind == ValueKind::Int)
            d = static_cast<double>(v.i);
        else {
            m.addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                            "invalid conversion to a floating type" + m.atLoc(loc), loc);
            return std::nullopt;
        }
        if (t.base == BaseType::Float) d = static_cast<float>(d);
        return Value::floatV(d, t);
    }
    // integer target
    if (v.kind == ValueKind::Int) return Value::intV(wrapToType(v.i, t.base), t);
    if (v.kind == ValueKind::Float) {
        double d = v.f;
        if (!(d >= -9.3e18 && d <= 9.3e18)) {
            m.addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                            "floating value out of range in integer conversion" + m.atLoc(loc),
                            loc);
            return Value::intV(0, t);
        }
        return Value::intV(wrapToType(static_cast<int64_t>(d), t.base), t);
    }
    if (v.kind == ValueKind::Ptr) {
        m.addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                        "conversion of a pointer to an integer is not supported" + m.atLoc(loc),
                        loc);
        return std::nullopt;
    }
    m.addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                    "invalid conversion" + m.atLoc(loc), loc);
    return std::nullopt;
}

// Arithmetic core. Returns nullopt when the thread cannot continue
// (division by zero, invalid pointer arithmetic).
std::optional<Value> binaryOpImpl(Machine& m, BinOp op, const Value& l, const Value& r,
                                  SourceLoc loc) {
    auto ub = [&](const std::string& msg) {
        m.addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior, msg + m.atLoc(loc), loc);
    };

    // pointer relations and arithmetic
    if (l.kind == ValueKind::Ptr || r.kind == ValueKind::Ptr) {
        switch (op) {
            case BinOp::Eq:
            case BinOp::Ne: {
                bool eq;
                if (l.kind == ValueKind::Ptr && r.kind == ValueKind::Ptr)
                    eq = l.p == r.p;
                else if (l.kind == ValueKind::Ptr)
                    eq = r.kind == ValueKind::Int && r.i == 0 && l.p.isNull();
                else
                    eq = l.kind == ValueKind::Int && l.i == 0 && r.p.isNull();
                return Value::intV((op == BinOp::Eq) == eq ? 1 : 0);
            }
            case BinOp::Lt:
            case BinOp::Le:
            case BinOp::Gt:
            case BinOp::Ge: {
                if (l.kind != ValueKind::Ptr || r.kind != ValueKind::Ptr) {
                    ub("ordered comparison between a pointer and an integer");
                    return std::nullopt;
                }
                if (l.p.object != r.p.object)
                    ub("ordered comparison of pointers into different memory objects");
                auto lt = std::pair(l.p.object, l.p.offset);
                auto rt = std::pair(r.p.object, r.p.offset);
                bool res = op == BinOp::Lt   ? lt < rt
                           : op == BinOp::Le ? lt <= rt
                           : op == BinOp::Gt ? lt > rt
                                             : lt >= rt;
                return Value::intV(res ? 1 : 0);
            }
            case BinOp::Add:
            case BinOp::Sub: {
                if (l.kind == ValueKind::Ptr && r.kind == ValueKind::Ptr) {
                    if (op != BinOp::Sub) {
                        ub("invalid pointer addition");
                        return std::nullopt;
                    }
                    if (l.p.object != r.p.object) {
                        ub("subtraction of pointers into different memory objects");
                        return std::nullopt;
                    }
                    int64_t es = l.type.element().scalarSize();
                    if (es == 0) {
                        ub("pointer subtraction on void pointers");
                        return std::nullopt;
                    }
                    return Value::intV((l.p.offset - r.p.offset) / es, longType());
                }
                const Value& ptr = l.kind == ValueKind::Ptr ? l : r;
                const Value& idx = l.kind == ValueKind::Ptr ? r : l;
                if (idx.kind != ValueKind::Int) {
                    ub("invalid pointer arithmetic operand");
                    return std::nullopt;
                }
                if (op == BinOp::Sub && l.kind != ValueKind::Ptr) {
                    ub("integer minus pointer is not valid");
                    return std::nullopt;
                }
                int64_t es = ptr.type.element().scalarSize();
                if (es == 0) {
                    ub("arithmetic on void pointers");
                    return std::nullopt;
                }
                int64_t delta = idx.i * es;
                Location nl = ptr.p;
                nl.offset += op == BinOp::Add ? delta : -delta;
                return Value::ptrV(nl, ptr.type);
            }
            default:
                ub("invalid operation on pointer values");
                return std::nullopt;
        }
    }

    CType rt = arithResultType(l.type, r.type);

    if (rt.isFloating()) {
        if (op == BinOp::Rem || op == BinOp::Shl || op == BinOp::Shr || op == BinOp::BitAnd ||
            op == BinOp::BitOr || op == BinOp::BitXor) {
            ub("invalid operator on floating values");
            return std::nullopt;
        }
        double a = asDouble(l), b = asDouble(r);
        switch (op) {
            case BinOp::Add: return Value::floatV(a + b, rt);
            case BinOp::Sub: return Value::floatV(a - b, rt);
            case BinOp::Mul: return Value::floatV(a * b, rt);
            case BinOp::Div: return Value::floatV(a / b, rt);
            case BinOp::Lt: return Value::intV(a < b);
            case BinOp::Le: return Value::intV(a <= b);
            case BinOp::Gt: return Value::intV(a > b);
            case BinOp::Ge: return Value::intV(a >= b);
            case BinOp::Eq: return Value::intV(a == b);
            case BinOp::Ne: return Value::intV(a != b);
            default: return std::nullopt;
        }
    }

    if (l.kind != ValueKind::Int || r.kind != ValueKind::Int) {
        ub("invalid operands");
        return std::nullopt;
    }
    int64_t a = l.i, b = r.i;
    bool isUnsigned = rt.base == BaseType::UInt;
    int width = rt.base == BaseType::Long ? 64 : 32;

    auto finish = [&](int64_t raw, bool checkOverflow) -> std::optional<Value> {
        int64_t wrapped = wrapToType(raw, rt.base);
        if (checkOverflow && !isUnsigned && wrapped != raw) {
            ub("signed integer overflow");
        }
        return Value::intV(wrapped, rt);
    };

    switch (op) {
        case BinOp::Add: {
            int64_t raw;
            bool ovf = __builtin_add_overflow(a, b, &raw);
            if (ovf && !isUnsigned) ub("signed integer overflow");
            return finish(raw, !ovf);
        }
        case BinOp::Sub: {
            int64_t raw;
            bool ovf = __builtin_sub_overflow(a, b, &raw);
            if (ovf && !isUnsigned) ub("signed integer overflow");
            return finish(raw, !ovf);
        }
        case BinOp::Mul: {
            int64_t raw;
            bool ovf = __builtin_mul_overflow(a, b, &raw);
            if (ovf && !isUnsigned) ub("signed integer overflow");
            return finish(raw, !ovf);
        }
        case BinOp::Div:
            if (b == 0) {
                ub("division by zero");
                return std::nullopt;
            }
            if (isUnsigned)
                return finish(static_cast<int64_t>(
                                  static_cast<uint32_t>(a) / static_cast<uint32_t>(b)),
                              false);
            if (a == INT64_MIN && b == -1) {
                ub("signed integer overflow");
                return finish(a, false);
            }
            return finish(a / b, true);
        case BinOp::Rem:
            if (b == 0) {
                ub("remainder by zero");
                return std::nullopt;
            }
            if (isUnsigned)
                return finish(static_cast<int64_t>(
                                  static_cast<uint32_t>(a) % static_cast<uint32_t>(b)),
                              false);
            if (a == INT64_MIN && b == -1) return finish(0, false);
            return finish(a % b, true);
        case BinOp::Shl:
        case BinOp::Shr: {
            if (b < 0 || b >= width) {
                ub("shift count out of range");
                b &= width - 1;
            }
            uint64_t ua = isUnsigned ? static_cast<uint32_t>(a) : static_cast<uint64_t>(a);
            int64_t raw;
            if (op == BinOp::Shl)
                raw = static_cast<int64_t>(ua << b);
            else if (isUnsigned)
                raw = static_cast<int64_t>(static_cast<uint32_t>(a) >> b);
            else
                raw = a >> b;  // arithmetic shift for signed values
            return finish(raw, false);
        }
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge:
        case BinOp::Eq:
        case BinOp::Ne: {
            // both operands converted to the common type first (so -1 == 4294967295u)
            int64_t wa = wrapToType(a, rt.base);
            int64_t wb = wrapToType(b, rt.base);
            bool res;
            switch (op) {
                case BinOp::Lt: res = wa < wb; break;
                case BinOp::Le: res = wa <= wb; break;
                case BinOp::Gt: res = wa > wb; break;
                case BinOp::Ge: res = wa >= wb; break;
                case BinOp::Eq: res = wa == wb; break;
                default: res = wa != wb; break;
            }
            return Value::intV(res ? 1 : 0);
        }
        case BinOp::BitAnd: return finish(a & b, false);
        case BinOp::BitOr: return finish(a | b, false);
        case BinOp::BitXor: return finish(a ^ b, false);
        default: return std::nullopt;
    }
}

// ----- transitions -----

std::vector<Transition> Machine::enabledTransitions() const {
    std::vector<Transition> out;
    const ThreadState& host = cfg_.host;
    if (!host.halted && !host.k.empty()) {
        bool runnable = true;
        if (host.k.back().op == ItemOp::ApiAwait) runnable = hostWaitSatisfied();
        if (runnable) out.push_back(Transition{TransitionKind::HostStep, {}, {}, 0});
    }
    for (const auto& [key, th] : cfg_.device) {
        if (!th.k.empty() && th.k.back().op != ItemOp::BarrierWait)
            out.push_back(Transition{TransitionKind::DeviceStep, key, {}, 0});
    }
    enumerateBarrierRules(out);
    for (const auto& [sid, s] : cfg_.streams) {
        if (streamDispatchable(s))
            out.push_back(Transition{TransitionKind::StreamDispatch, {}, {}, sid});
    }
    return out;
}

Transition Machine::scheduleNext(const std::vector<Transition>& enabled) {
    assert(!enabled.empty());
    switch (opts_.policy) {
        case SchedulePolicy::SeededRandom: {
            size_t i = static_cast<size_t>(cfg_.rng() % enabled.size());
            return enabled[i];
        }
        case SchedulePolicy::RoundRobin: {
            if (rrValid_) {
                for (const Transition& t : enabled)
                    if (rrLast_ < t) {
                        rrLast_ = t;
                        return t;
                    }
            }
            rrLast_ = enabled.front();
            rrValid_ = true;
            return enabled.front();
        }
        case SchedulePolicy::Exhaustive:
            throw std::logic_error("the exhaustive policy is only valid inside the oracle explorer");
    }
    return enabled.front();
}

ThreadState* Machine::threadFor(const Transition& t) {
    if (t.kind == TransitionKind::HostStep) return &cfg_.host;
    auto it = cfg_.device.find(t.thread);
    return it == cfg_.device.end() ? nullptr : &it->second;
}

void Machine::step(const Transition& t) {
    ++cfg_.steps;
    switch (t.kind) {
        case TransitionKind::HostStep: {
            ThreadState& th = cfg_.host;
            execThreadStep(th);
            if (!th.halted && th.k.empty()) {
                // main returned: its value is on the operand stack
                int64_t code = th.values.empty() ? 0 : th.values.back().i;
                cfg_.exitValue = code;
            }
            break;
        }
        case TransitionKind::DeviceStep: {
            auto it = cfg_.device.find(t.thread);
            if (it == cfg_.device.end()) break;
            ThreadState& th = it->second;
            execThreadStep(th);
            if (th.halted || th.k.empty()) {
                finishThread(th);
                cfg_.device.erase(it);
            }
            break;
        }
        case TransitionKind::BarrierRule:
            applyBarrierRule(t);
            break;
        case TransitionKind::StreamDispatch:
            dispatchStream(t.sid);
            break;
    }
    if (onStep) onStep(*this, t);
}

void Machine::haltThread(ThreadState& th) {
    th.halted = true;
    th.k.clear();
}

bool Machine::normalTermination() const {
    if (!(cfg_.host.halted || cfg_.host.k.empty())) return false;
    if (!cfg_.device.empty()) return false;
    for (const auto& [sid, s] : cfg_.streams)
        if (!s.idle()) return false;
    for (const auto& [gid, g] : cfg_.grids)
        if (!g.completed) return false;
    return true;
}

// ----- the small-step engine -----

void Machine::execThreadStep(ThreadState& th) {
    assert(!th.k.empty());
    Item it = th.k.back();
    th.k.pop_back();

    ThreadKey who = th.key;

    auto push = [&](Value v) { th.values.push_back(std::move(v)); };
    auto pop = [&]() {
        assert(!th.values.empty());
        Value v = std::move(th.values.back());
        th.values.pop_back();
        return v;
    };
    auto ubHalt = [&](const std::string& msg, SourceLoc loc) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior, msg + atLoc(loc), loc);
        haltThread(th);
    };
    auto convert = [&](const Value& v, CType t, SourceLoc loc) -> std::optional<Value> {
        auto r = convertValueImpl(*this, v, t, loc);
        if (!r) haltThread(th);
        return r;
    };
    auto binop = [&](BinOp op, const Value& l, const Value& r,
                     SourceLoc loc) -> std::optional<Value> {
        auto res = binaryOpImpl(*this, op, l, r, loc);
        if (!res) haltThread(th);
        return res;
    };
    auto popScopesTo = [&](size_t depth) {
        while (th.scopes.size() > depth) {
            for (ObjectId id : th.scopes.back().owned) {
                auto o = cfg_.memory.objects.find(id);
                if (o != cfg_.memory.objects.end()) o->second.live = false;
            }
            th.scopes.pop_back();
        }
    };
    auto lookupSym = [&](int symId) -> const Location* {
        for (auto s = th.scopes.rbegin(); s != th.scopes.rend(); ++s)
            for (auto b = s->binds.rbegin(); b != s->binds.rend(); ++b)
                if (b->first == symId) return &b->second;
        return nullptr;
    };

    switch (it.op) {
        case ItemOp::Stmt: {
            const Stmt* s = it.stmt;
            switch (s->kind) {
                case StmtKind::Block: {
                    th.scopes.emplace_back();
                    th.k.push_back(Item{ItemOp::PopScope});
                    for (auto c = s->body.rbegin(); c != s->body.rend(); ++c)
                        th.k.push_back(Item{ItemOp::Stmt, *c});
                    break;
                }
                case StmtKind::If:
                    th.k.push_back(Item{ItemOp::IfJudge, s});
                    pushRV(th, s->cond);
                    break;
                case StmtKind::While:
                    th.k.push_back(Item{ItemOp::LoopFrame, s});
                    th.k.push_back(Item{ItemOp::WhileJudge, s});
                    pushRV(th, s->cond);
                    break;
                case StmtKind::For: {
                    th.scopes.emplace_back();
                    th.k.push_back(Item{ItemOp::PopScope});
                    th.k.push_back(Item{ItemOp::LoopFrame, s});
                    th.k.push_back(Item{ItemOp::ForJudge, s});
                    if (s->cond) pushRV(th, s->cond);
                    if (s->forInit && s->forInit->kind != StmtKind::Empty)
                        th.k.push_back(Item{ItemOp::Stmt, s->forInit});
                    break;
                }
                case StmtKind::Return:
                    if (s->expr) {
                        th.k.push_back(Item{ItemOp::ReturnUnwind, s, nullptr, 1});
                        pushRV(th, s->expr);
                    } else {
                        th.k.push_back(Item{ItemOp::ReturnUnwind, s, nullptr, 0});
                    }
                    break;
                case StmtKind::Break: {
                    // unwind up to and including the innermost LoopFrame
                    while (!th.k.empty()) {
                        Item top = th.k.back();
                        th.k.pop_back();
                        if (top.op == ItemOp::PopScope) popScopesTo(th.scopes.size() - 1);
                        if (top.op == ItemOp::LoopFrame) break;
                    }
                    break;
                }
                case StmtKind::Continue: {
                    // unwind to the innermost LoopFrame, then restart its test
                    while (!th.k.empty()) {
                        Item top = th.k.back();
                        if (top.op == ItemOp::LoopFrame) break;
                        th.k.pop_back();
                        if (top.op == ItemOp::PopScope) popScopesTo(th.scopes.size() - 1);
                    }
                    assert(!th.k.empty());
                    const Stmt* loop = th.k.back().stmt;
                    if (loop->kind == StmtKind::While) {
                        th.k.push_back(Item{ItemOp::WhileJudge, loop});
                        pushRV(th, loop->cond);
                    } else {
                        th.k.push_back(Item{ItemOp::ForJudge, loop});
                        if (loop->cond) pushRV(th, loop->cond);
                        if (loop->forIncr) {
                            th.k.push_back(Item{ItemOp::PopValue});
                            pushRV(th, loop->forIncr);
                        }
                    }
                    break;
                }
                case StmtKind::ExprSt:
                    th.k.push_back(Item{ItemOp::PopValue});
                    pushRV(th, s->expr);
                    break;
                case StmtKind::Decl:
                    th.k.push_back(Item{ItemOp::DeclStep, s, nullptr, 0});
                    break;
                case StmtKind::Empty:
                    break;
            }
            break;
        }

        case ItemOp::DeclStep: {
            const Stmt* s = it.stmt;
            int i = it.a;
            if (i >= static_cast<int>(s->decls.size())) break;
            const Declarator& d = s->decls[static_cast<size_t>(i)];
            if (d.isDynShared) {
                // binds the launch-sized shared array of this thread's block
                const GridInfo& grid = cfg_.grids.at(who.gid);
                ObjectId obj = grid.sharedObjs[static_cast<size_t>(who.bid)];
                th.scopes.back().binds.push_back({d.symId, Location{obj, 0}});
                th.k.push_back(Item{ItemOp::DeclStep, s, nullptr, i + 1});
                break;
            }
            MemSpace space = who.isHost() ? MemSpace::host() : MemSpace::deviceGlobal();
            Location loc = allocObject(space, d.type.byteSize(), d.name);
            th.scopes.back().binds.push_back({d.symId, loc});
            th.scopes.back().owned.push_back(loc.object);
            if (d.init) {
                th.k.push_back(Item{ItemOp::DeclStep, s, nullptr, i + 1});
                th.k.push_back(Item{ItemOp::InitStore, s, nullptr, i});
                pushRV(th, d.init);
            } else {
                th.k.push_back(Item{ItemOp::DeclStep, s, nullptr, i + 1});
            }
            break;
        }

        case ItemOp::InitStore: {
            const Declarator& d = it.stmt->decls[static_cast<size_t>(it.a)];
            Value v = pop();
            auto conv = convert(v, d.type, d.loc);
            if (!conv) break;
            const Location* loc = lookupSym(d.symId);
            assert(loc);
            if (!writeMem(*loc, d.type, *conv, who, d.loc)) haltThread(th);
            break;
        }

        case ItemOp::Expr: {
            const Expr* e = it.expr;
            switch (e->kind) {
                case ExprKind::IntLit: push(Value::intV(e->ival, e->litType)); break;
                case ExprKind::FloatLit: push(Value::floatV(e->fval, e->litType)); break;
                case ExprKind::StrLit:
                    ubHalt("string literal in an unsupported position", e->loc);
                    break;
                case ExprKind::Ident: {
                    if (e->bind == BindKind::LocalVar) {
                        const Location* loc = lookupSym(e->bindIndex);
                        if (!loc) {
                            ubHalt("variable '" + e->text + "' is not bound in this scope", e->loc);
                            break;
                        }
                        CType t = e->litType;
                        push(Value::lvalue(*loc, t));
                    } else if (e->bind == BindKind::GlobalVar) {
                        push(Value::lvalue(cfg_.globalLocs[static_cast<size_t>(e->bindIndex)],
                                           prog_->tu->globals[static_cast<size_t>(e->bindIndex)].type));
                    } else if (e->bind == BindKind::EnumConst) {
                        push(Value::intV(e->constVal));
                    } else {
                        ubHalt("cannot evaluate '" + e->text + "' as a value", e->loc);
                    }
                    break;
                }
                case ExprKind::Builtin: {
                    if (who.isHost()) {
                        ubHalt("device builtin '" + e->text + "' referenced from host code",
                               e->loc);
                        break;
                    }
                    push(builtinValue(e->builtinVar, e->builtinComp, th));
                    break;
                }
                case ExprKind::Unary:
                    switch (e->uop) {
                        case UnOp::Deref:
                            th.k.push_back(Item{ItemOp::Deref, nullptr, e});
                            pushRV(th, e->a);
                            break;
                        case UnOp::AddrOf:
                            th.k.push_back(Item{ItemOp::AddrOf, nullptr, e});
                            th.k.push_back(Item{ItemOp::Expr, nullptr, e->a});
                            break;
                        default:
                            th.k.push_back(Item{ItemOp::UnaryOp, nullptr, e});
                            pushRV(th, e->a);
                            break;
                    }
                    break;
                case ExprKind::IncDec:
                    th.k.push_back(Item{ItemOp::StoreIncDec, nullptr, e});
                    th.k.push_back(Item{ItemOp::LoadKeepLV, nullptr, e});
                    th.k.push_back(Item{ItemOp::Expr, nullptr, e->a});
                    break;
                case ExprKind::Binary:
                    if (e->bop == BinOp::LAnd || e->bop == BinOp::LOr) {
                        th.k.push_back(Item{ItemOp::LogicalRHS, nullptr, e,
                                            e->bop == BinOp::LAnd ? 1 : 0});
                        pushRV(th, e->a);
                    } else {
                        th.k.push_back(Item{ItemOp::BinaryOp, nullptr, e});
                        pushRV(th, e->b);
                        pushRV(th, e->a);
                    }
                    break;
                case ExprKind::Assign:
                    if (e->hasCompoundOp) {
                        th.k.push_back(Item{ItemOp::StoreCompound, nullptr, e});
                        pushRV(th, e->b);
                        th.k.push_back(Item{ItemOp::LoadKeepLV, nullptr, e});
                        th.k.push_back(Item{ItemOp::Expr, nullptr, e->a});
                    } else {
                        th.k.push_back(Item{ItemOp::StoreAssign, nullptr, e});
                        pushRV(th, e->b);
                        th.k.push_back(Item{ItemOp::Expr, nullptr, e->a});
                    }
                    break;
                case ExprKind::Ternary:
                    th.k.push_back(Item{ItemOp::TernarySel, nullptr, e});
                    pushRV(th, e->a);
                    break;
                case ExprKind::Call: {
                    th.k.push_back(Item{ItemOp::Invoke, nullptr, e});
                    size_t first = e->callee == CalleeKind::Printf ? 1 : 0;
                    for (size_t i = e->args.size(); i > first; --i)
                        pushRV(th, e->args[i - 1]);
                    break;
                }
                case ExprKind::Index:
                    th.k.push_back(Item{ItemOp::IndexOp, nullptr, e});
                    pushRV(th, e->b);
                    pushRV(th, e->a);
                    break;
                case ExprKind::Cast:
                    th.k.push_back(Item{ItemOp::CastOp, nullptr, e});
                    pushRV(th, e->a);
                    break;
                case ExprKind::SizeofType:
                    push(Value::intV(e->castType.byteSize(), longType()));
                    break;
                case ExprKind::Launch: {
                    th.k.push_back(Item{ItemOp::LaunchExec, nullptr, e});
                    for (size_t i = e->args.size(); i > 0; --i) pushRV(th, e->args[i - 1]);
                    if (e->cfgStream) pushRV(th, e->cfgStream);
                    if (e->cfgShmem) pushRV(th, e->cfgShmem);
                    pushRV(th, e->cfgBlock);
                    pushRV(th, e->cfgGrid);
                    break;
                }
                case ExprKind::Member:
                    ubHalt("unexpected member access", e->loc);
                    break;
            }
            break;
        }

        case ItemOp::LoadRV: {
            Value lv = pop();
            assert(lv.kind == ValueKind::LValue);
            if (lv.type.isArray()) {
                push(Value::ptrV(lv.p, lv.type.decayed()));
                break;
            }
            auto v = readMem(lv.p, lv.type, who, it.expr->loc);
            if (!v) {
                haltThread(th);
                break;
            }
            push(*v);
            break;
        }

        case ItemOp::LoadKeepLV: {
            Value lv = pop();
            assert(lv.kind == ValueKind::LValue);
            if (lv.type.isArray()) {
                ubHalt("cannot modify an array", it.expr->loc);
                break;
            }
            auto v = readMem(lv.p, lv.type, who, it.expr->loc);
            if (!v) {
                haltThread(th);
                break;
            }
            push(lv);
            push(*v);
            break;
        }

        case ItemOp::StoreAssign: {
            Value rhs = pop();
            Value lv = pop();
            assert(lv.kind == ValueKind::LValue);
            auto conv = convert(rhs, lv.type, it.expr->loc);
            if (!conv) break;
            if (!writeMem(lv.p, lv.type, *conv, who, it.expr->loc)) {
                haltThread(th);
                break;
            }
            push(*conv);
            break;
        }

        case ItemOp::StoreCompound: {
            Value rhs = pop();
            Value old = pop();
            Value lv = pop();
            assert(lv.kind == ValueKind::LValue);
            auto r = binop(it.expr->bop, old, rhs, it.expr->loc);
            if (!r) break;
            auto conv = convert(*r, lv.type, it.expr->loc);
            if (!conv) break;
            if (!writeMem(lv.p, lv.type, *conv, who, it.expr->loc)) {
                haltThread(th);
                break;
            }
            push(*conv);
            break;
        }

        case ItemOp::StoreIncDec: {
            Value old = pop();
            Value lv = pop();
            assert(lv.kind == ValueKind::LValue);
            auto r = binop(BinOp::Add, old, Value::intV(it.expr->incDelta), it.expr->loc);
            if (!r) break;
            auto conv = convert(*r, lv.type, it.expr->loc);
            if (!conv) break;
            if (!writeMem(lv.p, lv.type, *conv, who, it.expr->loc)) {
                haltThread(th);
                break;
            }
            push(it.expr->prefix ? *conv : old);
            break;
        }

        case ItemOp::AddrOf: {
            Value lv = pop();
            assert(lv.kind == ValueKind::LValue);
            CType t = lv.type.isArray() ? lv.type.element() : lv.type;
            ++t.ptr;
            push(Value::ptrV(lv.p, t));
            break;
        }

        case ItemOp::Deref: {
            Value v = pop();
            if (v.kind == ValueKind::Int && v.i == 0) v = Value::ptrV(Location{}, CType{BaseType::Void, 1, -1});
            if (v.kind != ValueKind::Ptr || v.type.ptr == 0) {
                ubHalt("dereference of a non-pointer value", it.expr->loc);
                break;
            }
            push(Value::lvalue(v.p, v.type.element()));
            break;
        }

        case ItemOp::IndexOp: {
            Value idx = pop();
            Value base = pop();
            if (base.kind != ValueKind::Ptr || idx.kind != ValueKind::Int) {
                ubHalt("invalid subscript", it.expr->loc);
                break;
            }
            CType elem = base.type.element();
            Location loc = base.p;
            loc.offset += idx.i * elem.scalarSize();
            push(Value::lvalue(loc, elem));
            break;
        }

        case ItemOp::UnaryOp: {
            Value v = pop();
            const Expr* e = it.expr;
            switch (e->uop) {
                case UnOp::Neg:
                    if (v.kind == ValueKind::Float) {
                        push(Value::floatV(-v.f, v.type));
                    } else if (v.kind == ValueKind::Int) {
                        auto r = binop(BinOp::Sub, Value::intV(0, v.type), v, e->loc);
                        if (r) push(*r);
                    } else {
                        ubHalt("negation of a non-arithmetic value", e->loc);
                    }
                    break;
                case UnOp::Not: push(Value::intV(v.truthy() ? 0 : 1)); break;
                case UnOp::BitNot:
                    if (v.kind != ValueKind::Int) {
                        ubHalt("bitwise complement of a non-integer value", e->loc);
                        break;
                    }
                    push(Value::intV(wrapToType(~v.i, arithResultType(v.type, intType()).base),
                                     arithResultType(v.type, intType())));
                    break;
                default:
                    assert(false);
            }
            break;
        }

        case ItemOp::BinaryOp: {
            Value r = pop();
            Value l = pop();
            auto res = binop(it.expr->bop, l, r, it.expr->loc);
            if (res) push(*res);
            break;
        }

        case ItemOp::LogicalRHS: {
            Value l = pop();
            bool isAnd = it.a == 1;
            if (isAnd && !l.truthy()) {
                push(Value::intV(0));
            } else if (!isAnd && l.truthy()) {
                push(Value::intV(1));
            } else {
                th.k.push_back(Item{ItemOp::Boolify});
                pushRV(th, it.expr->b);
            }
            break;
        }

        case ItemOp::Boolify: {
            Value v = pop();
            push(Value::intV(v.truthy() ? 1 : 0));
            break;
        }

        case ItemOp::TernarySel: {
            Value c = pop();
            pushRV(th, c.truthy() ? it.expr->b : it.expr->c);
            break;
        }

        case ItemOp::CastOp: {
            Value v = pop();
            const Expr* e = it.expr;
            if (e->castType.ptr > 0 && v.kind == ValueKind::Ptr) {
                push(Value::ptrV(v.p, e->castType));  // reinterpret, offset preserved
                break;
            }
            auto conv = convert(v, e->castType, e->loc);
            if (conv) push(*conv);
            break;
        }

        case ItemOp::IfJudge: {
            Value c = pop();
            if (c.truthy())
                th.k.push_back(Item{ItemOp::Stmt, it.stmt->thenS});
            else if (it.stmt->elseS)
                th.k.push_back(Item{ItemOp::Stmt, it.stmt->elseS});
            break;
        }

        case ItemOp::WhileJudge: {
            Value c = pop();
            if (c.truthy()) {
                th.k.push_back(Item{ItemOp::WhileJudge, it.stmt});
                pushRV(th, it.stmt->cond);
                th.k.push_back(Item{ItemOp::Stmt, it.stmt->loopBody});
            } else {
                assert(!th.k.empty() && th.k.back().op == ItemOp::LoopFrame);
                th.k.pop_back();
            }
            break;
        }

        case ItemOp::ForJudge: {
            bool go = true;
            if (it.stmt->cond) {
                Value c = pop();
                go = c.truthy();
            }
            if (go) {
                th.k.push_back(Item{ItemOp::ForJudge, it.stmt});
                if (it.stmt->cond) pushRV(th, it.stmt->cond);
                if (it.stmt->forIncr) {
                    th.k.push_back(Item{ItemOp::PopValue});
                    pushRV(th, it.stmt->forIncr);
                }
                th.k.push_back(Item{ItemOp::Stmt, it.stmt->loopBody});
            } else {
                assert(!th.k.empty() && th.k.back().op == ItemOp::LoopFrame);
                th.k.pop_back();
            }
            break;
        }

        case ItemOp::LoopFrame:
            break;  // dissolved by judges or break; reaching it directly is a no-op

        case ItemOp::PopValue:
            pop();
            break;

        case ItemOp::PopScope:
            popScopesTo(th.scopes.size() - 1);
            break;

        case ItemOp::ReturnUnwind: {
            Value v = it.a ? pop() : Value::voidV();
            while (!th.k.empty()) {
                Item top = th.k.back();
                th.k.pop_back();
                if (top.op == ItemOp::CallFrame) {
                    popScopesTo(static_cast<size_t>(top.a));
                    th.values.resize(static_cast<size_t>(top.b));
                    CType ret = returnTypeOfFrame(top, th);
                    auto conv = convert(v, ret, it.stmt->loc);
                    if (conv) push(*conv);
                    return;
                }
                if (top.op == ItemOp::PopScope) popScopesTo(th.scopes.size() - 1);
            }
            assert(false && "return without an enclosing call frame");
            break;
        }

        case ItemOp::CallFrame: {
            // function body fell off the end
            popScopesTo(static_cast<size_t>(it.a));
            th.values.resize(static_cast<size_t>(it.b));
            CType ret = returnTypeOfFrame(it, th);
            if (ret.isVoid())
                push(Value::voidV());
            else
                push(Value::intV(0, ret));  // main's implicit return 0; others tolerated
            break;
        }

        case ItemOp::Invoke: {
            const Expr* call = it.expr;
            switch (call->callee) {
                case CalleeKind::User: {
                    const FunctionDef& f = prog_->function(call->calleeIndex);
                    size_t n = call->args.size();
                    std::vector<Value> args(n);
                    for (size_t i = n; i > 0; --i) args[i - 1] = pop();
                    th.k.push_back(Item{ItemOp::CallFrame, nullptr, call,
                                        static_cast<int>(th.scopes.size()),
                                        static_cast<int>(th.values.size())});
                    th.scopes.emplace_back();
                    bool ok = true;
                    for (size_t i = 0; i < n; ++i) {
                        auto conv = convert(args[i], f.params[i].type, call->loc);
                        if (!conv) {
                            ok = false;
                            break;
                        }
                        MemSpace space =
                            who.isHost() ? MemSpace::host() : MemSpace::deviceGlobal();
                        Location loc = allocObject(space, f.params[i].type.byteSize(),
                                                   f.params[i].name);
                        pokeValue(cfg_.memory.objects.at(loc.object), 0, f.params[i].type, *conv);
                        th.scopes.back().binds.push_back({f.params[i].symId, loc});
                        th.scopes.back().owned.push_back(loc.object);
                    }
                    if (ok) th.k.push_back(Item{ItemOp::Stmt, f.body});
                    break;
                }
                case CalleeKind::Printf: {
                    size_t n = call->args.size() - 1;
                    std::vector<Value> args(n);
                    for (size_t i = n; i > 0; --i) args[i - 1] = pop();
                    execPrintf(th, call, args);
                    break;
                }
                case CalleeKind::Api: {
                    size_t n = call->args.size();
                    std::vector<Value> args(n);
                    for (size_t i = n; i > 0; --i) args[i - 1] = pop();
                    invokeApi(th, call, std::move(args));
                    break;
                }
                case CalleeKind::Sync: {
                    int64_t operand = 0;
                    if (call->syncKind != SyncKind::Plain) operand = pop().i;
                    barrierArrive(th, call->syncKind, operand);
                    break;
                }
                case CalleeKind::None:
                    ubHalt("call of an unsupported function", call->loc);
                    break;
            }
            break;
        }

        case ItemOp::LaunchExec: {
            const Expr* e = it.expr;
            size_t n = e->args.size();
            std::vector<Value> args(n);
            for (size_t i = n; i > 0; --i) args[i - 1] = pop();
            Value streamV = Value::intV(0);
            Value shmemV = Value::intV(0);
            if (e->cfgStream) streamV = pop();
            if (e->cfgShmem) shmemV = pop();
            Value blockV = pop();
            Value gridV = pop();

            const FunctionDef& k = prog_->function(e->calleeIndex);
            LaunchSpec spec;
            spec.loc = e->loc;
            spec.kernelIndex = e->calleeIndex;
            spec.gridDim = gridV.i;
            spec.blockDim = blockV.i;
            spec.shmemBytes = shmemV.i;
            spec.stream = static_cast<StreamId>(streamV.i);
            if (k.space != ExecSpace::Kernel) {
                addDiagnostic(Severity::Error, DiagCategory::ApiError,
                              "launch of '" + k.name + "', which is not a __global__ kernel" +
                                  atLoc(e->loc),
                              e->loc);
                push(Value::voidV());
                break;
            }
            if (spec.gridDim < 1 || spec.blockDim < 1 || spec.shmemBytes < 0 ||
                spec.blockDim > opts_.arch.maxThreadsPerBlock) {
                addDiagnostic(Severity::Error, DiagCategory::ApiError,
                              "invalid kernel launch configuration (gridDim=" +
                                  std::to_string(spec.gridDim) +
                                  ", blockDim=" + std::to_string(spec.blockDim) +
                                  ", shmem=" + std::to_string(spec.shmemBytes) + ")" +
                                  atLoc(e->loc),
                              e->loc);
                push(Value::voidV());
                break;
            }
            bool ok = true;
            spec.args.reserve(n);
            for (size_t i = 0; i < n; ++i) {
                auto conv = convert(args[i], k.params[i].type, e->loc);
                if (!conv) {
                    ok = false;
                    break;
                }
                spec.args.push_back(*conv);
            }
            if (!ok) break;
            enqueueLaunch(std::move(spec));
            push(Value::voidV());
            break;
        }

        case ItemOp::BarrierWait:
            // blocked threads are never scheduled; reaching here is a bug
            assert(false && "stepped a thread blocked at a barrier");
            break;

        case ItemOp::ApiAwait:
            // the awaited condition holds (enabledTransitions checked)
            cfg_.hostWait = HostWaitKind::None;
            cfg_.hostWaitId = 0;
            push(Value::intV(it.a));
            break;
    }
}

RunResult Machine::run() {
    reset();
    bool hitLimit = false;
    while (true) {
        if (cfg_.steps >= opts_.stepLimit) {
            hitLimit = true;
            addDiagnostic(Severity::Error, DiagCategory::ApiError,
                          "step limit exceeded (" + std::to_string(opts_.stepLimit) +
                              " steps); execution abandoned.",
                          SourceLoc{});
            break;
        }
        std::vector<Transition> enabled = enabledTransitions();
        if (enabled.empty()) break;
        step(scheduleNext(enabled));
    }

    RunResult r;
    r.steps = cfg_.steps;
    r.output = cfg_.output;
    r.mainReturn = cfg_.exitValue;

    if (!hitLimit && !normalTermination()) {
        r.stuck = true;
        r.stuckReports = scanStuck();
        bool barrier = false;
        for (const StuckReport& s : r.stuckReports)
            if (s.kind == StuckReport::Kind::BarrierDeadlock) barrier = true;
        if (barrier) {
            addDiagnostic(Severity::Error, DiagCategory::Deadlock,
                          "Detected a deadlock caused by misplaced __syncthreads().", SourceLoc{});
        } else {
            std::string why = r.stuckReports.empty() ? "no runnable computation remains"
                                                     : r.stuckReports.front().reason;
            addDiagnostic(Severity::Error, DiagCategory::Deadlock,
                          "Execution is stuck: " + why, SourceLoc{});
        }
    }

    r.diagnostics = cfg_.diagnostics;
    if (r.stuck)
        r.exitCode = 3;
    else if (!r.diagnostics.empty())
        r.exitCode = 1;
    else
        r.exitCode = static_cast<int>(cfg_.exitValue.value_or(0));
    return r;
}

CType Machine::returnTypeOfFrame(const Item& frame, const ThreadState& th) const {
    if (frame.expr) return prog_->function(frame.expr->calleeIndex).ret;
    if (th.key.isHost()) return prog_->mainFn().ret;
    return prog_->function(cfg_.grids.at(th.key.gid).kernelIndex).ret;
}

// printf with %d %u %c %f %s %% and optional width/precision, delegated to
// the C library one directive at a time.
void Machine::execPrintf(ThreadState& th, const Expr* call, const std::vector<Value>& args) {
    const std::string& fmt = prog_->tu->strings[static_cast<size_t>(call->args[0]->strId)];
    SourceLoc loc = call->loc;
    std::string out;
    size_t argi = 0;
    auto fail = [&](const std::string& msg) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior, msg + atLoc(loc), loc);
        haltThread(th);
    };

    for (size_t i = 0; i < fmt.size(); ++i) {
        if (fmt[i] != '%') {
            out += fmt[i];
            continue;
        }
        ++i;
        if (i >= fmt.size()) {
            fail("printf format string ends with a lone '%'");
            return;
        }
        if (fmt[i] == '%') {
            out += '%';
            continue;
        }
        std::string spec = "%";
        while (i < fmt.size() && (fmt[i] == '-' || fmt[i] == '0' || fmt[i] == ' ' ||
                                  fmt[i] == '+' || std::isdigit(static_cast<unsigned char>(fmt[i])) ||
                                  fmt[i] == '.')) {
            spec += fmt[i];
            ++i;
        }
        if (i >= fmt.size()) {
            fail("unterminated printf conversion");
            return;
        }
        char conv = fmt[i];
        if (conv != 's' && argi >= args.size()) {
            fail("printf has more conversions than arguments");
            return;
        }
        char buf[256];
        switch (conv) {
            case 'd': {
                const Value& v = args[argi++];
                if (v.kind != ValueKind::Int) {
                    fail("printf %d expects an integer argument");
                    return;
                }
                spec += "lld";
                std::snprintf(buf, sizeof buf, spec.c_str(), static_cast<long long>(v.i));
                out += buf;
                break;
            }
            case 'u': {
                const Value& v = args[argi++];
                if (v.kind != ValueKind::Int) {
                    fail("printf %u expects an integer argument");
                    return;
                }
                uint64_t u = v.type.base == BaseType::Long
                                 ? static_cast<uint64_t>(v.i)
                                 : static_cast<uint32_t>(v.i);
                spec += "llu";
                std::snprintf(buf, sizeof buf, spec.c_str(), static_cast<unsigned long long>(u));
                out += buf;
                break;
            }
            case 'c': {
                const Value& v = args[argi++];
                if (v.kind != ValueKind::Int) {
                    fail("printf %c expects an integer argument");
                    return;
                }
                spec += 'c';
                std::snprintf(buf, sizeof buf, spec.c_str(), static_cast<int>(v.i));
                out += buf;
                break;
            }
            case 'f': {
                const Value& v = args[argi++];
                if (v.kind != ValueKind::Float && v.kind != ValueKind::Int) {
                    fail("printf %f expects a floating argument");
                    return;
                }
                spec += 'f';
                std::snprintf(buf, sizeof buf, spec.c_str(), asDouble(v));
                out += buf;
                break;
            }
            case 's': {
                if (argi >= args.size()) {
                    fail("printf has more conversions than arguments");
                    return;
                }
                const Value& v = args[argi++];
                std::string s;
                if (v.kind == ValueKind::Str) {
                    s = v.strv;
                } else if (v.kind == ValueKind::Ptr) {
                    CType ch{BaseType::Char, 0, -1};
                    Location p = v.p;
                    for (int64_t guard = 0;; ++guard) {
                        if (guard > 1 << 20) {
                            fail("printf %s string is not NUL-terminated");
                            return;
                        }
                        auto b = readMem(p, ch, th.key, loc);
                        if (!b) {
                            haltThread(th);
                            return;
                        }
                        if (b->i == 0) break;
                        s += static_cast<char>(b->i);
                        ++p.offset;
                    }
                } else {
                    fail("printf %s expects a string argument");
                    return;
                }
                if (spec == "%") {
                    out += s;
                } else {
                    spec += 's';
                    std::vector<char> big(s.size() + 256);
                    std::snprintf(big.data(), big.size(), spec.c_str(), s.c_str());
                    out += big.data();
                }
                break;
            }
            default:
                fail(std::string("unsupported printf conversion '%") + conv + "'");
                return;
        }
    }
    if (argi != args.size()) {
        fail("printf has more arguments than conversions");
        return;
    }
    cfg_.output += out;
    if (onOutput) onOutput(out);
    th.values.push_back(Value::intV(static_cast<int64_t>(out.size())));
}

}  // namespace mck
