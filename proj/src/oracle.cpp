#include "minicudak/oracle.hpp"

#include <map>

namespace mck {

namespace {

// Does the thread's next step touch monitored (block-shared) memory?
// The target lvalue already sits on the operand stack at a depth fixed by
// the pending item, so this is a pure inspection.
bool nextStepVisible(const Configuration& cfg, const ThreadState& th) {
    if (th.k.empty()) return false;
    const Item& it = th.k.back();
    int lvDepth;
    switch (it.op) {
        case ItemOp::LoadRV:
        case ItemOp::LoadKeepLV:
            lvDepth = 0;
            break;
        case ItemOp::StoreAssign:
        case ItemOp::StoreIncDec:
            lvDepth = 1;
            break;
        case ItemOp::StoreCompound:
            lvDepth = 2;
            break;
        default:
            return false;
    }
    if (th.values.size() <= static_cast<size_t>(lvDepth)) return false;
    const Value& lv = th.values[th.values.size() - 1 - static_cast<size_t>(lvDepth)];
    if (lv.kind != ValueKind::LValue) return false;
    auto obj = cfg.memory.objects.find(lv.p.object);
    return obj != cfg.memory.objects.end() && obj->second.space.kind == SpaceKind::DeviceShared;
}

bool transitionVisible(const Machine& m, const Transition& t) {
    if (t.kind != TransitionKind::DeviceStep) return false;
    auto it = m.config().device.find(t.thread);
    if (it == m.config().device.end()) return false;
    return nextStepVisible(m.config(), it->second);
}

// Ground truth: a conflicting pair of accesses to one shared byte with no
// barrier of the owning block between them in this trace.
bool traceHasRace(const Configuration& cfg) {
    const auto& tr = cfg.oracleTrace;
    for (size_t i = 0; i < tr.size(); ++i) {
        if (tr[i].isEpoch) continue;
        for (size_t j = i + 1; j < tr.size(); ++j) {
            if (tr[j].isEpoch) continue;
            if (tr[i].object != tr[j].object) continue;
            if (tr[i].thread == tr[j].thread) continue;
            if (tr[i].kind != AccessKind::Write && tr[j].kind != AccessKind::Write) continue;
            bool overlap = tr[i].offset < tr[j].offset + tr[j].len &&
                           tr[j].offset < tr[i].offset + tr[i].len;
            if (!overlap) continue;
            const MemObject& obj = cfg.memory.objects.at(tr[i].object);
            bool separated = false;
            for (size_t k = i + 1; k < j; ++k) {
                if (tr[k].isEpoch && tr[k].gid == obj.space.gid && tr[k].bid == obj.space.bid) {
                    separated = true;
                    break;
                }
            }
            if (!separated) return true;
        }
    }
    return false;
}

struct Explorer {
    Machine& m;
    const OracleOptions& opts;
    OracleResult result;
    std::map<ThreadKey, int> accessCount;  // along the current path

    // Runs every enabled invisible transition (in canonical order) until
    // only visible choices remain or nothing is enabled.
    std::vector<Transition> closure() {
        while (true) {
            if (result.aborted) return {};
            if (m.config().steps > 10'000'000) {
                result.aborted = true;
                result.error = "step budget exceeded";
                return {};
            }
            std::vector<Transition> enabled = m.enabledTransitions();
            if (static_cast<int>(m.config().device.size()) > opts.maxThreads) {
                result.aborted = true;
                result.error = "kernel spawns more threads than the oracle size bound";
                return {};
            }
            bool advanced = false;
            for (const Transition& t : enabled) {
                if (!transitionVisible(m, t)) {
                    m.step(t);
                    advanced = true;
                    break;
                }
            }
            if (!advanced) return enabled;  // all visible (or empty)
        }
    }

    void explore() {
        std::vector<Transition> choices = closure();
        if (result.aborted) return;
        if (choices.empty()) {
            ++result.interleavings;
            if (result.interleavings > opts.maxInterleavings) {
                result.aborted = true;
                result.error = "interleaving budget exceeded";
                return;
            }
            if (traceHasRace(m.config())) result.oracleRace = true;
            for (const Diagnostic& d : m.config().diagnostics)
                if (d.category == DiagCategory::Race) result.detectorRace = true;
            return;
        }
        Configuration saved = m.config();
        auto savedCounts = accessCount;
        for (const Transition& t : choices) {
            m.config() = saved;
            accessCount = savedCounts;
            int& count = accessCount[t.thread];
            if (++count > opts.maxAccessesPerThread) {
                result.aborted = true;
                result.error = "a thread performs more shared accesses than the oracle size bound";
                return;
            }
            m.step(t);
            explore();
            if (result.aborted) return;
        }
    }
};

}  // namespace

OracleResult oracleRace(std::shared_ptr<const Program> prog, OracleOptions opts) {
    RunOptions ro;
    ro.policy = SchedulePolicy::Exhaustive;
    ro.raceCheck = true;
    ro.arch = opts.arch;
    Machine m(std::move(prog), ro);
    m.reset();
    m.config().oracleMode = true;

    Explorer ex{m, opts, {}, {}};
    ex.explore();
    return ex.result;
}

}  // namespace mck
