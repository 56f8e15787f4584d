#include <cassert>
#include <stdexcept>

#include "minicudak/machine.hpp"

namespace mck {

// Launches are asynchronous with respect to the host: the call only
// enqueues; the grid spawns when the stream dispatches it.
void Machine::enqueueLaunch(LaunchSpec spec) {
    StreamId sid = spec.stream;
    SourceLoc loc = spec.loc;
    StreamItem item;
    item.kind = StreamItemKind::KernelLaunch;
    item.launch = std::move(spec);
    enqueue(sid, std::move(item), loc);
}

GridId Machine::spawnGrid(const LaunchSpec& spec) {
    GridId gid = cfg_.nextGid++;
    const FunctionDef& kernel = prog_->function(spec.kernelIndex);

    GridInfo grid;
    grid.gid = gid;
    grid.gridDim = spec.gridDim;
    grid.blockDim = spec.blockDim;
    grid.shmemBytes = spec.shmemBytes;
    grid.streamId = spec.stream;
    grid.kernelIndex = spec.kernelIndex;
    grid.liveThreads = spec.gridDim * spec.blockDim;

    // one dynamic shared array per block, sized by the third launch parameter
    for (int bid = 0; bid < spec.gridDim; ++bid) {
        Location l = allocObject(MemSpace::deviceShared(gid, bid), spec.shmemBytes,
                                 kernel.dynSharedName.empty() ? "(dynamic shared)"
                                                              : kernel.dynSharedName);
        grid.sharedObjs.push_back(l.object);
    }

    for (int bid = 0; bid < spec.gridDim; ++bid) {
        for (int tid = 0; tid < spec.blockDim; ++tid) {
            ThreadState th;
            th.key = ThreadKey{gid, bid, tid};
            th.scopes.emplace_back();
            // arguments are passed by value: bytes copied at spawn
            for (size_t i = 0; i < spec.args.size(); ++i) {
                const Param& p = kernel.params[i];
                Location loc = allocObject(MemSpace::deviceGlobal(), p.type.byteSize(), p.name);
                pokeValue(cfg_.memory.objects.at(loc.object), 0, p.type, spec.args[i]);
                th.scopes.back().binds.push_back({p.symId, loc});
                th.scopes.back().owned.push_back(loc.object);
            }
            if (kernel.dynSharedSym >= 0)
                th.scopes.back().binds.push_back(
                    {kernel.dynSharedSym, Location{grid.sharedObjs[static_cast<size_t>(bid)], 0}});
            th.k.push_back(Item{ItemOp::CallFrame, nullptr, nullptr, 0, 0});
            th.k.push_back(Item{ItemOp::Stmt, kernel.body});
            cfg_.device.emplace(th.key, std::move(th));
        }
    }

    cfg_.grids.emplace(gid, std::move(grid));
    trace("stream sid=" + std::to_string(spec.stream) + " dispatch=launch gid=" +
          std::to_string(gid) + " kernel=" + kernel.name);
    return gid;
}

Value Machine::builtinValue(BuiltinVar var, int comp, const ThreadState& th) {
    const GridInfo& grid = cfg_.grids.at(th.key.gid);
    int64_t v = 0;
    switch (var) {
        case BuiltinVar::ThreadIdx: v = comp == 0 ? th.key.tid : 0; break;
        case BuiltinVar::BlockIdx: v = comp == 0 ? th.key.bid : 0; break;
        case BuiltinVar::BlockDim: v = comp == 0 ? grid.blockDim : 1; break;
        case BuiltinVar::GridDim: v = comp == 0 ? grid.gridDim : 1; break;
        case BuiltinVar::WarpSize: v = opts_.arch.warpSize; break;
    }
    return Value::intV(v);
}

// Arrival: the barrier call is replaced by a blocking marker; thread 0
// receives the initial token.
void Machine::barrierArrive(ThreadState& th, SyncKind kind, int64_t operand) {
    BarrierPhase& ph = th.barrier;
    ph.waiting = true;
    ph.token = th.key.tid == 0 ? 1 : 0;
    ph.kind = kind;
    ph.operand = operand;
    bool nz = operand != 0;
    ph.accAll = nz || kind == SyncKind::Plain;
    ph.accAny = nz;
    ph.accCount = nz ? 1 : 0;
    th.k.push_back(Item{ItemOp::BarrierWait});
}

namespace {

// value a released thread receives, per its own call variant
Value barrierResult(const BarrierPhase& ph) {
    switch (ph.kind) {
        case SyncKind::Plain: return Value::voidV();
        case SyncKind::And: return Value::intV(ph.accAll ? 1 : 0);
        case SyncKind::Or: return Value::intV(ph.accAny ? 1 : 0);
        case SyncKind::Count: return Value::intV(ph.accCount);
    }
    return Value::voidV();
}

}  // namespace

void Machine::enumerateBarrierRules(std::vector<Transition>& out) const {
    // token uniqueness makes at most one rule per block applicable
    for (const auto& [key, th] : cfg_.device) {
        if (!th.barrier.waiting || th.barrier.token == 0) continue;
        const GridInfo& grid = cfg_.grids.at(key.gid);
        int64_t last = grid.blockDim - 1;
        if (th.barrier.token == 1) {
            if (key.tid == last) {
                out.push_back(Transition{TransitionKind::BarrierRule, key,
                                         BarrierRuleKind::Turnaround, 0});
            } else {
                auto next = cfg_.device.find(ThreadKey{key.gid, key.bid, key.tid + 1});
                if (next != cfg_.device.end() && next->second.barrier.waiting &&
                    next->second.barrier.token == 0)
                    out.push_back(Transition{TransitionKind::BarrierRule, key,
                                             BarrierRuleKind::UpSweep, 0});
            }
        } else {  // token == 2
            if (key.tid == 0) {
                out.push_back(Transition{TransitionKind::BarrierRule, key,
                                         BarrierRuleKind::FinalRelease, 0});
            } else {
                auto prev = cfg_.device.find(ThreadKey{key.gid, key.bid, key.tid - 1});
                if (prev != cfg_.device.end() && prev->second.barrier.waiting &&
                    prev->second.barrier.token == 0)
                    out.push_back(Transition{TransitionKind::BarrierRule, key,
                                             BarrierRuleKind::DownSweep, 0});
            }
        }
    }
}

void Machine::applyBarrierRule(const Transition& t) {
    auto release = [&](ThreadState& th) {
        if (th.k.empty() || th.k.back().op != ItemOp::BarrierWait)
            throw std::logic_error("released a thread not blocked at a barrier");
        th.k.pop_back();
        th.values.push_back(barrierResult(th.barrier));
        th.barrier = BarrierPhase{};
    };

    switch (t.rule) {
        case BarrierRuleKind::UpSweep: {
            ThreadState& a = cfg_.device.at(t.thread);
            ThreadState& b = cfg_.device.at(ThreadKey{t.thread.gid, t.thread.bid, t.thread.tid + 1});
            // the token moves up; the reduction accumulates with it
            b.barrier.token = 1;
            b.barrier.accAll = a.barrier.accAll && (b.barrier.operand != 0 ||
                                                    b.barrier.kind == SyncKind::Plain);
            b.barrier.accAny = a.barrier.accAny || b.barrier.operand != 0;
            b.barrier.accCount = a.barrier.accCount + (b.barrier.operand != 0 ? 1 : 0);
            a.barrier.token = 0;
            trace("sync gid=" + std::to_string(t.thread.gid) + " bid=" +
                  std::to_string(t.thread.bid) + " rule=up tid=" + std::to_string(t.thread.tid + 1) +
                  " token=1");
            break;
        }
        case BarrierRuleKind::Turnaround: {
            ThreadState& a = cfg_.device.at(t.thread);
            a.barrier.token = 2;
            // every thread has arrived; the epoch ends here, before any
            // thread resumes
            clearEpoch(t.thread.gid, t.thread.bid);
            trace("sync gid=" + std::to_string(t.thread.gid) + " bid=" +
                  std::to_string(t.thread.bid) + " rule=turn tid=" + std::to_string(t.thread.tid) +
                  " token=2");
            break;
        }
        case BarrierRuleKind::DownSweep: {
            ThreadState& hi = cfg_.device.at(t.thread);
            ThreadState& lo = cfg_.device.at(ThreadKey{t.thread.gid, t.thread.bid, t.thread.tid - 1});
            lo.barrier.token = 2;
            lo.barrier.accAll = hi.barrier.accAll;
            lo.barrier.accAny = hi.barrier.accAny;
            lo.barrier.accCount = hi.barrier.accCount;
            release(hi);
            trace("sync gid=" + std::to_string(t.thread.gid) + " bid=" +
                  std::to_string(t.thread.bid) + " rule=down tid=" + std::to_string(t.thread.tid) +
                  " token=2");
            break;
        }
        case BarrierRuleKind::FinalRelease: {
            ThreadState& t0 = cfg_.device.at(t.thread);
            release(t0);
            trace("sync gid=" + std::to_string(t.thread.gid) + " bid=" +
                  std::to_string(t.thread.bid) + " rule=release tid=0 token=0");
            break;
        }
    }
}

// Implicit synchronization at the end of a kernel: the grid counts down;
// at zero its shared memory dies and the owning stream may move on.
void Machine::finishThread(ThreadState& th) {
    GridInfo& grid = cfg_.grids.at(th.key.gid);
    --grid.liveThreads;
    if (grid.liveThreads > 0) return;
    grid.completed = true;
    for (ObjectId id : grid.sharedObjs) {
        auto o = cfg_.memory.objects.find(id);
        if (o != cfg_.memory.objects.end()) o->second.live = false;
    }
    auto s = cfg_.streams.find(grid.streamId);
    if (s != cfg_.streams.end() && s->second.running == grid.gid) s->second.running.reset();
    trace("grid gid=" + std::to_string(grid.gid) + " completed");
}

}  // namespace mck
