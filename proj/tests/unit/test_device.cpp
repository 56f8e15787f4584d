#include <doctest.h>

#include <set>

#include "minicudak/machine.hpp"

#include "../test_util.hpp"

using namespace mck;

namespace {

// Drives the machine until pred holds or nothing is enabled.
template <typename Pred>
bool driveUntil(Machine& m, Pred pred, int guard = 2000000) {
    while (guard-- > 0) {
        if (pred()) return true;
        auto en = m.enabledTransitions();
        if (en.empty()) return pred();
        m.step(m.scheduleNext(en));
    }
    return false;
}

std::string barrierKernel(int blocks, int threads, const char* body) {
    return "__global__ void k(int* g) {\n" + std::string(body) +
           "}\n"
           "int main(void) { int* g; cudaMalloc(&g, 4096); cudaMemset(g, 0, 4096);\n"
           "  k<<<" +
           std::to_string(blocks) + ", " + std::to_string(threads) +
           ">>>(g); cudaDeviceSynchronize(); return 0; }\n";
}

}  // namespace

TEST_CASE("a launch enqueues; the spawn happens at dispatch") {
    std::string src = mcktest::slurp(mcktest::corpusPath("sum.cu"));
    Machine m(mcktest::compile(src, "sum.cu"), RunOptions{});

    // run host steps only, so stream 0 queues without dispatching
    auto hostOnly = [&]() -> bool {
        auto en = m.enabledTransitions();
        for (const auto& t : en)
            if (t.kind == TransitionKind::HostStep) {
                m.step(t);
                return true;
            }
        return false;
    };
    int guard = 100000;
    while (guard-- > 0 && m.config().streams.at(0).q.size() < 2 && hostOnly()) {
    }
    const Stream& s0 = m.config().streams.at(0);
    REQUIRE(s0.q.size() == 2);
    CHECK(m.config().device.empty());  // launches are asynchronous: nothing spawned yet
    CHECK(m.config().nextGid == 1);

    const StreamItem& first = s0.q[0];
    REQUIRE(first.kind == StreamItemKind::KernelLaunch);
    CHECK(first.launch.gridDim == 2);
    CHECK(first.launch.blockDim == 9);
    CHECK(first.launch.shmemBytes == 36);
    CHECK(first.launch.stream == 0);
    const StreamItem& second = s0.q[1];
    CHECK(second.launch.gridDim == 1);
    CHECK(second.launch.blockDim == 2);
    CHECK(second.launch.shmemBytes == 8);
}

TEST_CASE("spawning the figure kernel creates 18 threads and 2 shared arrays") {
    std::string src = mcktest::slurp(mcktest::corpusPath("sum.cu"));
    Machine m(mcktest::compile(src, "sum.cu"), RunOptions{});
    REQUIRE(driveUntil(m, [&] { return !m.config().grids.empty(); }));

    const GridInfo& g = m.config().grids.at(1);
    CHECK(m.config().nextGid == 2);  // incremented at the launch
    CHECK(g.gridDim == 2);
    CHECK(g.blockDim == 9);
    CHECK(g.liveThreads == 18);
    CHECK(m.config().device.size() == 18);
    REQUIRE(g.sharedObjs.size() == 2);
    std::set<ObjectId> distinct(g.sharedObjs.begin(), g.sharedObjs.end());
    CHECK(distinct.size() == 2);
    for (ObjectId id : g.sharedObjs) {
        const MemObject& obj = m.config().memory.objects.at(id);
        CHECK(obj.size == 36);
        CHECK(obj.space.kind == SpaceKind::DeviceShared);
        CHECK(obj.space.gid == 1);
    }
    CHECK(m.config().grids.at(1).sharedObjs[0] != m.config().grids.at(1).sharedObjs[1]);
}

TEST_CASE("grids get distinct ids and shared memory does not leak across grids") {
    std::string src = mcktest::slurp(mcktest::corpusPath("sum.cu"));
    Machine m(mcktest::compile(src, "sum.cu"), RunOptions{});
    REQUIRE(driveUntil(m, [&] { return m.config().grids.size() == 2; }));
    REQUIRE(m.config().grids.count(1) == 1);
    REQUIRE(m.config().grids.count(2) == 1);
    std::set<ObjectId> first(m.config().grids.at(1).sharedObjs.begin(),
                             m.config().grids.at(1).sharedObjs.end());
    for (ObjectId id : m.config().grids.at(2).sharedObjs) CHECK(first.count(id) == 0);
    // grid 1's shared objects are dead once it completed
    CHECK(m.config().grids.at(1).completed);
    for (ObjectId id : m.config().grids.at(1).sharedObjs)
        CHECK(!m.config().memory.objects.at(id).live);
}

TEST_CASE("device builtins take their values from the thread and grid") {
    Machine m(mcktest::compile(barrierKernel(2, 9, "  g[0] = 0;\n")), RunOptions{});
    REQUIRE(driveUntil(m, [&] { return !m.config().device.empty(); }));
    const ThreadState& th = m.config().device.at(ThreadKey{1, 1, 4});
    CHECK(m.builtinValue(BuiltinVar::ThreadIdx, 0, th).i == 4);
    CHECK(m.builtinValue(BuiltinVar::BlockIdx, 0, th).i == 1);
    CHECK(m.builtinValue(BuiltinVar::BlockDim, 0, th).i == 9);
    CHECK(m.builtinValue(BuiltinVar::GridDim, 0, th).i == 2);
    // 1-D model: .y/.z components read as 0 for indices and 1 for dims
    CHECK(m.builtinValue(BuiltinVar::ThreadIdx, 1, th).i == 0);
    CHECK(m.builtinValue(BuiltinVar::ThreadIdx, 2, th).i == 0);
    CHECK(m.builtinValue(BuiltinVar::BlockIdx, 1, th).i == 0);
    CHECK(m.builtinValue(BuiltinVar::BlockDim, 1, th).i == 1);
    CHECK(m.builtinValue(BuiltinVar::GridDim, 2, th).i == 1);
    CHECK(m.builtinValue(BuiltinVar::WarpSize, 0, th).i == 32);
}

TEST_CASE("barrier arrival assigns the token to thread 0 only") {
    Machine m(mcktest::compile(barrierKernel(1, 4, "  __syncthreads();\n  g[threadIdx.x] = 1;\n")),
              RunOptions{});
    // defer all protocol moves so arrival tokens stay untouched
    auto allWaiting = [&] {
        if (m.config().device.size() != 4) return false;
        for (const auto& [k, th] : m.config().device)
            if (!th.barrier.waiting) return false;
        return true;
    };
    int guard = 200000;
    while (guard-- > 0 && !allWaiting()) {
        auto en = m.enabledTransitions();
        bool stepped = false;
        for (const Transition& t : en)
            if (t.kind != TransitionKind::BarrierRule) {
                m.step(t);
                stepped = true;
                break;
            }
        REQUIRE(stepped);
    }
    REQUIRE(allWaiting());
    for (const auto& [key, th] : m.config().device) {
        CHECK(th.barrier.token == (key.tid == 0 ? 1 : 0));
        CHECK(!th.k.empty());
        CHECK(th.k.back().op == ItemOp::BarrierWait);
    }
}

TEST_CASE("in a single-thread block the arrival token is immediately turnaround-eligible") {
    Machine m(mcktest::compile(barrierKernel(1, 1, "  __syncthreads();\n  g[0] = 1;\n")),
              RunOptions{});
    int guard = 200000;
    while (guard-- > 0) {
        auto en = m.enabledTransitions();
        REQUIRE(!en.empty());
        bool protocolReady = false;
        for (const Transition& t : en)
            if (t.kind == TransitionKind::BarrierRule) {
                CHECK(t.rule == BarrierRuleKind::Turnaround);
                protocolReady = true;
            }
        if (protocolReady) break;
        bool stepped = false;
        for (const Transition& t : en)
            if (t.kind != TransitionKind::BarrierRule) {
                m.step(t);
                stepped = true;
                break;
            }
        REQUIRE(stepped);
    }
    const ThreadState& t0 = m.config().device.at(ThreadKey{1, 0, 0});
    CHECK(t0.barrier.waiting);
    CHECK(t0.barrier.token == 1);
}

TEST_CASE("a completed barrier episode takes exactly 2*NThrds protocol transitions") {
    for (int nthrds : {1, 2, 3, 9}) {
        CAPTURE(nthrds);
        RunOptions o;
        o.seed = 11;
        Machine m(mcktest::compile(barrierKernel(1, nthrds,
                                                 "  __syncthreads();\n  g[threadIdx.x] = 1;\n")),
                  o);
        int rules = 0;
        std::map<BarrierRuleKind, int> byRule;
        m.onStep = [&](Machine&, const Transition& t) {
            if (t.kind == TransitionKind::BarrierRule) {
                ++rules;
                ++byRule[t.rule];
            }
        };
        while (!m.enabledTransitions().empty()) m.step(m.scheduleNext(m.enabledTransitions()));
        CHECK(m.normalTermination());
        CHECK(rules == 2 * nthrds);
        CHECK(byRule[BarrierRuleKind::UpSweep] == nthrds - 1);
        CHECK(byRule[BarrierRuleKind::Turnaround] == 1);
        CHECK(byRule[BarrierRuleKind::DownSweep] == nthrds - 1);
        CHECK(byRule[BarrierRuleKind::FinalRelease] == 1);
    }
}

TEST_CASE("token uniqueness holds at every configuration") {
    RunOptions o;
    o.seed = 3;
    Machine m(mcktest::compile(barrierKernel(
                  2, 5, "  __syncthreads();\n  g[threadIdx.x] += 1;\n  __syncthreads();\n")),
              o);
    m.onStep = [&](Machine& mm, const Transition&) {
        std::map<std::pair<GridId, int>, int> nonzero;
        for (const auto& [key, th] : mm.config().device)
            if (th.barrier.waiting && th.barrier.token != 0)
                ++nonzero[{key.gid, key.bid}];
        for (const auto& [block, n] : nonzero) CHECK(n <= 1);
    };
    while (!m.enabledTransitions().empty()) m.step(m.scheduleNext(m.enabledTransitions()));
    CHECK(m.normalTermination());
}

TEST_CASE("syncthreads_count broadcasts the number of true predicates") {
    // brute force over tid in {0,1}: exactly one thread has tid == 0
    auto r = mcktest::runSource(
        "__global__ void k(int* g) { g[threadIdx.x] = __syncthreads_count(threadIdx.x == 0); }\n"
        "int main(void) { int i, *g, h[2]; cudaMalloc(&g, 8);\n"
        "  k<<<1, 2>>>(g);\n"
        "  cudaMemcpy(h, g, 8, cudaMemcpyDeviceToHost);\n"
        "  printf(\"%d %d\\n\", h[0], h[1]);\n"
        "  cudaFree(g); return 0; }\n");
    CHECK(r.exitCode == 0);
    CHECK(r.output == "1 1\n");
}

TEST_CASE("a barrier missed by one thread leaves the protocol unmatched") {
    auto r = mcktest::runSource(barrierKernel(
        1, 9, "  if (threadIdx.x != 3) { __syncthreads(); }\n  g[threadIdx.x] = 1;\n"));
    CHECK(r.stuck);
    CHECK(r.exitCode == 3);
    bool sawDeadlockMessage = false;
    for (const auto& d : r.diagnostics)
        if (d.message == "Detected a deadlock caused by misplaced __syncthreads().")
            sawDeadlockMessage = true;
    CHECK(sawDeadlockMessage);
}

TEST_CASE("thread completion counts down once per thread") {
    Machine m(mcktest::compile(mcktest::slurp(mcktest::corpusPath("sum.cu")), "sum.cu"),
              RunOptions{});
    std::vector<int64_t> liveSeq;
    m.onStep = [&](Machine& mm, const Transition&) {
        auto g = mm.config().grids.find(1);
        if (g != mm.config().grids.end()) {
            if (liveSeq.empty() || liveSeq.back() != g->second.liveThreads)
                liveSeq.push_back(g->second.liveThreads);
        }
    };
    while (!m.enabledTransitions().empty()) m.step(m.scheduleNext(m.enabledTransitions()));
    // 18, 17, ..., 0: one decrement per finishing thread, one completion
    REQUIRE(liveSeq.size() == 19);
    for (size_t i = 0; i < liveSeq.size(); ++i)
        CHECK(liveSeq[i] == 18 - static_cast<int64_t>(i));
}

TEST_CASE("a degenerate launch of one thread and zero shared bytes works") {
    auto r = mcktest::runSource(
        "__global__ void k(int* g) { extern __shared__ int s[]; g[0] = 5; }\n"
        "int main(void) { int *g, h; cudaMalloc(&g, 4); k<<<1, 1>>>(g);\n"
        "  cudaMemcpy(&h, g, 4, cudaMemcpyDeviceToHost); printf(\"%d\\n\", h);\n"
        "  return 0; }\n");
    CHECK(r.exitCode == 0);
    CHECK(r.output == "5\n");
}

TEST_CASE("any access to a zero-byte shared array is out of bounds") {
    auto r = mcktest::runSource(
        "__global__ void k(void) { extern __shared__ int s[]; s[0] = 1; }\n"
        "int main(void) { k<<<1, 1>>>(); cudaDeviceSynchronize(); return 0; }\n");
    CHECK(r.exitCode == 1);
    REQUIRE(!r.diagnostics.empty());
    CHECK(r.diagnostics[0].message.find("out-of-bounds") != std::string::npos);
}

TEST_CASE("launch configurations are validated") {
    auto r = mcktest::runSource(
        "__global__ void k(void) {}\n"
        "int main(void) { k<<<0, 1>>>(); cudaDeviceSynchronize(); return 0; }\n");
    CHECK(r.exitCode == 1);
    CHECK(mcktest::hasCategory(r, DiagCategory::ApiError));
}
