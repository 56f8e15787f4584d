#include <doctest.h>

#include "minicudak/machine.hpp"

#include "../test_util.hpp"

using namespace mck;

namespace {

const char* kTwoThreadSpin =
    "__global__ void k(int* g) {\n"
    "  int i;\n"
    "  for (i = 0; i != 50; ++i) { g[threadIdx.x] += 1; }\n"
    "}\n"
    "int main(void) {\n"
    "  int* g;\n"
    "  cudaMalloc(&g, 2 * sizeof(int));\n"
    "  cudaMemset(g, 0, 2 * sizeof(int));\n"
    "  k<<<1, 2>>>(g);\n"
    "  cudaDeviceSynchronize();\n"
    "  return 0;\n"
    "}\n";

}  // namespace

TEST_CASE("the initial configuration matches the machine model") {
    Machine m(mcktest::compile(mcktest::slurp(mcktest::corpusPath("sum.cu")), "sum.cu"),
              RunOptions{});
    const Configuration& cfg = m.config();
    CHECK(cfg.nextGid == 1);
    CHECK(cfg.nextSid == 1);
    CHECK(cfg.device.empty());
    CHECK(cfg.grids.empty());
    REQUIRE(cfg.streams.count(0) == 1);  // the default stream always exists
    CHECK(cfg.streams.at(0).q.empty());
    CHECK(!cfg.host.k.empty());
    CHECK(cfg.host.key == ThreadKey{0, 0, 0});
    CHECK(cfg.host.barrier.waiting == false);
}

TEST_CASE("a fresh configuration has exactly one enabled transition") {
    Machine m(mcktest::compile("int main(void){return 0;}"), RunOptions{});
    auto en = m.enabledTransitions();
    REQUIRE(en.size() == 1);
    CHECK(en[0].kind == TransitionKind::HostStep);
}

TEST_CASE("main's return value becomes the exit code") {
    CHECK(mcktest::runSource("int main(void){return 7;}").exitCode == 7);
    CHECK(mcktest::runSource("int main(void){return 0;}").exitCode == 0);
    // falling off the end of main is an implicit return 0
    CHECK(mcktest::runSource("int main(void){}").exitCode == 0);
    CHECK(mcktest::runSource("int main(void){return 7;}").output.empty());
}

TEST_CASE("identical options and seed give identical results") {
    std::string src = mcktest::slurp(mcktest::corpusPath("sum.cu"));
    for (uint64_t seed : {0ull, 1ull, 42ull}) {
        RunOptions o;
        o.seed = seed;
        auto a = mcktest::runSource(src, o, "sum.cu");
        auto b = mcktest::runSource(src, o, "sum.cu");
        CHECK(a.output == b.output);
        CHECK(a.exitCode == b.exitCode);
        CHECK(a.steps == b.steps);
        CHECK(a.diagnostics == b.diagnostics);
    }
}

TEST_CASE("two device threads with a blocked host yield exactly two transitions") {
    Machine m(mcktest::compile(kTwoThreadSpin), RunOptions{});
    // drive until the grid is spawned and the host sits in deviceSynchronize
    for (int guard = 0; guard < 100000; ++guard) {
        auto en = m.enabledTransitions();
        REQUIRE(!en.empty());
        if (m.config().device.size() == 2 && m.config().hostWait == HostWaitKind::Device) {
            bool hostEnabled = false;
            for (const auto& t : en)
                if (t.kind == TransitionKind::HostStep) hostEnabled = true;
            if (!hostEnabled) {
                REQUIRE(en.size() == 2);
                CHECK(en[0].kind == TransitionKind::DeviceStep);
                CHECK(en[1].kind == TransitionKind::DeviceStep);
                CHECK(en[0].thread == ThreadKey{1, 0, 0});
                CHECK(en[1].thread == ThreadKey{1, 0, 1});
                return;
            }
        }
        m.step(m.scheduleNext(en));
    }
    FAIL("never reached the two-thread state");
}

TEST_CASE("each step changes the configuration (no silent self-loops)") {
    Machine m(mcktest::compile(kTwoThreadSpin), RunOptions{});
    int steps = 0;
    while (steps < 2000) {
        auto en = m.enabledTransitions();
        if (en.empty()) break;
        Transition t = m.scheduleNext(en);
        Configuration before = m.config();
        m.step(t);
        ++steps;
        Configuration after = m.config();
        before.steps = after.steps;  // the step counter alone must not carry progress
        CHECK(!(before == after));
    }
    CHECK(steps > 100);
}

TEST_CASE("a step only touches the chosen thread plus shared machinery") {
    Machine m(mcktest::compile(kTwoThreadSpin), RunOptions{});
    RunOptions o;
    int checked = 0;
    for (int guard = 0; guard < 20000; ++guard) {
        auto en = m.enabledTransitions();
        if (en.empty()) break;
        Transition t = m.scheduleNext(en);
        std::map<ThreadKey, ThreadState> before = m.config().device;
        ThreadState hostBefore = m.config().host;
        m.step(t);
        // uninvolved threads must be untouched
        for (const auto& [key, th] : m.config().device) {
            if (t.kind == TransitionKind::DeviceStep && key == t.thread) continue;
            if (t.kind == TransitionKind::BarrierRule &&
                (key == t.thread || (key.gid == t.thread.gid && key.bid == t.thread.bid &&
                                     (key.tid == t.thread.tid + 1 || key.tid == t.thread.tid - 1))))
                continue;
            auto it = before.find(key);
            if (it == before.end()) continue;  // newly spawned
            CHECK(th == it->second);
            ++checked;
        }
        if (t.kind != TransitionKind::HostStep) {
            CHECK(m.config().host == hostBefore);
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("the seeded scheduler picks deterministically") {
    std::string src = kTwoThreadSpin;
    auto runLog = [&](uint64_t seed) {
        RunOptions o;
        o.seed = seed;
        Machine m(mcktest::compile(src), o);
        std::vector<std::string> log;
        while (log.size() < 500) {
            auto en = m.enabledTransitions();
            if (en.empty()) break;
            Transition t = m.scheduleNext(en);
            log.push_back(t.str());
            m.step(t);
        }
        return log;
    };
    CHECK(runLog(1) == runLog(1));
    CHECK(runLog(1) != runLog(2));  // distinct seeds explore different schedules
}

TEST_CASE("round-robin cycles runnable threads in key order") {
    RunOptions o;
    o.policy = SchedulePolicy::RoundRobin;
    Machine m(mcktest::compile(
                  "__global__ void k(int* g) {\n"
                  "  int i;\n"
                  "  for (i = 0; i != 40; ++i) { g[threadIdx.x] += 1; }\n"
                  "}\n"
                  "int main(void) { int* g; cudaMalloc(&g, 12); cudaMemset(g, 0, 12);\n"
                  "  k<<<1, 3>>>(g); cudaDeviceSynchronize(); return 0; }\n"),
              o);
    std::vector<int> deviceSeq;
    for (int guard = 0; guard < 100000 && deviceSeq.size() < 60; ++guard) {
        auto en = m.enabledTransitions();
        REQUIRE(!en.empty());
        Transition t = m.scheduleNext(en);
        bool allThree = m.config().device.size() == 3;
        m.step(t);
        if (t.kind == TransitionKind::DeviceStep && allThree) deviceSeq.push_back(t.thread.tid);
    }
    REQUIRE(deviceSeq.size() >= 60);
    // once all three threads run, picks cycle t0, t1, t2, t0, ...
    for (size_t i = 12; i + 1 < 60; ++i)
        CHECK(deviceSeq[i + 1] == (deviceSeq[i] + 1) % 3);
}

TEST_CASE("the exhaustive policy is rejected outside the oracle explorer") {
    RunOptions o;
    o.policy = SchedulePolicy::Exhaustive;
    Machine m(mcktest::compile(kTwoThreadSpin), o);
    auto en = m.enabledTransitions();
    CHECK_THROWS_AS(m.scheduleNext(en), std::logic_error);
}

TEST_CASE("the step limit aborts runaway programs with a diagnostic") {
    RunOptions o;
    o.stepLimit = 500;
    auto r = mcktest::runSource("int main(void){ while (1) {} return 0; }", o);
    CHECK(r.exitCode == 1);
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].message.find("step limit exceeded") != std::string::npos);
}

TEST_CASE("a stuck configuration has no transitions and triggers the scanner") {
    // one thread of the pair never reaches the barrier
    auto r = mcktest::runSource(
        "__global__ void k(void) { if (threadIdx.x == 0) { __syncthreads(); } }\n"
        "int main(void) { k<<<1, 2>>>(); cudaDeviceSynchronize(); return 0; }\n");
    CHECK(r.stuck);
    CHECK(r.exitCode == 3);
    REQUIRE(!r.stuckReports.empty());
    CHECK(r.stuckReports[0].kind == StuckReport::Kind::BarrierDeadlock);
}

TEST_CASE("effect sequence of a shared-array store matches the hand trace") {
    // one thread: shared[tid] = in[bid * bdim + tid];
    RunOptions o;
    Machine m(mcktest::compile(
                  "__global__ void k(int* in) {\n"
                  "  extern __shared__ int s[];\n"
                  "  s[threadIdx.x] = in[blockIdx.x * blockDim.x + threadIdx.x];\n"
                  "}\n"
                  "int main(void) { int* d; cudaMalloc(&d, 4); cudaMemset(d, 9, 4);\n"
                  "  k<<<1, 1, 4>>>(d); cudaDeviceSynchronize(); return 0; }\n"),
              o);
    struct Eff {
        SpaceKind space;
        AccessKind kind;
    };
    std::vector<Eff> deviceEffects;
    std::vector<uint64_t> stepOfEffect;
    m.onMemAccess = [&](const MemAccessInfo& a) {
        if (a.accessor.isHost()) return;
        deviceEffects.push_back({a.space.kind, a.kind});
        stepOfEffect.push_back(m.config().steps);
    };
    while (!m.enabledTransitions().empty()) m.step(m.scheduleNext(m.enabledTransitions()));

    // reads of the index operands and the source element, then the shared write
    REQUIRE(deviceEffects.size() == 3);
    CHECK(deviceEffects[0].space == SpaceKind::DeviceGlobal);   // read of param 'in'
    CHECK(deviceEffects[0].kind == AccessKind::Read);
    CHECK(deviceEffects[1].space == SpaceKind::DeviceGlobal);   // read of in[...]
    CHECK(deviceEffects[1].kind == AccessKind::Read);
    CHECK(deviceEffects[2].space == SpaceKind::DeviceShared);   // the store
    CHECK(deviceEffects[2].kind == AccessKind::Write);
    // each memory access is its own step
    for (size_t i = 0; i + 1 < stepOfEffect.size(); ++i)
        CHECK(stepOfEffect[i] < stepOfEffect[i + 1]);
}
