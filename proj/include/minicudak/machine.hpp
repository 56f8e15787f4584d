#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "minicudak/diagnostics.hpp"
#include "minicudak/program.hpp"
#include "minicudak/value.hpp"

namespace mck {

using GridId = uint32_t;
using StreamId = uint32_t;
using EventId = uint32_t;

// ----- memory store -----

enum class SpaceKind { Host, DeviceGlobal, DeviceShared };

struct MemSpace {
    SpaceKind kind = SpaceKind::Host;
    GridId gid = 0;  // DeviceShared only
    int bid = 0;

    static MemSpace host() { return {SpaceKind::Host, 0, 0}; }
    static MemSpace deviceGlobal() { return {SpaceKind::DeviceGlobal, 0, 0}; }
    static MemSpace deviceShared(GridId g, int b) { return {SpaceKind::DeviceShared, g, b}; }
    std::string str() const;
    bool operator==(const MemSpace&) const = default;
};

struct MemByte {
    uint8_t v = 0;
    bool defined = false;
    bool operator==(const MemByte&) const = default;
};

struct MemObject {
    ObjectId id = 0;
    MemSpace space;
    int64_t size = 0;
    std::vector<MemByte> bytes;
    bool live = true;
    std::map<int64_t, Location> ptrs;  // symbolic pointers stored at 8-byte slots
    std::string name;                  // variable name or allocation origin

    bool operator==(const MemObject&) const = default;
};

struct MemStore {
    std::map<ObjectId, MemObject> objects;
    ObjectId next = 1;

    bool operator==(const MemStore&) const = default;
};

// Who performs a memory access. Derived from the executing thread.
struct ThreadKey {
    GridId gid = 0;  // 0 = host
    int bid = 0;
    int tid = 0;

    bool isHost() const { return gid == 0; }
    auto operator<=>(const ThreadKey&) const = default;
    std::string str() const;
};

enum class AccessKind { Read, Write };

// ----- race shadow state -----

struct AccessEntry {
    ThreadKey thread;
    AccessKind kind = AccessKind::Read;
    SourceLoc loc;
    bool operator==(const AccessEntry&) const = default;
};

struct RaceState {
    bool enabled = true;
    // per-byte access tuples, DeviceShared objects only
    std::map<std::pair<ObjectId, int64_t>, std::vector<AccessEntry>> shadow;
    // one report per (object, byte, source line)
    std::set<std::tuple<ObjectId, int64_t, int>> reported;

    bool operator==(const RaceState&) const = default;
};

// ----- device grids and barrier protocol -----

struct BarrierPhase {
    bool waiting = false;
    int token = 0;  // 0 arrived, 1 up-sweep, 2 down-sweep release
    SyncKind kind = SyncKind::Plain;
    int64_t operand = 0;
    // reduction accumulator, carried with the token
    bool accAll = true;
    bool accAny = false;
    int64_t accCount = 0;

    bool operator==(const BarrierPhase&) const = default;
};

struct GridInfo {
    GridId gid = 0;
    int64_t gridDim = 1;
    int64_t blockDim = 1;   // the protocol's NThrds
    int64_t shmemBytes = 0;
    StreamId streamId = 0;
    int kernelIndex = -1;
    int64_t liveThreads = 0;
    bool completed = false;
    std::vector<ObjectId> sharedObjs;  // one per block

    bool operator==(const GridInfo&) const = default;
};

// ----- streams and events -----

struct LaunchSpec {
    int64_t gridDim = 1;
    int64_t blockDim = 1;
    int64_t shmemBytes = 0;
    StreamId stream = 0;
    int kernelIndex = -1;
    std::vector<Value> args;
    SourceLoc loc;
    bool operator==(const LaunchSpec&) const = default;
};

enum class StreamItemKind { KernelLaunch, MemcpyAsync, EventRecord, WaitEvent };

struct MemcpyArgs {
    Location dst;
    Location src;
    int64_t n = 0;
    int dirCode = 0;
    SourceLoc loc;
    bool operator==(const MemcpyArgs&) const = default;
};

struct StreamItem {
    StreamItemKind kind = StreamItemKind::KernelLaunch;
    LaunchSpec launch;
    MemcpyArgs copy;
    EventId eid = 0;
    bool operator==(const StreamItem&) const = default;
};

struct Stream {
    StreamId sid = 0;
    std::deque<StreamItem> q;
    std::optional<GridId> running;
    bool destroyed = false;

    bool idle() const { return q.empty() && !running.has_value(); }
    bool operator==(const Stream&) const = default;
};

enum class EventStatus { Created, Pending, Recorded };

struct Event {
    EventId eid = 0;
    EventStatus status = EventStatus::Created;
    StreamId sid = 0;  // recording stream while Pending
    bool operator==(const Event&) const = default;
};

// ----- continuations -----

enum class ItemOp {
    Stmt,          // execute stmt (expands)
    Expr,          // evaluate expr (expands / pushes value)
    PopValue,
    PopScope,
    LoadRV,        // pop LValue, read memory, push value (arrays decay)
    LoadKeepLV,    // pop LValue, read, push LValue then value
    StoreAssign,   // pop value+LValue, convert, write, push stored value
    StoreCompound, // pop rhs+old+LValue, apply op, write, push result
    StoreIncDec,   // pop old+LValue, +/-1, write, push old or new
    AddrOf,        // pop LValue, push pointer
    Deref,         // pop pointer, push LValue
    IndexOp,       // pop index+pointer, push LValue
    UnaryOp,
    BinaryOp,
    LogicalRHS,    // pop lhs; short-circuit or evaluate rhs
    Boolify,       // pop value, push 0/1
    TernarySel,    // pop cond, queue chosen branch
    CastOp,
    IfJudge,
    WhileJudge,
    ForJudge,
    LoopFrame,     // marker for break/continue
    ReturnUnwind,  // a=1 when a value was computed
    CallFrame,     // a=saved scope depth, b=saved value depth
    Invoke,        // pop args, enter callee / builtin
    LaunchExec,    // pop config+args, enqueue kernel launch
    DeclStep,      // a=declarator index
    InitStore,     // a=declarator index; pop value, write into fresh object
    BarrierWait,   // blocks the thread until the protocol releases it
    ApiAwait,      // host blocked in a synchronizing API call; a=result code
};

struct Item {
    ItemOp op = ItemOp::Stmt;
    const Stmt* stmt = nullptr;
    const Expr* expr = nullptr;
    int a = 0;
    int b = 0;
    bool operator==(const Item&) const = default;
};

struct Scope {
    std::vector<std::pair<int, Location>> binds;  // symId -> location
    std::vector<ObjectId> owned;                  // objects that die with the scope
    bool operator==(const Scope&) const = default;
};

struct ThreadState {
    ThreadKey key;
    std::vector<Item> k;       // continuation, back() is the head
    std::vector<Value> values; // operand stack
    std::vector<Scope> scopes;
    BarrierPhase barrier;
    bool halted = false;

    bool operator==(const ThreadState&) const = default;
};

// ----- whole-machine configuration -----

enum class HostWaitKind { None, Device, Stream, Event };

struct OracleEvent {
    bool isEpoch = false;  // epoch boundary (barrier) vs access
    ThreadKey thread;
    ObjectId object = 0;
    int64_t offset = 0;
    int64_t len = 0;
    AccessKind kind = AccessKind::Read;
    GridId gid = 0;  // epoch marker
    int bid = 0;
    bool operator==(const OracleEvent&) const = default;
};

struct Configuration {
    ThreadState host;
    std::map<ThreadKey, ThreadState> device;
    GridId nextGid = 1;
    std::map<GridId, GridInfo> grids;
    StreamId nextSid = 1;
    std::map<StreamId, Stream> streams;
    EventId nextEid = 1;
    std::map<EventId, Event> events;
    MemStore memory;
    RaceState race;
    std::string output;
    std::vector<Diagnostic> diagnostics;
    std::mt19937_64 rng;
    HostWaitKind hostWait = HostWaitKind::None;
    uint32_t hostWaitId = 0;
    std::optional<int64_t> exitValue;
    uint64_t steps = 0;
    std::vector<Location> globalLocs;  // per TranslationUnit global
    int lastApiError = 0;              // latched by cudaGetLastError

    // exhaustive-oracle bookkeeping
    bool oracleMode = false;
    std::vector<OracleEvent> oracleTrace;

    bool operator==(const Configuration&) const = default;
};

// ----- transitions -----

enum class TransitionKind { HostStep, DeviceStep, BarrierRule, StreamDispatch };
enum class BarrierRuleKind { UpSweep, Turnaround, DownSweep, FinalRelease };

struct Transition {
    TransitionKind kind = TransitionKind::HostStep;
    ThreadKey thread;           // DeviceStep / BarrierRule
    BarrierRuleKind rule = BarrierRuleKind::UpSweep;
    StreamId sid = 0;           // StreamDispatch

    auto operator<=>(const Transition&) const = default;
    std::string str() const;
};

// ----- run options / results -----

enum class SchedulePolicy { SeededRandom, RoundRobin, Exhaustive };

struct ArchParams {
    int64_t warpSize = 32;
    int64_t computeCapabilityMajor = 2;
    int64_t computeCapabilityMinor = 0;
    int64_t maxThreadsPerBlock = 1024;
    int64_t driverVersion = 4000;
    int64_t runtimeVersion = 4000;
};

struct RunOptions {
    SchedulePolicy policy = SchedulePolicy::SeededRandom;
    uint64_t seed = 0;
    bool raceCheck = true;
    uint64_t stepLimit = 50'000'000;
    bool trace = false;
    ArchParams arch;
};

struct StuckReport {
    enum class Kind { BarrierDeadlock, HostHang, StreamStall };
    Kind kind = Kind::BarrierDeadlock;
    GridId gid = 0;
    int bid = 0;
    std::vector<int> waitingTids;
    std::vector<int> missingTids;  // block peers that already finished
    std::string reason;            // HostHang
    StreamId sid = 0;              // StreamStall
    std::string item;
};

struct RunResult {
    int exitCode = 0;
    std::string output;
    std::vector<Diagnostic> diagnostics;
    bool stuck = false;
    std::vector<StuckReport> stuckReports;
    uint64_t steps = 0;
    std::optional<int64_t> mainReturn;
};

// Observer record for the test-build memory audit log.
struct MemAccessInfo {
    ThreadKey accessor;
    AccessKind kind = AccessKind::Read;
    ObjectId object = 0;
    MemSpace space;
    int64_t offset = 0;
    int64_t len = 0;
    bool allowed = true;
    SourceLoc loc;
};

// ----- the interpreter -----

// Small-step interpreter over an explicit Configuration. All mutation
// happens inside step(); the configuration is a value and may be copied
// freely (the exhaustive explorer swaps copies in and out).
class Machine {
public:
    Machine(std::shared_ptr<const Program> prog, RunOptions opts);

    const Program& program() const { return *prog_; }
    const RunOptions& options() const { return opts_; }
    Configuration& config() { return cfg_; }
    const Configuration& config() const { return cfg_; }

    // Builds the initial configuration: globals allocated, host thread
    // holding main's body, stream 0 empty.
    void reset();

    std::vector<Transition> enabledTransitions() const;
    void step(const Transition& t);
    Transition scheduleNext(const std::vector<Transition>& enabled);

    // Runs to completion (or stuck / step limit) and computes the exit code.
    RunResult run();

    // Stuck-state classification of the current (frozen) configuration.
    std::vector<StuckReport> scanStuck() const;

    bool normalTermination() const;

    // hooks (tests, tracing, CLI output streaming); never part of the
    // configuration
    std::function<void(Machine&, const Transition&)> onStep;
    std::function<void(const MemAccessInfo&)> onMemAccess;
    std::function<void(ApiId, int)> onApiCall;
    std::function<void(const std::string&)> onTrace;
    std::function<void(const std::string&)> onOutput;

    // ---- internals shared between the module implementation files ----

    void addDiagnostic(Severity sev, DiagCategory cat, const std::string& msg, SourceLoc loc);
    std::string atLoc(SourceLoc loc) const;  // " at file:line."
    void trace(const std::string& line);

    // memory (memory.cpp)
    Location allocObject(MemSpace space, int64_t size, const std::string& name);
    bool freeObject(Location loc, MemSpace expected, SourceLoc callLoc);
    bool checkAccess(const MemObject& obj, ThreadKey accessor, AccessKind kind, SourceLoc loc);
    std::optional<Value> readMem(Location loc, CType type, ThreadKey accessor, SourceLoc sloc);
    bool writeMem(Location loc, CType type, const Value& v, ThreadKey accessor, SourceLoc sloc);
    bool memcpyBytes(Location dst, Location src, int64_t n, SourceLoc loc);
    void pokeValue(MemObject& obj, int64_t off, CType type, const Value& v);  // unchecked
    std::string dumpStore() const;

    // race checker (racecheck.cpp)
    void recordAccess(const MemObject& obj, int64_t off, int64_t len, ThreadKey thread,
                      AccessKind kind, SourceLoc loc);
    void clearEpoch(GridId gid, int bid);

    // device (device.cpp)
    void enqueueLaunch(LaunchSpec spec);
    GridId spawnGrid(const LaunchSpec& spec);
    Value builtinValue(BuiltinVar var, int comp, const ThreadState& th);
    void barrierArrive(ThreadState& th, SyncKind kind, int64_t operand);
    void applyBarrierRule(const Transition& t);
    void finishThread(ThreadState& th);
    void enumerateBarrierRules(std::vector<Transition>& out) const;

    // streams (streams.cpp)
    StreamId streamCreate();
    bool enqueue(StreamId sid, StreamItem item, SourceLoc loc);
    bool streamDispatchable(const Stream& s) const;
    void dispatchStream(StreamId sid);
    bool hostWaitSatisfied() const;
    void performCopy(const MemcpyArgs& m);

    // runtime api (runtime_api.cpp)
    void invokeApi(ThreadState& th, const Expr* call, std::vector<Value> args);

    // execution engine (machine.cpp)
    void execThreadStep(ThreadState& th);
    ThreadState* threadFor(const Transition& t);
    void haltThread(ThreadState& th);
    CType returnTypeOfFrame(const Item& frame, const ThreadState& th) const;
    void execPrintf(ThreadState& th, const Expr* call, const std::vector<Value>& args);

private:
    std::shared_ptr<const Program> prog_;
    RunOptions opts_;
    Configuration cfg_;
    Transition rrLast_{};
    bool rrValid_ = false;

    void allocGlobals();
};

// Formats one final-configuration report (used for the stuck-report file).
std::string formatStuckReports(const std::vector<StuckReport>& reports);
std::string dumpConfiguration(const Machine& m);

}  // namespace mck
