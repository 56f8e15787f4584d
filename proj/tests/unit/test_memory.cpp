#include <doctest.h>

#include <random>

#include "minicudak/machine.hpp"

#include "../test_util.hpp"

using namespace mck;

namespace {

// A machine over a trivial program, used as a raw store harness.
Machine storeHarness() {
    return Machine(mcktest::compile("int main(void){return 0;}"), RunOptions{});
}

const ThreadKey kHost{0, 0, 0};
const ThreadKey kDev{1, 0, 0};

}  // namespace

TEST_CASE("allocation yields fresh undefined objects") {
    Machine m = storeHarness();
    Location a = m.allocObject(MemSpace::deviceGlobal(), 72, "dev_in");
    Location b = m.allocObject(MemSpace::host(), 1, "x");
    CHECK(a.object != b.object);
    CHECK(a.offset == 0);
    const MemObject& oa = m.config().memory.objects.at(a.object);
    CHECK(oa.size == 72);
    for (const MemByte& by : oa.bytes) CHECK(!by.defined);
}

TEST_CASE("read returns what write stored, for every scalar type") {
    Machine m = storeHarness();
    Location obj = m.allocObject(MemSpace::host(), 64, "buf");
    std::mt19937_64 rng(7);

    std::vector<CType> types = {
        {BaseType::Char, 0, -1}, {BaseType::Int, 0, -1},  {BaseType::UInt, 0, -1},
        {BaseType::Long, 0, -1}, {BaseType::Float, 0, -1}, {BaseType::Double, 0, -1},
        {BaseType::Int, 1, -1},
    };
    for (const CType& t : types) {
        CAPTURE(t.str());
        for (int trial = 0; trial < 50; ++trial) {
            int64_t off = static_cast<int64_t>(rng() % (64 - t.scalarSize() + 1));
            Location loc{obj.object, off};
            Value v;
            if (t.ptr > 0) {
                v = Value::ptrV(Location{obj.object, static_cast<int64_t>(rng() % 64)}, t);
            } else if (t.isFloating()) {
                double d = static_cast<double>(static_cast<int64_t>(rng())) / 3.0;
                if (t.base == BaseType::Float) d = static_cast<float>(d);
                v = Value::floatV(d, t);
            } else {
                int64_t raw = static_cast<int64_t>(rng());
                switch (t.base) {
                    case BaseType::Char: raw = static_cast<int8_t>(raw); break;
                    case BaseType::Int: raw = static_cast<int32_t>(raw); break;
                    case BaseType::UInt: raw = static_cast<uint32_t>(raw); break;
                    default: break;
                }
                v = Value::intV(raw, t);
            }
            REQUIRE(m.writeMem(loc, t, v, kHost, {1, 1}));
            auto back = m.readMem(loc, t, kHost, {1, 1});
            REQUIRE(back.has_value());
            if (t.ptr > 0) {
                CHECK(back->p == v.p);
            } else if (t.isFloating()) {
                CHECK(back->f == v.f);
            } else {
                CHECK(back->i == v.i);
            }
        }
    }
    CHECK(m.config().diagnostics.empty());
}

TEST_CASE("out-of-bounds accesses are diagnosed and refused") {
    Machine m = storeHarness();
    Location obj = m.allocObject(MemSpace::host(), 4, "buf");
    CType i32{BaseType::Int, 0, -1};

    // one-past-the-end read
    CHECK(!m.readMem({obj.object, 4}, i32, kHost, {3, 1}).has_value());
    // write straddling the end
    CHECK(!m.writeMem({obj.object, 2}, i32, Value::intV(1), kHost, {4, 1}));
    REQUIRE(m.config().diagnostics.size() == 2);
    for (const auto& d : m.config().diagnostics) {
        CHECK(d.category == DiagCategory::UndefinedBehavior);
        CHECK(d.message.find("out-of-bounds") != std::string::npos);
    }
}

TEST_CASE("uninitialized reads are diagnosed but continue") {
    Machine m = storeHarness();
    Location obj = m.allocObject(MemSpace::host(), 4, "buf");
    auto v = m.readMem(obj, CType{BaseType::Int, 0, -1}, kHost, {5, 1});
    REQUIRE(v.has_value());
    CHECK(v->i == 0);
    REQUIRE(m.config().diagnostics.size() == 1);
    CHECK(m.config().diagnostics[0].message.find("uninitialized") != std::string::npos);
}

TEST_CASE("dead objects refuse access") {
    Machine m = storeHarness();
    Location obj = m.allocObject(MemSpace::deviceGlobal(), 8, "dev");
    CHECK(m.freeObject(obj, MemSpace::deviceGlobal(), {6, 1}));
    CHECK(!m.readMem(obj, CType{BaseType::Int, 0, -1}, kDev, {7, 1}).has_value());
    CHECK(mcktest::hasCategory(RunResult{0, "", m.config().diagnostics, false, {}, 0, {}},
                               DiagCategory::UndefinedBehavior));
}

TEST_CASE("free validates space, liveness and the base pointer") {
    Machine m = storeHarness();
    Location dev = m.allocObject(MemSpace::deviceGlobal(), 8, "dev");
    Location host = m.allocObject(MemSpace::host(), 8, "h");

    CHECK(!m.freeObject(host, MemSpace::deviceGlobal(), {1, 1}));   // space mismatch
    CHECK(!m.freeObject({dev.object, 4}, MemSpace::deviceGlobal(), {2, 1}));  // interior
    CHECK(m.freeObject(dev, MemSpace::deviceGlobal(), {3, 1}));
    CHECK(!m.freeObject(dev, MemSpace::deviceGlobal(), {4, 1}));    // double free
    int apiErrors = 0;
    for (const auto& d : m.config().diagnostics)
        if (d.category == DiagCategory::ApiError) ++apiErrors;
    CHECK(apiErrors == 3);
}

TEST_CASE("the access legality matrix") {
    Machine m = storeHarness();
    Location h = m.allocObject(MemSpace::host(), 4, "h");
    Location g = m.allocObject(MemSpace::deviceGlobal(), 4, "g");
    Location s10 = m.allocObject(MemSpace::deviceShared(1, 0), 4, "s");
    Location s11 = m.allocObject(MemSpace::deviceShared(1, 1), 4, "s");
    Location s20 = m.allocObject(MemSpace::deviceShared(2, 0), 4, "s");

    auto allowed = [&](Location loc, ThreadKey who) {
        return m.checkAccess(m.config().memory.objects.at(loc.object), who, AccessKind::Read,
                             {1, 1});
    };

    CHECK(allowed(h, kHost));
    CHECK(!allowed(g, kHost));
    CHECK(!allowed(s10, kHost));
    CHECK(!allowed(h, kDev));
    CHECK(allowed(g, kDev));
    CHECK(allowed(s10, ThreadKey{1, 0, 2}));   // own block
    CHECK(!allowed(s11, ThreadKey{1, 0, 2}));  // sibling block
    CHECK(!allowed(s20, ThreadKey{1, 0, 2}));  // other grid
    for (const auto& d : m.config().diagnostics) {
        CHECK(d.category == DiagCategory::MemBoundary);
        CHECK(d.message.find("Illegal device or host memory access") == 0);
    }
}

TEST_CASE("byte transfers carry definedness exactly") {
    Machine m = storeHarness();
    Location src = m.allocObject(MemSpace::host(), 8, "src");
    Location dst = m.allocObject(MemSpace::deviceGlobal(), 8, "dst");
    // define only the first four bytes
    m.writeMem(src, CType{BaseType::Int, 0, -1}, Value::intV(0x01020304), kHost, {1, 1});
    REQUIRE(m.memcpyBytes(dst, src, 8, {2, 1}));

    const MemObject& d = m.config().memory.objects.at(dst.object);
    for (int i = 0; i < 4; ++i) CHECK(d.bytes[static_cast<size_t>(i)].defined);
    for (int i = 4; i < 8; ++i) CHECK(!d.bytes[static_cast<size_t>(i)].defined);

    // reading the undefined half on the other side still diagnoses
    size_t before = m.config().diagnostics.size();
    m.readMem({dst.object, 4}, CType{BaseType::Int, 0, -1}, kDev, {3, 1});
    CHECK(m.config().diagnostics.size() == before + 1);
}

TEST_CASE("overlapping copies behave like memmove") {
    Machine m = storeHarness();
    Location buf = m.allocObject(MemSpace::host(), 8, "buf");
    for (int i = 0; i < 8; ++i)
        m.writeMem({buf.object, i}, CType{BaseType::Char, 0, -1}, Value::intV(i + 1), kHost,
                   {1, 1});
    REQUIRE(m.memcpyBytes({buf.object, 2}, {buf.object, 0}, 6, {2, 1}));
    int expect[8] = {1, 2, 1, 2, 3, 4, 5, 6};
    for (int i = 0; i < 8; ++i) {
        auto v = m.readMem({buf.object, i}, CType{BaseType::Char, 0, -1}, kHost, {3, 1});
        REQUIRE(v.has_value());
        CHECK(v->i == expect[i]);
    }
}

TEST_CASE("store dump is deterministic and ordered by object id") {
    Machine m = storeHarness();
    Location a = m.allocObject(MemSpace::host(), 2, "a");
    m.writeMem(a, CType{BaseType::Char, 0, -1}, Value::intV(0xAB - 256), kHost, {1, 1});
    std::string dump = m.dumpStore();
    CHECK(dump == "1 host 2 ab00 10\n");
}

TEST_CASE("a file-scope __device__ global becomes one device-global object") {
    Machine m(mcktest::compile("__device__ int g;\nint main(void){return 0;}"), RunOptions{});
    // hand-built expected store: one 4-byte device-global object, undefined
    CHECK(m.dumpStore() == "1 device-global 4 00000000 0000\n");
}

TEST_CASE("pointers stored in memory survive the round trip; overwrites invalidate them") {
    Machine m = storeHarness();
    Location var = m.allocObject(MemSpace::host(), 8, "p");
    Location target = m.allocObject(MemSpace::deviceGlobal(), 16, "t");
    CType pt{BaseType::Int, 1, -1};
    REQUIRE(m.writeMem(var, pt, Value::ptrV({target.object, 4}, pt), kHost, {1, 1}));
    auto v = m.readMem(var, pt, kHost, {2, 1});
    REQUIRE(v.has_value());
    CHECK(v->p.object == target.object);
    CHECK(v->p.offset == 4);

    // scribbling over part of the slot destroys the pointer
    m.writeMem({var.object, 2}, CType{BaseType::Char, 0, -1}, Value::intV(1), kHost, {3, 1});
    size_t before = m.config().diagnostics.size();
    auto bad = m.readMem(var, pt, kHost, {4, 1});
    CHECK(!bad.has_value());
    CHECK(m.config().diagnostics.size() == before + 1);
}
