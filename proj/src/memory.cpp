#include <bit>
#include <cstring>
#include <sstream>

#include "minicudak/machine.hpp"

namespace mck {

std::string MemSpace::str() const {
    switch (kind) {
        case SpaceKind::Host: return "host";
        case SpaceKind::DeviceGlobal: return "device-global";
        case SpaceKind::DeviceShared:
            return "block-shared(gid=" + std::to_string(gid) + ",bid=" + std::to_string(bid) + ")";
    }
    return "?";
}

std::string ThreadKey::str() const {
    if (isHost()) return "host code";
    return "device thread (gid=" + std::to_string(gid) + ", bid=" + std::to_string(bid) +
           ", tid=" + std::to_string(tid) + ")";
}

Location Machine::allocObject(MemSpace space, int64_t size, const std::string& name) {
    MemObject obj;
    obj.id = cfg_.memory.next++;
    obj.space = space;
    obj.size = size;
    obj.bytes.resize(static_cast<size_t>(size));
    obj.name = name;
    ObjectId id = obj.id;
    cfg_.memory.objects.emplace(id, std::move(obj));
    return Location{id, 0};
}

bool Machine::freeObject(Location loc, MemSpace expected, SourceLoc callLoc) {
    auto it = cfg_.memory.objects.find(loc.object);
    if (it == cfg_.memory.objects.end()) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "cudaFree of a pointer that was never allocated" + atLoc(callLoc), callLoc);
        return false;
    }
    MemObject& obj = it->second;
    if (!obj.live) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "double cudaFree of the same allocation" + atLoc(callLoc), callLoc);
        return false;
    }
    if (loc.offset != 0) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "cudaFree of an interior pointer" + atLoc(callLoc), callLoc);
        return false;
    }
    if (!(obj.space == expected)) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "cudaFree of " + obj.space.str() + " memory" + atLoc(callLoc), callLoc);
        return false;
    }
    obj.live = false;
    return true;
}

bool Machine::checkAccess(const MemObject& obj, ThreadKey accessor, AccessKind kind,
                          SourceLoc loc) {
    bool ok;
    if (accessor.isHost()) {
        ok = obj.space.kind == SpaceKind::Host;
    } else {
        switch (obj.space.kind) {
            case SpaceKind::DeviceGlobal: ok = true; break;
            case SpaceKind::DeviceShared:
                ok = obj.space.gid == accessor.gid && obj.space.bid == accessor.bid;
                break;
            case SpaceKind::Host: ok = false; break;
        }
    }
    if (!ok) {
        std::string msg = "Illegal device or host memory access: " + accessor.str() +
                          (kind == AccessKind::Write ? " write" : " read") + " of " +
                          obj.space.str() + " memory" + atLoc(loc);
        addDiagnostic(Severity::Error, DiagCategory::MemBoundary, msg, loc);
    }
    return ok;
}

namespace {

void eraseOverlappingPtrs(MemObject& obj, int64_t off, int64_t len) {
    for (auto it = obj.ptrs.begin(); it != obj.ptrs.end();) {
        int64_t slot = it->first;
        if (slot < off + len && off < slot + 8)
            it = obj.ptrs.erase(it);
        else
            ++it;
    }
}

int64_t signExtend(uint64_t raw, BaseType base) {
    switch (base) {
        case BaseType::Char: return static_cast<int8_t>(raw);
        case BaseType::Int: return static_cast<int32_t>(raw);
        case BaseType::UInt: return static_cast<uint32_t>(raw);
        default: return static_cast<int64_t>(raw);
    }
}

}  // namespace

std::optional<Value> Machine::readMem(Location loc, CType type, ThreadKey accessor,
                                      SourceLoc sloc) {
    auto it = cfg_.memory.objects.find(loc.object);
    if (it == cfg_.memory.objects.end() || loc.isNull()) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "read through a null or invalid pointer" + atLoc(sloc), sloc);
        if (onMemAccess) onMemAccess({accessor, AccessKind::Read, loc.object, {}, loc.offset,
                                      type.scalarSize(), false, sloc});
        return std::nullopt;
    }
    MemObject& obj = it->second;
    int64_t len = type.scalarSize();
    bool allowed = checkAccess(obj, accessor, AccessKind::Read, sloc);
    if (onMemAccess)
        onMemAccess({accessor, AccessKind::Read, obj.id, obj.space, loc.offset, len, allowed, sloc});
    if (!allowed) return std::nullopt;
    if (!obj.live) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "read from dead memory ('" + obj.name + "' was freed or expired)" +
                          atLoc(sloc),
                      sloc);
        return std::nullopt;
    }
    if (loc.offset < 0 || loc.offset + len > obj.size) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "out-of-bounds read of " + std::to_string(len) + " bytes at offset " +
                          std::to_string(loc.offset) + " of " + std::to_string(obj.size) +
                          "-byte object '" + obj.name + "'" + atLoc(sloc),
                      sloc);
        return std::nullopt;
    }

    if (obj.space.kind == SpaceKind::DeviceShared)
        recordAccess(obj, loc.offset, len, accessor, AccessKind::Read, sloc);

    bool anyUndefined = false;
    for (int64_t i = 0; i < len; ++i)
        if (!obj.bytes[static_cast<size_t>(loc.offset + i)].defined) anyUndefined = true;

    if (type.ptr > 0) {
        auto slot = obj.ptrs.find(loc.offset);
        if (slot != obj.ptrs.end()) return Value::ptrV(slot->second, type);
        if (anyUndefined) {
            addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                          "read of uninitialized pointer from '" + obj.name + "'" + atLoc(sloc),
                          sloc);
            return std::nullopt;
        }
        uint64_t raw = 0;
        for (int64_t i = 0; i < len; ++i)
            raw |= static_cast<uint64_t>(obj.bytes[static_cast<size_t>(loc.offset + i)].v)
                   << (8 * i);
        if (raw == 0) return Value::ptrV(Location{}, type);
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "read of a non-pointer value as a pointer" + atLoc(sloc), sloc);
        return std::nullopt;
    }

    if (anyUndefined) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "read of uninitialized memory ('" + obj.name + "')" + atLoc(sloc), sloc);
    }

    uint64_t raw = 0;
    for (int64_t i = 0; i < len; ++i)
        raw |= static_cast<uint64_t>(obj.bytes[static_cast<size_t>(loc.offset + i)].v) << (8 * i);

    if (type.base == BaseType::Float)
        return Value::floatV(std::bit_cast<float>(static_cast<uint32_t>(raw)), type);
    if (type.base == BaseType::Double)
        return Value::floatV(std::bit_cast<double>(raw), type);
    return Value::intV(signExtend(raw, type.base), type);
}

void Machine::pokeValue(MemObject& obj, int64_t off, CType type, const Value& v) {
    int64_t len = type.scalarSize();
    eraseOverlappingPtrs(obj, off, len);
    uint64_t raw = 0;
    if (v.kind == ValueKind::Ptr) {
        raw = (static_cast<uint64_t>(v.p.object) << 32) |
              (static_cast<uint64_t>(v.p.offset) & 0xffffffffu);
        if (!v.p.isNull()) obj.ptrs[off] = v.p;
    } else if (type.ptr > 0) {
        // integer (null) stored into a pointer slot
        raw = static_cast<uint64_t>(v.i);
    } else if (type.base == BaseType::Float) {
        raw = std::bit_cast<uint32_t>(static_cast<float>(v.f));
    } else if (type.base == BaseType::Double) {
        raw = std::bit_cast<uint64_t>(v.f);
    } else {
        raw = static_cast<uint64_t>(v.i);
    }
    for (int64_t i = 0; i < len; ++i) {
        obj.bytes[static_cast<size_t>(off + i)].v = static_cast<uint8_t>(raw >> (8 * i));
        obj.bytes[static_cast<size_t>(off + i)].defined = true;
    }
}

bool Machine::writeMem(Location loc, CType type, const Value& v, ThreadKey accessor,
                       SourceLoc sloc) {
    auto it = cfg_.memory.objects.find(loc.object);
    if (it == cfg_.memory.objects.end() || loc.isNull()) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "write through a null or invalid pointer" + atLoc(sloc), sloc);
        if (onMemAccess) onMemAccess({accessor, AccessKind::Write, loc.object, {}, loc.offset,
                                      type.scalarSize(), false, sloc});
        return false;
    }
    MemObject& obj = it->second;
    int64_t len = type.scalarSize();
    bool allowed = checkAccess(obj, accessor, AccessKind::Write, sloc);
    if (onMemAccess)
        onMemAccess({accessor, AccessKind::Write, obj.id, obj.space, loc.offset, len, allowed, sloc});
    if (!allowed) return false;
    if (!obj.live) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "write to dead memory ('" + obj.name + "' was freed or expired)" +
                          atLoc(sloc),
                      sloc);
        return false;
    }
    if (loc.offset < 0 || loc.offset + len > obj.size) {
        addDiagnostic(Severity::Error, DiagCategory::UndefinedBehavior,
                      "out-of-bounds write of " + std::to_string(len) + " bytes at offset " +
                          std::to_string(loc.offset) + " of " + std::to_string(obj.size) +
                          "-byte object '" + obj.name + "'" + atLoc(sloc),
                      sloc);
        return false;
    }

    if (obj.space.kind == SpaceKind::DeviceShared)
        recordAccess(obj, loc.offset, len, accessor, AccessKind::Write, sloc);

    pokeValue(obj, loc.offset, type, v);
    return true;
}

bool Machine::memcpyBytes(Location dst, Location src, int64_t n, SourceLoc loc) {
    if (n == 0) return true;
    auto ds = cfg_.memory.objects.find(dst.object);
    auto ss = cfg_.memory.objects.find(src.object);
    if (ds == cfg_.memory.objects.end() || ss == cfg_.memory.objects.end() ||
        !ds->second.live || !ss->second.live) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "memory transfer touches a freed or invalid allocation" + atLoc(loc), loc);
        return false;
    }
    MemObject& d = ds->second;
    MemObject& s = ss->second;
    if (src.offset < 0 || src.offset + n > s.size || dst.offset < 0 || dst.offset + n > d.size) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "memory transfer of " + std::to_string(n) + " bytes is out of range" +
                          atLoc(loc),
                      loc);
        return false;
    }
    // copy as if through an intermediate buffer (overlap-safe), definedness
    // flags travel with the bytes
    std::vector<MemByte> tmp(s.bytes.begin() + src.offset, s.bytes.begin() + src.offset + n);
    std::map<int64_t, Location> tmpPtrs;
    for (auto& [slot, p] : s.ptrs)
        if (slot >= src.offset && slot + 8 <= src.offset + n) tmpPtrs[slot - src.offset] = p;
    eraseOverlappingPtrs(d, dst.offset, n);
    for (int64_t i = 0; i < n; ++i)
        d.bytes[static_cast<size_t>(dst.offset + i)] = tmp[static_cast<size_t>(i)];
    for (auto& [rel, p] : tmpPtrs) d.ptrs[dst.offset + rel] = p;
    return true;
}

std::string Machine::dumpStore() const {
    std::ostringstream out;
    static const char* hex = "0123456789abcdef";
    for (const auto& [id, obj] : cfg_.memory.objects) {
        out << id << " " << obj.space.str() << " " << obj.size << " ";
        if (obj.bytes.empty()) out << "-";
        for (const MemByte& b : obj.bytes) out << hex[b.v >> 4] << hex[b.v & 0xf];
        out << " ";
        if (obj.bytes.empty()) out << "-";
        for (const MemByte& b : obj.bytes) out << (b.defined ? '1' : '0');
        if (!obj.live) out << " dead";
        out << "\n";
    }
    return out.str();
}

}  // namespace mck
