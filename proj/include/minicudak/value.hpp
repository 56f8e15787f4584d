#pragma once

#include <cstdint>
#include <string>

#include "minicudak/ast.hpp"

namespace mck {

using ObjectId = uint32_t;

// Symbolic address: pointers are (object, offset) pairs, never raw integers.
// Object 0 is the null pointer.
struct Location {
    ObjectId object = 0;
    int64_t offset = 0;

    bool isNull() const { return object == 0; }
    auto operator<=>(const Location&) const = default;
};

enum class ValueKind { Void, Int, Float, Ptr, Str, LValue };

// A runtime value. Int covers char/int/unsigned/long (the static type is in
// `type`); Float covers float/double. LValue designates a typed location and
// only ever lives on a thread's value stack.
struct Value {
    ValueKind kind = ValueKind::Void;
    CType type;
    int64_t i = 0;
    double f = 0.0;
    Location p;
    std::string strv;  // Str payload (cudaGetErrorString)

    bool operator==(const Value&) const = default;

    static Value voidV() { return Value{}; }
    static Value intV(int64_t v, CType t) {
        Value r;
        r.kind = ValueKind::Int;
        r.type = t;
        r.i = v;
        return r;
    }
    static Value intV(int64_t v) { return intV(v, CType{BaseType::Int, 0, -1}); }
    static Value longV(int64_t v) { return intV(v, CType{BaseType::Long, 0, -1}); }
    static Value floatV(double v, CType t) {
        Value r;
        r.kind = ValueKind::Float;
        r.type = t;
        r.f = v;
        return r;
    }
    static Value ptrV(Location loc, CType t) {
        Value r;
        r.kind = ValueKind::Ptr;
        r.type = t;
        r.p = loc;
        return r;
    }
    static Value strV(std::string s) {
        Value r;
        r.kind = ValueKind::Str;
        r.type = CType{BaseType::Char, 1, -1};
        r.strv = std::move(s);
        return r;
    }
    static Value lvalue(Location loc, CType t) {
        Value r;
        r.kind = ValueKind::LValue;
        r.type = t;
        r.p = loc;
        return r;
    }

    bool truthy() const {
        switch (kind) {
            case ValueKind::Int: return i != 0;
            case ValueKind::Float: return f != 0.0;
            case ValueKind::Ptr: return !p.isNull();
            case ValueKind::Str: return true;
            default: return false;
        }
    }
};

}  // namespace mck
