#include "minicudak/machine.hpp"

namespace mck {

namespace {

// paper-era (CUDA 4.x) error codes
constexpr int kSuccess = 0;
constexpr int kInvalidValue = 11;
constexpr int kInvalidDevicePointer = 17;
constexpr int kInvalidMemcpyDirection = 21;
constexpr int kInvalidResourceHandle = 33;
constexpr int kNotReady = 34;

const char* errorString(int code) {
    switch (code) {
        case kSuccess: return "no error";
        case kInvalidValue: return "invalid argument";
        case kInvalidDevicePointer: return "invalid device pointer";
        case kInvalidMemcpyDirection: return "invalid copy direction for memcpy";
        case kInvalidResourceHandle: return "invalid resource handle";
        case kNotReady: return "device not ready";
        default: return "unrecognized error code";
    }
}

const char* dirName(int code) {
    switch (code) {
        case 0: return "cudaMemcpyHostToHost";
        case 1: return "cudaMemcpyHostToDevice";
        case 2: return "cudaMemcpyDeviceToHost";
        case 3: return "cudaMemcpyDeviceToDevice";
        default: return "(invalid direction)";
    }
}

}  // namespace

void Machine::invokeApi(ThreadState& th, const Expr* call, std::vector<Value> args) {
    ApiId id = static_cast<ApiId>(call->calleeIndex);
    SourceLoc loc = call->loc;

    auto finish = [&](int code) {
        if (code != kSuccess && code != kNotReady) cfg_.lastApiError = code;
        if (onApiCall) onApiCall(id, code);
        th.values.push_back(Value::intV(code));
    };
    auto apiErr = [&](int code, const std::string& msg) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      std::string(apiName(id)) + ": " + msg + atLoc(loc), loc);
        finish(code);
    };
    auto block = [&](HostWaitKind wait, uint32_t waitId) {
        cfg_.hostWait = wait;
        cfg_.hostWaitId = waitId;
        th.k.push_back(Item{ItemOp::ApiAwait, nullptr, call, kSuccess});
        if (onApiCall) onApiCall(id, kSuccess);
    };
    auto outWrite = [&](const Value& dst, CType t, const Value& v) -> bool {
        if (dst.kind != ValueKind::Ptr || dst.p.isNull()) return false;
        return writeMem(dst.p, t, v, th.key, loc);
    };
    auto spaceOf = [&](Location l) -> std::optional<MemSpace> {
        auto it = cfg_.memory.objects.find(l.object);
        if (it == cfg_.memory.objects.end() || !it->second.live) return std::nullopt;
        return it->second.space;
    };
    auto streamArg = [&](const Value& v) -> std::optional<StreamId> {
        if (v.kind != ValueKind::Int) return std::nullopt;
        auto sid = static_cast<StreamId>(v.i);
        auto it = cfg_.streams.find(sid);
        if (it == cfg_.streams.end() || it->second.destroyed) return std::nullopt;
        return sid;
    };

    // validates a transfer's pointers, direction and ranges; returns the
    // error code or success
    auto checkCopy = [&](const Value& dstV, const Value& srcV, int64_t n, int64_t dir,
                         std::string& why) -> int {
        if (dir < 0 || dir > 3) {
            why = "direction argument " + std::to_string(dir) + " is not a cudaMemcpyKind";
            return kInvalidMemcpyDirection;
        }
        if (n < 0) {
            why = "negative byte count";
            return kInvalidValue;
        }
        if (dstV.kind != ValueKind::Ptr || srcV.kind != ValueKind::Ptr ||
            (n > 0 && (dstV.p.isNull() || srcV.p.isNull()))) {
            why = "source or destination is not a valid pointer";
            return kInvalidValue;
        }
        if (n == 0) return kSuccess;
        auto ds = spaceOf(dstV.p);
        auto ss = spaceOf(srcV.p);
        if (!ds || !ss) {
            why = "source or destination was freed or never allocated";
            return kInvalidDevicePointer;
        }
        auto want = [&](SpaceKind dk, SpaceKind sk) {
            return ds->kind == dk && ss->kind == sk;
        };
        bool matches = (dir == 0 && want(SpaceKind::Host, SpaceKind::Host)) ||
                       (dir == 1 && want(SpaceKind::DeviceGlobal, SpaceKind::Host)) ||
                       (dir == 2 && want(SpaceKind::Host, SpaceKind::DeviceGlobal)) ||
                       (dir == 3 && want(SpaceKind::DeviceGlobal, SpaceKind::DeviceGlobal));
        if (!matches) {
            why = std::string("direction ") + dirName(static_cast<int>(dir)) +
                  " does not match the operand memory spaces (dst=" + ds->str() +
                  ", src=" + ss->str() + ")";
            return kInvalidMemcpyDirection;
        }
        const MemObject& d = cfg_.memory.objects.at(dstV.p.object);
        const MemObject& s = cfg_.memory.objects.at(srcV.p.object);
        if (dstV.p.offset < 0 || dstV.p.offset + n > d.size || srcV.p.offset < 0 ||
            srcV.p.offset + n > s.size) {
            why = "transfer of " + std::to_string(n) + " bytes is out of range";
            return kInvalidValue;
        }
        return kSuccess;
    };

    switch (id) {
        case ApiId::Malloc: {
            if (args[1].kind != ValueKind::Int || args[1].i < 0)
                return apiErr(kInvalidValue, "invalid allocation size");
            int64_t n = args[1].i;
            Value out;
            if (n == 0) {
                out = Value::ptrV(Location{}, CType{BaseType::Void, 1, -1});
            } else {
                Location l = allocObject(MemSpace::deviceGlobal(), n, "cudaMalloc");
                out = Value::ptrV(l, CType{BaseType::Void, 1, -1});
            }
            if (!outWrite(args[0], CType{BaseType::Void, 1, -1}, out))
                return apiErr(kInvalidValue, "output pointer argument is invalid");
            finish(kSuccess);
            break;
        }
        case ApiId::Free: {
            bool isNull = (args[0].kind == ValueKind::Ptr && args[0].p.isNull()) ||
                          (args[0].kind == ValueKind::Int && args[0].i == 0);
            if (isNull) {
                finish(kSuccess);  // freeing the null pointer is a no-op
                break;
            }
            if (args[0].kind != ValueKind::Ptr)
                return apiErr(kInvalidDevicePointer, "argument is not a device pointer");
            bool ok = freeObject(args[0].p, MemSpace::deviceGlobal(), loc);
            finish(ok ? kSuccess : kInvalidDevicePointer);
            break;
        }
        case ApiId::Memcpy: {
            std::string why;
            int code = checkCopy(args[0], args[1], args[2].i, args[3].i, why);
            if (code != kSuccess) return apiErr(code, why);
            if (args[2].i == 0) {
                finish(kSuccess);
                break;
            }
            StreamItem item;
            item.kind = StreamItemKind::MemcpyAsync;
            item.copy = MemcpyArgs{args[0].p, args[1].p, args[2].i,
                                   static_cast<int>(args[3].i), loc};
            enqueue(0, std::move(item), loc);
            // synchronous copy: queue into the default stream, then wait for
            // it to drain
            block(HostWaitKind::Stream, 0);
            break;
        }
        case ApiId::MemcpyAsync: {
            StreamId sid = 0;
            if (args.size() == 5) {
                auto s = streamArg(args[4]);
                if (!s) return apiErr(kInvalidResourceHandle, "unknown stream handle");
                sid = *s;
            }
            std::string why;
            int code = checkCopy(args[0], args[1], args[2].i, args[3].i, why);
            if (code != kSuccess) return apiErr(code, why);
            if (args[2].i > 0) {
                StreamItem item;
                item.kind = StreamItemKind::MemcpyAsync;
                item.copy = MemcpyArgs{args[0].p, args[1].p, args[2].i,
                                       static_cast<int>(args[3].i), loc};
                enqueue(sid, std::move(item), loc);
            }
            finish(kSuccess);
            break;
        }
        case ApiId::Memset: {
            if (args[0].kind != ValueKind::Ptr || args[0].p.isNull())
                return apiErr(kInvalidDevicePointer, "argument is not a device pointer");
            if (args[2].kind != ValueKind::Int || args[2].i < 0)
                return apiErr(kInvalidValue, "invalid byte count");
            auto sp = spaceOf(args[0].p);
            if (!sp) return apiErr(kInvalidDevicePointer, "pointer was freed or never allocated");
            if (sp->kind != SpaceKind::DeviceGlobal)
                return apiErr(kInvalidDevicePointer, "pointer is not device memory");
            MemObject& obj = cfg_.memory.objects.at(args[0].p.object);
            int64_t off = args[0].p.offset;
            int64_t n = args[2].i;
            if (off < 0 || off + n > obj.size)
                return apiErr(kInvalidValue, "fill range is out of bounds");
            for (int64_t i = 0; i < n; ++i) {
                obj.bytes[static_cast<size_t>(off + i)].v = static_cast<uint8_t>(args[1].i);
                obj.bytes[static_cast<size_t>(off + i)].defined = true;
            }
            for (auto pit = obj.ptrs.begin(); pit != obj.ptrs.end();) {
                if (pit->first < off + n && off < pit->first + 8)
                    pit = obj.ptrs.erase(pit);
                else
                    ++pit;
            }
            finish(kSuccess);
            break;
        }
        case ApiId::DeviceSynchronize:
            block(HostWaitKind::Device, 0);
            break;
        case ApiId::StreamCreate: {
            StreamId sid = streamCreate();
            if (!outWrite(args[0], CType{BaseType::Long, 0, -1}, Value::longV(sid)))
                return apiErr(kInvalidValue, "output stream argument is invalid");
            finish(kSuccess);
            break;
        }
        case ApiId::StreamDestroy: {
            if (args[0].kind != ValueKind::Int || args[0].i == 0)
                return apiErr(kInvalidResourceHandle, "cannot destroy this stream handle");
            auto it = cfg_.streams.find(static_cast<StreamId>(args[0].i));
            if (it == cfg_.streams.end() || it->second.destroyed)
                return apiErr(kInvalidResourceHandle, "unknown stream handle");
            it->second.destroyed = true;  // pending work still drains
            if (it->second.idle()) cfg_.streams.erase(it);
            finish(kSuccess);
            break;
        }
        case ApiId::StreamSynchronize: {
            auto s = streamArg(args[0]);
            if (!s) return apiErr(kInvalidResourceHandle, "unknown stream handle");
            block(HostWaitKind::Stream, *s);
            break;
        }
        case ApiId::StreamQuery: {
            auto s = streamArg(args[0]);
            if (!s) return apiErr(kInvalidResourceHandle, "unknown stream handle");
            finish(cfg_.streams.at(*s).idle() ? kSuccess : kNotReady);
            break;
        }
        case ApiId::StreamWaitEvent: {
            auto s = streamArg(args[0]);
            if (!s) return apiErr(kInvalidResourceHandle, "unknown stream handle");
            if (args[1].kind != ValueKind::Int ||
                !cfg_.events.count(static_cast<EventId>(args[1].i)))
                return apiErr(kInvalidResourceHandle, "unknown event handle");
            StreamItem item;
            item.kind = StreamItemKind::WaitEvent;
            item.eid = static_cast<EventId>(args[1].i);
            enqueue(*s, std::move(item), loc);
            finish(kSuccess);
            break;
        }
        case ApiId::EventCreate: {
            EventId eid = cfg_.nextEid++;
            cfg_.events.emplace(eid, Event{eid, EventStatus::Created, 0});
            if (!outWrite(args[0], CType{BaseType::Long, 0, -1}, Value::longV(eid)))
                return apiErr(kInvalidValue, "output event argument is invalid");
            finish(kSuccess);
            break;
        }
        case ApiId::EventDestroy: {
            if (args[0].kind != ValueKind::Int ||
                !cfg_.events.count(static_cast<EventId>(args[0].i)))
                return apiErr(kInvalidResourceHandle, "unknown event handle");
            cfg_.events.erase(static_cast<EventId>(args[0].i));
            finish(kSuccess);
            break;
        }
        case ApiId::EventRecord: {
            if (args[0].kind != ValueKind::Int ||
                !cfg_.events.count(static_cast<EventId>(args[0].i)))
                return apiErr(kInvalidResourceHandle, "unknown event handle");
            EventId eid = static_cast<EventId>(args[0].i);
            StreamId sid = 0;
            if (args.size() == 2) {
                auto s = streamArg(args[1]);
                if (!s) return apiErr(kInvalidResourceHandle, "unknown stream handle");
                sid = *s;
            }
            Event& ev = cfg_.events.at(eid);
            if (ev.status != EventStatus::Created)
                return apiErr(kInvalidResourceHandle, "event was already recorded");
            ev.status = EventStatus::Pending;
            ev.sid = sid;
            StreamItem item;
            item.kind = StreamItemKind::EventRecord;
            item.eid = eid;
            enqueue(sid, std::move(item), loc);
            finish(kSuccess);
            break;
        }
        case ApiId::EventSynchronize: {
            if (args[0].kind != ValueKind::Int ||
                !cfg_.events.count(static_cast<EventId>(args[0].i)))
                return apiErr(kInvalidResourceHandle, "unknown event handle");
            block(HostWaitKind::Event, static_cast<EventId>(args[0].i));
            break;
        }
        case ApiId::EventQuery: {
            if (args[0].kind != ValueKind::Int ||
                !cfg_.events.count(static_cast<EventId>(args[0].i)))
                return apiErr(kInvalidResourceHandle, "unknown event handle");
            const Event& ev = cfg_.events.at(static_cast<EventId>(args[0].i));
            finish(ev.status == EventStatus::Pending ? kNotReady : kSuccess);
            break;
        }
        case ApiId::EventElapsedTime: {
            // no time model: elapsed time is always 0.0
            if (args[1].kind != ValueKind::Int || args[2].kind != ValueKind::Int ||
                !cfg_.events.count(static_cast<EventId>(args[1].i)) ||
                !cfg_.events.count(static_cast<EventId>(args[2].i)))
                return apiErr(kInvalidResourceHandle, "unknown event handle");
            if (!outWrite(args[0], CType{BaseType::Float, 0, -1},
                          Value::floatV(0.0, CType{BaseType::Float, 0, -1})))
                return apiErr(kInvalidValue, "output argument is invalid");
            finish(kSuccess);
            break;
        }
        case ApiId::GetLastError: {
            int code = cfg_.lastApiError;
            cfg_.lastApiError = kSuccess;
            if (onApiCall) onApiCall(id, code);
            th.values.push_back(Value::intV(code));
            break;
        }
        case ApiId::GetErrorString: {
            if (onApiCall) onApiCall(id, kSuccess);
            th.values.push_back(Value::strV(errorString(static_cast<int>(args[0].i))));
            break;
        }
        case ApiId::DeviceGetAttribute: {
            int64_t attr = args[1].i;
            int64_t v;
            switch (attr) {
                case 1: v = opts_.arch.maxThreadsPerBlock; break;
                case 10: v = opts_.arch.warpSize; break;
                case 75: v = opts_.arch.computeCapabilityMajor; break;
                case 76: v = opts_.arch.computeCapabilityMinor; break;
                default:
                    return apiErr(kInvalidValue,
                                  "unknown device attribute " + std::to_string(attr));
            }
            if (!outWrite(args[0], CType{BaseType::Int, 0, -1}, Value::intV(v)))
                return apiErr(kInvalidValue, "output argument is invalid");
            finish(kSuccess);
            break;
        }
        case ApiId::DriverGetVersion:
            if (!outWrite(args[0], CType{BaseType::Int, 0, -1},
                          Value::intV(opts_.arch.driverVersion)))
                return apiErr(kInvalidValue, "output argument is invalid");
            finish(kSuccess);
            break;
        case ApiId::RuntimeGetVersion:
            if (!outWrite(args[0], CType{BaseType::Int, 0, -1},
                          Value::intV(opts_.arch.runtimeVersion)))
                return apiErr(kInvalidValue, "output argument is invalid");
            finish(kSuccess);
            break;
    }
}

}  // namespace mck
