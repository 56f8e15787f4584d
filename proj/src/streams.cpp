#include "minicudak/machine.hpp"

namespace mck {

StreamId Machine::streamCreate() {
    StreamId sid = cfg_.nextSid++;
    Stream s;
    s.sid = sid;
    cfg_.streams.emplace(sid, std::move(s));
    return sid;
}

bool Machine::enqueue(StreamId sid, StreamItem item, SourceLoc loc) {
    auto it = cfg_.streams.find(sid);
    if (it == cfg_.streams.end() || it->second.destroyed) {
        addDiagnostic(Severity::Error, DiagCategory::ApiError,
                      "operation on uninitialized stream " + std::to_string(sid) + atLoc(loc),
                      loc);
        return false;
    }
    it->second.q.push_back(std::move(item));
    return true;
}

// A stream may dispatch when nothing of it is running and its head item can
// start. Items in one stream serialize; distinct streams interleave freely.
bool Machine::streamDispatchable(const Stream& s) const {
    if (s.running.has_value() || s.q.empty()) return false;
    const StreamItem& head = s.q.front();
    if (head.kind == StreamItemKind::WaitEvent) {
        auto ev = cfg_.events.find(head.eid);
        return ev != cfg_.events.end() && ev->second.status == EventStatus::Recorded;
    }
    return true;
}

void Machine::dispatchStream(StreamId sid) {
    Stream& s = cfg_.streams.at(sid);
    StreamItem item = s.q.front();
    s.q.pop_front();
    switch (item.kind) {
        case StreamItemKind::KernelLaunch: {
            GridId gid = spawnGrid(item.launch);
            s.running = gid;
            break;
        }
        case StreamItemKind::MemcpyAsync:
            performCopy(item.copy);
            trace("stream sid=" + std::to_string(sid) + " dispatch=memcpy n=" +
                  std::to_string(item.copy.n));
            break;
        case StreamItemKind::EventRecord: {
            auto ev = cfg_.events.find(item.eid);
            if (ev != cfg_.events.end()) ev->second.status = EventStatus::Recorded;
            trace("stream sid=" + std::to_string(sid) + " dispatch=event-record eid=" +
                  std::to_string(item.eid));
            break;
        }
        case StreamItemKind::WaitEvent:
            // dispatchable only once the event is recorded; dequeuing is the action
            trace("stream sid=" + std::to_string(sid) + " dispatch=wait-event eid=" +
                  std::to_string(item.eid));
            break;
    }
    if (s.destroyed && s.idle()) cfg_.streams.erase(sid);
}

void Machine::performCopy(const MemcpyArgs& m) {
    memcpyBytes(m.dst, m.src, m.n, m.loc);
}

bool Machine::hostWaitSatisfied() const {
    switch (cfg_.hostWait) {
        case HostWaitKind::None:
            return true;
        case HostWaitKind::Device: {
            for (const auto& [sid, s] : cfg_.streams)
                if (!s.idle()) return false;
            for (const auto& [gid, g] : cfg_.grids)
                if (!g.completed) return false;
            return true;
        }
        case HostWaitKind::Stream: {
            auto it = cfg_.streams.find(cfg_.hostWaitId);
            return it == cfg_.streams.end() || it->second.idle();
        }
        case HostWaitKind::Event: {
            auto it = cfg_.events.find(cfg_.hostWaitId);
            return it == cfg_.events.end() || it->second.status == EventStatus::Recorded;
        }
    }
    return true;
}

}  // namespace mck
