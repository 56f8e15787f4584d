#include "minicudak/machine.hpp"

namespace mck {

// Per-byte shadow tuples over shared device memory. A conflicting pair is
// two accesses by different threads of the same block to one byte within an
// epoch, at least one of them a write. Races are warnings; execution
// continues.
void Machine::recordAccess(const MemObject& obj, int64_t off, int64_t len, ThreadKey thread,
                           AccessKind kind, SourceLoc loc) {
    if (!cfg_.race.enabled && !cfg_.oracleMode) return;

    if (cfg_.oracleMode) {
        OracleEvent ev;
        ev.thread = thread;
        ev.object = obj.id;
        ev.offset = off;
        ev.len = len;
        ev.kind = kind;
        cfg_.oracleTrace.push_back(ev);
    }
    if (!cfg_.race.enabled) return;

    for (int64_t b = off; b < off + len; ++b) {
        auto& entries = cfg_.race.shadow[{obj.id, b}];
        bool raced = false;
        for (const AccessEntry& e : entries) {
            if (e.thread != thread && (e.kind == AccessKind::Write || kind == AccessKind::Write)) {
                raced = true;
                break;
            }
        }
        if (raced) {
            auto key = std::make_tuple(obj.id, b, loc.line);
            if (!cfg_.race.reported.count(key)) {
                cfg_.race.reported.insert(key);
                addDiagnostic(Severity::Warning, DiagCategory::Race,
                              "Possible race on shared device memory detected at " +
                                  prog_->filename + ":" + std::to_string(loc.line) + ".",
                              loc);
            }
        }
        // one entry per (thread, kind) is enough for detection
        bool present = false;
        for (const AccessEntry& e : entries)
            if (e.thread == thread && e.kind == kind) {
                present = true;
                break;
            }
        if (!present) entries.push_back(AccessEntry{thread, kind, loc});
    }
}

void Machine::clearEpoch(GridId gid, int bid) {
    if (cfg_.oracleMode) {
        OracleEvent ev;
        ev.isEpoch = true;
        ev.gid = gid;
        ev.bid = bid;
        cfg_.oracleTrace.push_back(ev);
    }
    if (!cfg_.race.enabled) return;
    for (auto it = cfg_.race.shadow.begin(); it != cfg_.race.shadow.end();) {
        auto obj = cfg_.memory.objects.find(it->first.first);
        bool mine = obj != cfg_.memory.objects.end() &&
                    obj->second.space.kind == SpaceKind::DeviceShared &&
                    obj->second.space.gid == gid && obj->second.space.bid == bid;
        if (mine)
            it = cfg_.race.shadow.erase(it);
        else
            ++it;
    }
}

}  // namespace mck
