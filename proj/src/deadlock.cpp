#include <set>
#include <sstream>

#include "minicudak/machine.hpp"

namespace mck {

// Classifies a frozen configuration with no enabled transitions. Threads
// stuck at a barrier make a BarrierDeadlock per block; a blocked host makes
// a HostHang; a stream stalled on a never-recordable event makes a
// StreamStall.
std::vector<StuckReport> Machine::scanStuck() const {
    std::vector<StuckReport> out;

    std::map<std::pair<GridId, int>, std::vector<int>> waitingByBlock;
    for (const auto& [key, th] : cfg_.device) {
        if (th.barrier.waiting) waitingByBlock[{key.gid, key.bid}].push_back(key.tid);
    }
    for (const auto& [block, tids] : waitingByBlock) {
        StuckReport r;
        r.kind = StuckReport::Kind::BarrierDeadlock;
        r.gid = block.first;
        r.bid = block.second;
        r.waitingTids = tids;
        const GridInfo& grid = cfg_.grids.at(block.first);
        std::set<int> waiting(tids.begin(), tids.end());
        for (int t = 0; t < grid.blockDim; ++t)
            if (!waiting.count(t)) r.missingTids.push_back(t);
        r.reason = "block (" + std::to_string(r.gid) + "," + std::to_string(r.bid) + ") has " +
                   std::to_string(tids.size()) +
                   " thread(s) waiting at __syncthreads() that can never complete";
        out.push_back(std::move(r));
    }

    if (!cfg_.host.halted && !cfg_.host.k.empty()) {
        StuckReport r;
        r.kind = StuckReport::Kind::HostHang;
        switch (cfg_.hostWait) {
            case HostWaitKind::Device:
                r.reason = "host thread is blocked in cudaDeviceSynchronize()";
                break;
            case HostWaitKind::Stream:
                r.reason = "host thread is blocked waiting for stream " +
                           std::to_string(cfg_.hostWaitId) + " to drain";
                break;
            case HostWaitKind::Event:
                r.reason = "host thread is blocked in cudaEventSynchronize() on event " +
                           std::to_string(cfg_.hostWaitId) + ", which is never recorded";
                break;
            case HostWaitKind::None:
                r.reason = "host thread cannot take a step";
                break;
        }
        out.push_back(std::move(r));
    }

    for (const auto& [sid, s] : cfg_.streams) {
        if (s.q.empty() || s.running.has_value()) continue;
        const StreamItem& head = s.q.front();
        if (head.kind == StreamItemKind::WaitEvent) {
            StuckReport r;
            r.kind = StuckReport::Kind::StreamStall;
            r.sid = sid;
            r.item = "cudaStreamWaitEvent(event " + std::to_string(head.eid) + ")";
            r.reason = "stream " + std::to_string(sid) + " is stalled on event " +
                       std::to_string(head.eid) + ", which is never recorded";
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::string formatStuckReports(const std::vector<StuckReport>& reports) {
    std::ostringstream out;
    for (const StuckReport& r : reports) {
        switch (r.kind) {
            case StuckReport::Kind::BarrierDeadlock: {
                out << "barrier-deadlock gid=" << r.gid << " bid=" << r.bid << " waiting=[";
                for (size_t i = 0; i < r.waitingTids.size(); ++i)
                    out << (i ? "," : "") << r.waitingTids[i];
                out << "] finished-or-absent=[";
                for (size_t i = 0; i < r.missingTids.size(); ++i)
                    out << (i ? "," : "") << r.missingTids[i];
                out << "]\n";
                break;
            }
            case StuckReport::Kind::HostHang:
                out << "host-hang: " << r.reason << "\n";
                break;
            case StuckReport::Kind::StreamStall:
                out << "stream-stall sid=" << r.sid << " item=" << r.item << "\n";
                break;
        }
    }
    return out.str();
}

// Final-configuration dump written to the report file on stuck runs.
std::string dumpConfiguration(const Machine& m) {
    const Configuration& cfg = m.config();
    std::ostringstream out;
    out << "steps " << cfg.steps << "\n";
    out << "nextGid " << cfg.nextGid << "\n";
    out << "nextSid " << cfg.nextSid << "\n";
    out << "host k-depth " << cfg.host.k.size() << (cfg.host.halted ? " halted" : "") << "\n";
    for (const auto& [key, th] : cfg.device) {
        out << "thread gid=" << key.gid << " bid=" << key.bid << " tid=" << key.tid
            << " k-depth=" << th.k.size();
        if (th.barrier.waiting)
            out << " waiting-at-barrier token=" << th.barrier.token;
        out << "\n";
    }
    for (const auto& [gid, g] : cfg.grids) {
        out << "grid gid=" << gid << " dims=" << g.gridDim << "x" << g.blockDim
            << " live=" << g.liveThreads << (g.completed ? " completed" : "") << "\n";
    }
    for (const auto& [sid, s] : cfg.streams) {
        out << "stream sid=" << sid << " queued=" << s.q.size();
        if (s.running) out << " running-gid=" << *s.running;
        out << "\n";
    }
    for (const auto& [eid, e] : cfg.events) {
        out << "event eid=" << eid << " status="
            << (e.status == EventStatus::Created   ? "created"
                : e.status == EventStatus::Pending ? "pending"
                                                   : "recorded")
            << "\n";
    }
    out << "store:\n" << m.dumpStore();
    if (!cfg.diagnostics.empty()) {
        out << "diagnostics:\n";
        for (const Diagnostic& d : cfg.diagnostics) out << "  " << d.message << "\n";
    }
    return out.str();
}

}  // namespace mck
