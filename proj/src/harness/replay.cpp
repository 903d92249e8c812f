#include "mpq/harness/replay.hpp"

#include <limits>

#include "mpq/acktrack.hpp"
#include "mpq/netsim.hpp"
#include "mpq/sendtrack.hpp"
#include "mpq/wire.hpp"

namespace mpq::harness {

namespace {

class Replay {
 public:
  explicit Replay(const ReplaySetup& s)
      : setup_(s),
        alloc_(s.design),
        acks_(AckPolicy{}, s.design == Design::kMultiSpace) {
    for (PathId p : {kUpperPath, kLowerPath}) {
      alloc_.add_path(p);
      netsim::LinkConfig lc;
      lc.bandwidth_bps = s.bandwidth_bps;
      lc.one_way_delay = p == kUpperPath ? s.upper_delay : s.lower_delay;
      lc.capacity_bytes = std::numeric_limits<std::uint32_t>::max();
      links_.emplace_back(lc);
    }
  }

  ReplayResult run() {
    // Round-robin, upper path first, everything handed to the links at t=0.
    for (std::size_t i = 0; i < setup_.packets; ++i) {
      const PathId path = i % 2 == 0 ? kUpperPath : kLowerPath;
      const auto sa = alloc_.assign(path);
      auto res = links_[path].enqueue(kMss + kIpUdpOverhead, sim_.now());
      if (res.dropped) throw Error("replay link dropped a packet");
      sim_.schedule(res.arrival, [this, path, sa] { on_arrival(path, sa); });
    }
    sim_.run_until_idle();
    return std::move(out_);
  }

 private:
  void on_arrival(PathId path, SpaceAssignment sa) {
    const Time now = sim_.now();
    out_.arrivals.push_back({now, path, sa.space, sa.pn});
    const auto r = acks_.on_packet_received(sa.space, sa.pn, path, true, now);
    if (path == kLowerPath && ++lower_seen_ == 4) {
      out_.snapshot = acks_.received(sa.space).intervals();
      for (auto it = out_.acks.rbegin(); it != out_.acks.rend(); ++it) {
        if (it->space == sa.space) {
          out_.prior_ack = *it;
          break;
        }
      }
    }
    if (r.decision.kind == AckDecision::Kind::kSendNow) {
      send_acks();
    } else if (r.decision.kind == AckDecision::Kind::kSchedule) {
      sim_.schedule(r.decision.at, [this] {
        if (acks_.ack_due(sim_.now())) send_acks();
      });
    }
  }

  void send_acks() {
    const PathId active[] = {kUpperPath, kLowerPath};
    for (auto& em : acks_.build_ack_frames(sim_.now(), active)) {
      for (const auto& info : em.frames) {
        // Round-trip through the codec so the record is what went on the wire.
        const auto bytes = wire::encode_frame(info.frame);
        const auto decoded = std::get<wire::AckFrame>(wire::decode_frame(bytes).frame);
        out_.acks.push_back(
            {sim_.now(), em.path, info.space, decoded.multipath(), decoded.ranges});
      }
    }
  }

  ReplaySetup setup_;
  netsim::Simulator sim_;
  PacketNumberAllocator alloc_;
  AckManager acks_;
  std::vector<netsim::Link> links_;
  std::size_t lower_seen_ = 0;
  ReplayResult out_;
};

}  // namespace

ReplayResult reordering_replay(const ReplaySetup& setup) {
  if (setup.packets == 0) throw ConfigError("replay needs at least one packet");
  return Replay(setup).run();
}

}  // namespace mpq::harness
