#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mpq/rangeset.hpp"
#include "mpq/types.hpp"

namespace mpq::harness {

// Scripted two-path reordering micro-scenario. The sender alternates
// packets over a slow upper path (id 0) and a fast lower path (id 1); the
// receiver runs the regular ACK logic with on-path dispatch.
struct ReplaySetup {
  Design design = Design::kSingleSpace;
  std::size_t packets = 12;
  // Both links serialize a full-size datagram in 1 ms.
  double bandwidth_bps = 10.24e6;
  Duration upper_delay = std::chrono::microseconds(1500);
  Duration lower_delay = Duration::zero();
};

inline constexpr PathId kUpperPath = 0;
inline constexpr PathId kLowerPath = 1;

struct ReplayArrival {
  Time time{};
  PathId path = 0;
  SpaceId space = 0;
  PacketNumber pn = 0;
};

struct ReplayAck {
  Time time{};
  PathId path = 0;  // path the ACK leaves on
  SpaceId space = 0;
  bool multipath = false;
  // Ranges as decoded from the encoded frame, highest first.
  std::vector<Interval> ranges;
};

struct ReplayResult {
  std::vector<ReplayArrival> arrivals;
  std::vector<ReplayAck> acks;
  // Receiver state of the lower path's space right after its 4th arrival,
  // and the last ACK for that space sent before that moment.
  std::vector<Interval> snapshot;
  std::optional<ReplayAck> prior_ack;
};

ReplayResult reordering_replay(const ReplaySetup& setup = {});

}  // namespace mpq::harness
