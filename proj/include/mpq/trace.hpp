#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpq/types.hpp"

namespace mpq {

enum class Side : std::uint8_t { kClient, kServer, kNetwork };

enum class EventType : std::uint8_t {
  kTransferStarted,
  kHandshakeComplete,
  kPacketSent,
  kPacketReceived,
  kDuplicateReceived,
  kStreamFrameSent,
  kAckGenerated,
  kRttSample,
  kPacketLost,
  kSpuriousLoss,
  kStreamRetransmit,
  kCcState,
  kPathChallengeSent,
  kPathValidated,
  kLinkEnqueue,
  kLinkDeliver,
  kBufferDrop,
  kMaxDataSent,
  kAckFrequencySent,
  kCloseReceived,
  kTransferComplete,
};

std::string to_string(Side s);
std::string to_string(EventType t);

// One trace record. Field meaning depends on `type`; unused fields keep
// their defaults and are not serialized.
struct TraceEvent {
  Time time{};
  EventType type{};
  Side side = Side::kNetwork;
  std::int64_t path = -1;
  std::int64_t space = -1;
  std::uint64_t pn = 0;
  std::uint64_t bytes = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint64_t count = 0;  // n_ranges, nth_time, limit, threshold
  bool flag = false;        // at_limit, fin, ack_eliciting, ignore_reorder
  double value = 0;         // latest rtt (ms), seconds, pacing rate
  double value2 = 0;        // smoothed rtt (ms)
  std::string text;         // trigger, mode, direction, design

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

class Trace {
 public:
  explicit Trace(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  void add(TraceEvent e) {
    if (enabled_) events_.push_back(std::move(e));
  }

  const std::vector<TraceEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  // One JSON object per line: {"time_us":..,"event":..,...}.
  void write_jsonl(std::ostream& out) const;
  static Trace read_jsonl(std::istream& in);

 private:
  bool enabled_;
  std::vector<TraceEvent> events_;
};

std::string to_jsonl_line(const TraceEvent& e);

}  // namespace mpq
