#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpq/rangeset.hpp"
#include "mpq/types.hpp"
#include "mpq/wire.hpp"

namespace mpq {

inline constexpr std::uint64_t kUnlimitedAckBlocks = std::numeric_limits<std::uint64_t>::max();

enum class RangeStrategy { kLargestFirst, kLowestFirst };
enum class AckDispatch { kOnPath, kDuplicateAll };

std::string to_string(RangeStrategy s);
std::string to_string(AckDispatch d);
RangeStrategy parse_strategy(const std::string& s);
AckDispatch parse_dispatch(const std::string& s);

struct AckPolicy {
  std::uint64_t ab_limit = 32;
  RangeStrategy strategy = RangeStrategy::kLargestFirst;
  AckDispatch dispatch = AckDispatch::kOnPath;
  std::uint64_t packet_threshold = 2;
  Duration max_ack_delay = std::chrono::milliseconds(25);
  // Acknowledge every path once two new packets arrive on any path.
  bool pquic_mode = false;
  // Peer may send ACK_FREQUENCY to relax reordering-triggered ACKs.
  bool ack_frequency_enabled = true;
  bool ignore_reorder = false;

  void validate() const;
};

// At most ab_limit + 1 ranges. The range holding the overall largest value
// always comes first; the remaining slots hold the next-highest ranges
// (largest-first, descending) or the lowest ranges (lowest-first,
// ascending). Throws if `rs` is empty.
std::vector<Interval> select_ranges(const RangeSet& rs, std::uint64_t ab_limit,
                                    RangeStrategy strategy);

struct AckDecision {
  enum class Kind { kNone, kSendNow, kSchedule };
  Kind kind = Kind::kNone;
  Time at{};

  static AckDecision none() { return {}; }
  static AckDecision send_now() { return {Kind::kSendNow, {}}; }
  static AckDecision schedule(Time t) { return {Kind::kSchedule, t}; }
  friend bool operator==(const AckDecision&, const AckDecision&) = default;
};

struct ReceiveResult {
  bool duplicate = false;
  AckDecision decision;
};

struct AckFrameInfo {
  SpaceId space = 0;
  wire::AckFrame frame;
  bool at_limit = false;
  std::size_t bytes = 0;
};

// One packet's worth of acknowledgment frames destined to `path`.
struct AckEmission {
  PathId path = 0;
  std::vector<AckFrameInfo> frames;
};

// Receiver state for every packet number space of a connection.
class AckManager {
 public:
  explicit AckManager(AckPolicy policy, bool multipath_frames);

  ReceiveResult on_packet_received(SpaceId space, PacketNumber pn, PathId path,
                                   bool ack_eliciting, Time now);

  // True when some space requires an acknowledgment at `now`.
  bool ack_due(Time now) const;
  std::optional<Time> next_deadline() const;
  bool has_unacked() const;

  // Builds the frames for the current state and resets the triggers of
  // the spaces they cover. `active_paths` are the paths an ACK may use.
  std::vector<AckEmission> build_ack_frames(Time now, std::span<const PathId> active_paths);

  // The peer acknowledged a packet that carried `ranges` for `space`.
  void on_ack_of_ack(SpaceId space, std::span<const Interval> ranges);

  void apply_ack_frequency(const wire::AckFrequencyFrame& f);

  const AckPolicy& policy() const { return policy_; }
  const RangeSet& received(SpaceId space) const;
  std::optional<PathId> last_rx_path() const { return last_rx_path_; }
  std::uint64_t duplicates() const { return duplicates_; }
  bool multipath_frames() const { return multipath_frames_; }

  // Largest range count that fits in one frame of at most `budget` bytes.
  static std::vector<Interval> fit_ranges(std::vector<Interval> ranges, std::size_t budget,
                                          std::optional<std::uint64_t> path_id);

 private:
  struct Space {
    RangeSet received;
    RangeSet pruned;
    std::optional<PacketNumber> largest;
    Time largest_rx_time{};
    std::uint64_t eliciting_since_ack = 0;
    bool pending = false;
    bool send_now = false;
    std::optional<Time> deadline;
  };

  AckPolicy policy_;
  bool multipath_frames_;
  std::map<SpaceId, Space> spaces_;
  std::map<PathId, std::uint64_t> pquic_counters_;
  std::optional<PathId> last_rx_path_;
  std::uint64_t last_ack_frequency_seq_ = 0;
  bool seen_ack_frequency_ = false;
  std::uint64_t duplicates_ = 0;
};

}  // namespace mpq
