#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "mpq/rangeset.hpp"
#include "mpq/types.hpp"
#include "mpq/wire.hpp"

namespace mpq {

struct SpaceAssignment {
  SpaceId space = 0;
  PacketNumber pn = 0;
  friend bool operator==(const SpaceAssignment&, const SpaceAssignment&) = default;
};

// Hands out packet numbers: one global space (single-space design) or one
// space per path id (multi-space design).
class PacketNumberAllocator {
 public:
  explicit PacketNumberAllocator(Design design) : design_(design) {}

  void add_path(PathId path) { paths_.insert(path); }
  bool has_path(PathId path) const { return paths_.count(path) != 0; }
  SpaceAssignment assign(PathId path);
  SpaceId space_for(PathId path) const {
    return design_ == Design::kSingleSpace ? 0 : path;
  }

 private:
  Design design_;
  std::set<PathId> paths_;
  std::map<SpaceId, PacketNumber> next_;
};

// 96-bit AEAD nonce input: path component and packet number.
struct Nonce {
  std::uint32_t path = 0;
  std::uint64_t pn = 0;
  std::array<std::uint8_t, 12> bytes() const;
  friend auto operator<=>(const Nonce&, const Nonce&) = default;
};

Nonce compute_nonce(Design design, PathId path, PacketNumber pn);

class RttEstimator {
 public:
  static constexpr Duration kInitialRtt = std::chrono::milliseconds(333);

  void update(Duration latest, Duration ack_delay, Duration max_ack_delay);

  bool has_sample() const { return has_sample_; }
  Duration min_rtt() const { return min_rtt_; }
  Duration smoothed() const { return has_sample_ ? smoothed_ : kInitialRtt; }
  Duration rttvar() const { return has_sample_ ? rttvar_ : kInitialRtt / 2; }
  Duration latest() const { return latest_; }
  // Peer ACK delay subtracted from the latest sample; zero when none was.
  Duration latest_ack_delay() const { return latest_ack_delay_; }
  // 9/8 of max(smoothed, latest), at least 1 ms.
  Duration loss_delay() const;

 private:
  bool has_sample_ = false;
  Duration min_rtt_{};
  Duration smoothed_{};
  Duration rttvar_{};
  Duration latest_{};
  Duration latest_ack_delay_{};
};

enum class PacketState { kInFlight, kAcked, kLost };
enum class LossTrigger { kThreshold, kTime, kPto };
std::string to_string(LossTrigger t);

struct StreamChunk {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool fin = false;
  friend bool operator==(const StreamChunk&, const StreamChunk&) = default;
};

struct CarriedAck {
  SpaceId space = 0;
  std::vector<Interval> ranges;
};

struct SentPacketRecord {
  PacketNumber pn = 0;
  SpaceId space = 0;
  PathId path = 0;
  std::uint64_t path_seq = 0;
  Time sent_time{};
  std::size_t bytes = 0;
  bool ack_eliciting = false;
  bool in_flight = false;
  std::vector<StreamChunk> stream;
  std::vector<CarriedAck> acks;
  // Frames other than STREAM/ACK that must be resent if lost.
  std::vector<wire::Frame> control;
  // Delivery-rate snapshot at send time.
  std::uint64_t delivered = 0;
  Time delivered_time{};
  Time first_sent_time{};
  PacketState state = PacketState::kInFlight;
  bool declared_lost = false;
};

struct RateSample {
  double delivery_rate = 0;  // bytes per second
  std::uint64_t prior_delivered = 0;
  std::uint64_t delivered = 0;
  Duration interval{};
};

struct LostPacket {
  const SentPacketRecord* record = nullptr;
  LossTrigger trigger = LossTrigger::kThreshold;
};

struct AckOutcome {
  std::vector<const SentPacketRecord*> newly_acked;
  std::vector<const SentPacketRecord*> spurious;  // acked after declared lost
  std::optional<PathId> rtt_sample_path;
  std::optional<Duration> rtt_sample;
  std::map<PathId, RateSample> rate_samples;
  std::vector<LostPacket> lost;
};

// Sent-packet bookkeeping, RTT estimation and per-path RACK-style loss
// detection. Loss ordering is per path in both designs, so a packet is only
// judged against later packets that travelled the same path.
class LossRecovery {
 public:
  static constexpr std::uint64_t kPacketThreshold = 3;

  explicit LossRecovery(Duration peer_max_ack_delay = std::chrono::milliseconds(25))
      : peer_max_ack_delay_(peer_max_ack_delay) {}

  void add_path(PathId path);
  // Records a sent packet; assigns path_seq and the delivery snapshot.
  const SentPacketRecord& on_packet_sent(SentPacketRecord record);

  AckOutcome on_ack_received(const wire::AckFrame& frame, SpaceId space, Time now);
  std::vector<LostPacket> detect_losses(SpaceId space, Time now);

  // Earliest time-threshold loss deadline over all spaces.
  std::optional<Time> loss_timer() const;
  void on_loss_timer(Time now, std::vector<LostPacket>& lost);

  std::optional<Time> pto_deadline(PathId path) const;
  // Declares the oldest in-flight packet of `path` lost.
  std::optional<LostPacket> on_pto(PathId path, Time now);

  const RttEstimator& rtt(PathId path) const { return paths_.at(path).rtt; }
  std::uint64_t bytes_in_flight(PathId path) const { return paths_.at(path).bytes_in_flight; }
  bool has_space(SpaceId space) const { return spaces_.count(space) != 0; }
  const SentPacketRecord* find(SpaceId space, PacketNumber pn) const;
  void set_peer_max_ack_delay(Duration d) { peer_max_ack_delay_ = d; }

 private:
  struct PathState {
    RttEstimator rtt;
    std::uint64_t bytes_in_flight = 0;
    std::uint64_t delivered = 0;
    Time delivered_time{};
    Time first_sent_time{};
    Time last_progress{};
    std::uint32_t pto_count = 0;
  };
  struct Order {
    std::deque<PacketNumber> queue;  // in-flight pns in send order
    std::uint64_t next_seq = 0;
    std::optional<std::uint64_t> largest_acked_seq;
    std::optional<Time> loss_time;
  };
  struct Space {
    std::deque<SentPacketRecord> records;  // index == pn
    RangeSet acked;
  };

  void mark_lost(SentPacketRecord& rec, LossTrigger trigger, std::vector<LostPacket>& out);
  void detect_path(Space& sp, Order& order, PathId path, Time now, std::vector<LostPacket>& out);

  Duration peer_max_ack_delay_;
  std::map<PathId, PathState> paths_;
  std::map<SpaceId, Space> spaces_;
  std::map<std::pair<SpaceId, PathId>, Order> orders_;
};

// Piecewise-constant per-byte counter over stream offsets.
class ByteCounter {
 public:
  void add(Interval iv);
  std::uint32_t at(std::uint64_t offset) const;
  std::uint32_t max() const { return max_; }

 private:
  void split(std::uint64_t at);
  std::map<std::uint64_t, std::uint32_t> steps_{{0, 0}};
  std::uint32_t max_ = 0;
};

// Tracks acknowledged stream bytes and the retransmission queue, and counts
// how many times each byte has been resent.
class RetransmissionLedger {
 public:
  // Queues the not-yet-acknowledged part of the record's stream data.
  std::vector<StreamChunk> mark_retransmission(const SentPacketRecord& lost);
  void on_acked(const StreamChunk& chunk);

  // Removes up to `max_len` bytes from the front of the queue and counts
  // them as resent.
  std::optional<Interval> take(std::uint64_t max_len);

  bool pending() const { return !queue_.empty(); }
  const RangeSet& acked() const { return acked_; }
  const RangeSet& queue() const { return queue_; }
  std::uint64_t retransmitted_bytes() const { return retransmitted_bytes_; }
  std::uint32_t max_per_byte() const { return counts_.max(); }
  std::uint32_t count_at(std::uint64_t offset) const { return counts_.at(offset); }

 private:
  RangeSet acked_;
  RangeSet queue_;
  ByteCounter counts_;
  std::uint64_t retransmitted_bytes_ = 0;
};

}  // namespace mpq
