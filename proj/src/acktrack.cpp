#include "mpq/acktrack.hpp"

#include <algorithm>

namespace mpq {

std::string to_string(RangeStrategy s) {
  return s == RangeStrategy::kLargestFirst ? "largest-first" : "lowest-first";
}

std::string to_string(AckDispatch d) {
  return d == AckDispatch::kOnPath ? "on-path" : "duplicate";
}

RangeStrategy parse_strategy(const std::string& s) {
  if (s == "largest-first") return RangeStrategy::kLargestFirst;
  if (s == "lowest-first") return RangeStrategy::kLowestFirst;
  throw ConfigError("unknown range strategy '" + s + "'");
}

AckDispatch parse_dispatch(const std::string& s) {
  if (s == "on-path") return AckDispatch::kOnPath;
  if (s == "duplicate" || s == "duplicate-all") return AckDispatch::kDuplicateAll;
  throw ConfigError("unknown ack dispatch '" + s + "'");
}

void AckPolicy::validate() const {
  if (packet_threshold < 1) throw ConfigError("packet_threshold must be >= 1");
  if (max_ack_delay < Duration::zero()) throw ConfigError("max_ack_delay must be >= 0");
}

std::vector<Interval> select_ranges(const RangeSet& rs, std::uint64_t ab_limit,
                                    RangeStrategy strategy) {
  if (rs.empty()) throw ProtocolError("nothing to acknowledge");
  const auto& map = rs.map();
  const std::uint64_t slots = ab_limit == kUnlimitedAckBlocks ? map.size() - 1
                                                               : std::min<std::uint64_t>(ab_limit, map.size() - 1);
  std::vector<Interval> out;
  out.reserve(slots + 1);
  auto top = map.rbegin();
  out.push_back({top->first, top->second});
  if (strategy == RangeStrategy::kLargestFirst) {
    auto it = std::next(top);
    for (std::uint64_t i = 0; i < slots; ++i, ++it) out.push_back({it->first, it->second});
  } else {
    auto it = map.begin();
    for (std::uint64_t i = 0; i < slots; ++i, ++it) out.push_back({it->first, it->second});
  }
  return out;
}

AckManager::AckManager(AckPolicy policy, bool multipath_frames)
    : policy_(policy), multipath_frames_(multipath_frames) {
  policy_.validate();
}

ReceiveResult AckManager::on_packet_received(SpaceId space, PacketNumber pn, PathId path,
                                             bool ack_eliciting, Time now) {
  auto& sp = spaces_[space];
  last_rx_path_ = path;
  if (sp.received.contains(pn) || sp.pruned.contains(pn)) {
    ++duplicates_;
    return {true, AckDecision::none()};
  }
  const bool gap = sp.largest ? pn > *sp.largest + 1 : pn > 0;
  const bool out_of_order = sp.largest && pn < *sp.largest;
  sp.received.insert(pn);
  if (!sp.largest || pn > *sp.largest) {
    sp.largest = pn;
    sp.largest_rx_time = now;
  }
  sp.pending = true;
  if (!ack_eliciting) return {false, AckDecision::none()};

  ++sp.eliciting_since_ack;
  bool immediate = false;
  if (policy_.pquic_mode) {
    immediate = ++pquic_counters_[path] >= 2;
  } else {
    immediate = sp.eliciting_since_ack >= policy_.packet_threshold ||
                ((gap || out_of_order) && !policy_.ignore_reorder);
  }
  if (immediate) {
    sp.send_now = true;
    return {false, AckDecision::send_now()};
  }
  if (!sp.deadline) sp.deadline = now + policy_.max_ack_delay;
  return {false, AckDecision::schedule(*sp.deadline)};
}

bool AckManager::ack_due(Time now) const {
  return std::any_of(spaces_.begin(), spaces_.end(), [&](const auto& kv) {
    return kv.second.send_now || (kv.second.deadline && *kv.second.deadline <= now);
  });
}

std::optional<Time> AckManager::next_deadline() const {
  std::optional<Time> best;
  for (const auto& [id, sp] : spaces_) {
    if (sp.deadline && (!best || *sp.deadline < *best)) best = sp.deadline;
  }
  return best;
}

bool AckManager::has_unacked() const {
  return std::any_of(spaces_.begin(), spaces_.end(),
                     [](const auto& kv) { return kv.second.pending; });
}

std::vector<Interval> AckManager::fit_ranges(std::vector<Interval> ranges, std::size_t budget,
                                             std::optional<std::uint64_t> path_id) {
  wire::AckFrame probe;
  probe.path_id = path_id;
  probe.largest = ranges.front().hi;
  probe.ranges = std::move(ranges);
  while (probe.ranges.size() > 1 && wire::frame_size(probe) > budget) probe.ranges.pop_back();
  return std::move(probe.ranges);
}

std::vector<AckEmission> AckManager::build_ack_frames(Time now,
                                                      std::span<const PathId> active_paths) {
  const bool include_all =
      policy_.dispatch == AckDispatch::kDuplicateAll || policy_.pquic_mode;
  std::vector<SpaceId> ids;
  for (const auto& [id, sp] : spaces_) {
    if (!sp.received.empty() && (include_all || sp.pending)) ids.push_back(id);
  }
  if (ids.empty() || active_paths.empty()) return {};

  // Leave room for a PING and a few control frames next to the ACKs.
  const std::size_t budget = (kMss - kPacketOverhead - 32) / ids.size();
  std::vector<AckFrameInfo> frames;
  for (SpaceId id : ids) {
    auto& sp = spaces_[id];
    auto ranges = select_ranges(sp.received, policy_.ab_limit, policy_.strategy);
    const bool at_limit =
        policy_.ab_limit != kUnlimitedAckBlocks && ranges.size() == policy_.ab_limit + 1;
    std::sort(ranges.begin(), ranges.end(),
              [](const Interval& a, const Interval& b) { return a.lo > b.lo; });
    std::optional<std::uint64_t> path_id;
    if (multipath_frames_) path_id = id;
    ranges = fit_ranges(std::move(ranges), budget, path_id);

    AckFrameInfo info;
    info.space = id;
    info.at_limit = at_limit;
    info.frame.path_id = path_id;
    info.frame.largest = ranges.front().hi;
    const auto delay_us =
        std::chrono::duration_cast<std::chrono::microseconds>(now - sp.largest_rx_time).count();
    info.frame.ack_delay_us =
        (static_cast<std::uint64_t>(std::max<std::int64_t>(delay_us, 0)) >> wire::kAckDelayExponent)
        << wire::kAckDelayExponent;
    info.frame.ranges = std::move(ranges);
    info.bytes = wire::frame_size(info.frame);
    frames.push_back(std::move(info));

    sp.pending = false;
    sp.send_now = false;
    sp.eliciting_since_ack = 0;
    sp.deadline.reset();
  }
  pquic_counters_.clear();

  std::vector<AckEmission> out;
  if (policy_.dispatch == AckDispatch::kDuplicateAll) {
    for (PathId p : active_paths) out.push_back({p, frames});
  } else {
    PathId target = active_paths.front();
    if (last_rx_path_ &&
        std::find(active_paths.begin(), active_paths.end(), *last_rx_path_) != active_paths.end()) {
      target = *last_rx_path_;
    }
    out.push_back({target, std::move(frames)});
  }
  return out;
}

void AckManager::on_ack_of_ack(SpaceId space, std::span<const Interval> ranges) {
  auto it = spaces_.find(space);
  if (it == spaces_.end()) return;
  auto& sp = it->second;
  if (sp.received.empty()) return;
  const std::uint64_t keep = sp.received.max();
  for (const auto& r : ranges) {
    sp.received.remove(r);
    sp.pruned.insert(r);
  }
  // The largest received number stays so Largest Acknowledged never regresses.
  sp.received.insert(keep);
}

void AckManager::apply_ack_frequency(const wire::AckFrequencyFrame& f) {
  if (!policy_.ack_frequency_enabled) return;
  if (seen_ack_frequency_ && f.seq <= last_ack_frequency_seq_) return;
  seen_ack_frequency_ = true;
  last_ack_frequency_seq_ = f.seq;
  policy_.packet_threshold = std::max<std::uint64_t>(f.packet_threshold, 1);
  policy_.max_ack_delay = std::chrono::microseconds(f.max_ack_delay_us);
  policy_.ignore_reorder = f.ignore_reorder;
}

const RangeSet& AckManager::received(SpaceId space) const {
  static const RangeSet kEmpty;
  auto it = spaces_.find(space);
  return it == spaces_.end() ? kEmpty : it->second.received;
}

}  // namespace mpq
