#include "mpq/sendtrack.hpp"

#include <algorithm>

namespace mpq {

SpaceAssignment PacketNumberAllocator::assign(PathId path) {
  if (!has_path(path)) throw ProtocolError("unknown path " + std::to_string(path));
  const SpaceId space = space_for(path);
  PacketNumber& next = next_[space];
  if (next > wire::kVarIntMax) throw ProtocolError("packet number space exhausted");
  return {space, next++};
}

std::array<std::uint8_t, 12> Nonce::bytes() const {
  std::array<std::uint8_t, 12> out{};
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(path >> (24 - 8 * i));
  for (int i = 0; i < 8; ++i) out[4 + i] = static_cast<std::uint8_t>(pn >> (56 - 8 * i));
  return out;
}

Nonce compute_nonce(Design design, PathId path, PacketNumber pn) {
  if (pn > wire::kVarIntMax) throw ProtocolError("packet number out of range");
  return {design == Design::kSingleSpace ? 0u : path, pn};
}

void RttEstimator::update(Duration latest, Duration ack_delay, Duration max_ack_delay) {
  latest_ = latest;
  latest_ack_delay_ = Duration::zero();
  if (!has_sample_) {
    has_sample_ = true;
    min_rtt_ = latest;
    smoothed_ = latest;
    rttvar_ = latest / 2;
    return;
  }
  min_rtt_ = std::min(min_rtt_, latest);
  ack_delay = std::min(ack_delay, max_ack_delay);
  Duration adjusted = latest;
  if (latest >= min_rtt_ + ack_delay) {
    adjusted = latest - ack_delay;
    latest_ack_delay_ = ack_delay;
  }
  const Duration diff = smoothed_ > adjusted ? smoothed_ - adjusted : adjusted - smoothed_;
  rttvar_ = (3 * rttvar_ + diff) / 4;
  smoothed_ = (7 * smoothed_ + adjusted) / 8;
}

Duration RttEstimator::loss_delay() const {
  const Duration base = std::max(smoothed(), latest_);
  return std::max<Duration>(base * 9 / 8, std::chrono::milliseconds(1));
}

std::string to_string(LossTrigger t) {
  switch (t) {
    case LossTrigger::kThreshold: return "threshold";
    case LossTrigger::kTime: return "time";
    case LossTrigger::kPto: return "pto";
  }
  return "?";
}

void LossRecovery::add_path(PathId path) { paths_.try_emplace(path); }

const SentPacketRecord& LossRecovery::on_packet_sent(SentPacketRecord rec) {
  auto pit = paths_.find(rec.path);
  if (pit == paths_.end()) throw ProtocolError("send on unknown path");
  auto& path = pit->second;
  auto& sp = spaces_[rec.space];
  if (rec.pn != sp.records.size()) {
    throw ProtocolError("packet number reuse or skip in space " + std::to_string(rec.space));
  }
  auto& order = orders_[{rec.space, rec.path}];
  rec.path_seq = order.next_seq++;
  if (rec.in_flight) {
    if (path.bytes_in_flight == 0) {
      path.first_sent_time = rec.sent_time;
      path.delivered_time = rec.sent_time;
      if (path.last_progress < rec.sent_time) path.last_progress = rec.sent_time;
    }
    path.bytes_in_flight += rec.bytes;
    order.queue.push_back(rec.pn);
  }
  rec.delivered = path.delivered;
  rec.delivered_time = path.delivered_time;
  rec.first_sent_time = path.first_sent_time;
  rec.state = PacketState::kInFlight;
  sp.records.push_back(std::move(rec));
  return sp.records.back();
}

const SentPacketRecord* LossRecovery::find(SpaceId space, PacketNumber pn) const {
  auto it = spaces_.find(space);
  if (it == spaces_.end() || pn >= it->second.records.size()) return nullptr;
  return &it->second.records[pn];
}

AckOutcome LossRecovery::on_ack_received(const wire::AckFrame& frame, SpaceId space, Time now) {
  auto sit = spaces_.find(space);
  if (sit == spaces_.end()) throw ProtocolError("ACK for unknown space " + std::to_string(space));
  auto& sp = sit->second;
  if (frame.ranges.empty() || frame.largest >= sp.records.size()) {
    throw ProtocolError("ACK of unsent packet number " + std::to_string(frame.largest));
  }

  AckOutcome out;
  const bool largest_new = !sp.acked.contains(frame.largest);
  std::map<PathId, const SentPacketRecord*> newest_per_path;
  for (const auto& range : frame.ranges) {
    if (range.hi >= sp.records.size() || range.lo > range.hi) {
      throw ProtocolError("ACK range covers unsent packets");
    }
    for (const auto& part : sp.acked.missing(range)) {
      for (PacketNumber pn = part.lo; pn <= part.hi; ++pn) {
        auto& rec = sp.records[pn];
        auto& path = paths_.at(rec.path);
        if (rec.state == PacketState::kLost) {
          rec.state = PacketState::kAcked;
          out.spurious.push_back(&rec);
          continue;
        }
        rec.state = PacketState::kAcked;
        out.newly_acked.push_back(&rec);
        if (rec.in_flight) {
          path.bytes_in_flight -= rec.bytes;
          path.delivered += rec.bytes;
          path.delivered_time = now;
          auto& newest = newest_per_path[rec.path];
          if (!newest || rec.sent_time > newest->sent_time) newest = &rec;
        }
        auto& order = orders_[{space, rec.path}];
        if (!order.largest_acked_seq || rec.path_seq > *order.largest_acked_seq) {
          order.largest_acked_seq = rec.path_seq;
        }
        path.last_progress = now;
        path.pto_count = 0;
      }
    }
    sp.acked.insert(range);
  }

  const auto& largest = sp.records[frame.largest];
  if (largest_new && largest.ack_eliciting) {
    const Duration latest = now - largest.sent_time;
    paths_.at(largest.path).rtt.update(latest, std::chrono::microseconds(frame.ack_delay_us),
                                       peer_max_ack_delay_);
    out.rtt_sample_path = largest.path;
    out.rtt_sample = latest;
  }

  for (auto& [pid, rec] : newest_per_path) {
    auto& path = paths_.at(pid);
    RateSample s;
    const Duration send_elapsed = rec->sent_time - rec->first_sent_time;
    const Duration ack_elapsed = path.delivered_time - rec->delivered_time;
    s.interval = std::max(send_elapsed, ack_elapsed);
    s.prior_delivered = rec->delivered;
    s.delivered = path.delivered - rec->delivered;
    if (s.interval > Duration::zero()) {
      s.delivery_rate = static_cast<double>(s.delivered) / to_seconds(s.interval);
    }
    path.first_sent_time = rec->sent_time;
    out.rate_samples[pid] = s;
  }

  out.lost = detect_losses(space, now);
  return out;
}

void LossRecovery::mark_lost(SentPacketRecord& rec, LossTrigger trigger,
                             std::vector<LostPacket>& out) {
  rec.state = PacketState::kLost;
  rec.declared_lost = true;
  if (rec.in_flight) paths_.at(rec.path).bytes_in_flight -= rec.bytes;
  out.push_back({&rec, trigger});
}

void LossRecovery::detect_path(Space& sp, Order& order, PathId path, Time now,
                               std::vector<LostPacket>& out) {
  order.loss_time.reset();
  while (!order.queue.empty() && sp.records[order.queue.front()].state != PacketState::kInFlight) {
    order.queue.pop_front();
  }
  const Duration delay = paths_.at(path).rtt.loss_delay();
  for (PacketNumber pn : order.queue) {
    auto& rec = sp.records[pn];
    if (rec.state != PacketState::kInFlight) continue;
    // Both thresholds need a later ack on the same path, even under a
    // single shared space.
    if (!order.largest_acked_seq || rec.path_seq >= *order.largest_acked_seq) break;
    if (*order.largest_acked_seq - rec.path_seq >= kPacketThreshold) {
      mark_lost(rec, LossTrigger::kThreshold, out);
    } else if (now - rec.sent_time >= delay) {
      mark_lost(rec, LossTrigger::kTime, out);
    } else {
      order.loss_time = rec.sent_time + delay;
      break;
    }
  }
}

std::vector<LostPacket> LossRecovery::detect_losses(SpaceId space, Time now) {
  std::vector<LostPacket> out;
  auto sit = spaces_.find(space);
  if (sit == spaces_.end()) return out;
  for (auto it = orders_.lower_bound({space, 0}); it != orders_.end() && it->first.first == space;
       ++it) {
    detect_path(sit->second, it->second, it->first.second, now, out);
  }
  return out;
}

std::optional<Time> LossRecovery::loss_timer() const {
  std::optional<Time> best;
  for (const auto& [key, order] : orders_) {
    if (order.loss_time && (!best || *order.loss_time < *best)) best = order.loss_time;
  }
  return best;
}

void LossRecovery::on_loss_timer(Time now, std::vector<LostPacket>& lost) {
  for (auto& [key, order] : orders_) {
    if (order.loss_time && *order.loss_time <= now) {
      detect_path(spaces_.at(key.first), order, key.second, now, lost);
    }
  }
}

std::optional<Time> LossRecovery::pto_deadline(PathId path) const {
  const auto& ps = paths_.at(path);
  if (ps.bytes_in_flight == 0) return std::nullopt;
  std::optional<Time> oldest;
  for (auto it = orders_.begin(); it != orders_.end(); ++it) {
    if (it->first.second != path) continue;
    const auto& sp = spaces_.at(it->first.first);
    for (PacketNumber pn : it->second.queue) {
      const auto& rec = sp.records[pn];
      if (rec.state != PacketState::kInFlight) continue;
      if (!oldest || rec.sent_time < *oldest) oldest = rec.sent_time;
      break;
    }
  }
  if (!oldest) return std::nullopt;
  const Duration base =
      std::max<Duration>(3 * ps.rtt.smoothed(), std::chrono::milliseconds(10));
  return std::max(ps.last_progress, *oldest) + base * (1 << std::min<std::uint32_t>(ps.pto_count, 6));
}

std::optional<LostPacket> LossRecovery::on_pto(PathId path, Time) {
  SentPacketRecord* oldest = nullptr;
  for (auto& [key, order] : orders_) {
    if (key.second != path) continue;
    auto& sp = spaces_.at(key.first);
    for (PacketNumber pn : order.queue) {
      auto& rec = sp.records[pn];
      if (rec.state != PacketState::kInFlight) continue;
      if (!oldest || rec.sent_time < oldest->sent_time) oldest = &rec;
      break;
    }
  }
  if (!oldest) return std::nullopt;
  auto& ps = paths_.at(path);
  ++ps.pto_count;
  std::vector<LostPacket> out;
  mark_lost(*oldest, LossTrigger::kPto, out);
  return out.front();
}

void ByteCounter::split(std::uint64_t at) {
  auto it = steps_.upper_bound(at);
  --it;
  if (it->first != at) steps_.emplace(at, it->second);
}

void ByteCounter::add(Interval iv) {
  split(iv.lo);
  split(iv.hi + 1);
  for (auto it = steps_.find(iv.lo); it != steps_.end() && it->first <= iv.hi; ++it) {
    ++it->second;
    max_ = std::max(max_, it->second);
  }
}

std::uint32_t ByteCounter::at(std::uint64_t offset) const {
  auto it = steps_.upper_bound(offset);
  --it;
  return it->second;
}

std::vector<StreamChunk> RetransmissionLedger::mark_retransmission(const SentPacketRecord& lost) {
  std::vector<StreamChunk> out;
  for (const auto& chunk : lost.stream) {
    if (chunk.length == 0) continue;
    for (const auto& part : acked_.missing({chunk.offset, chunk.offset + chunk.length - 1})) {
      queue_.insert(part);
      out.push_back({part.lo, part.length(), false});
    }
  }
  return out;
}

void RetransmissionLedger::on_acked(const StreamChunk& chunk) {
  if (chunk.length == 0) return;
  const Interval iv{chunk.offset, chunk.offset + chunk.length - 1};
  acked_.insert(iv);
  queue_.remove(iv);
}

std::optional<Interval> RetransmissionLedger::take(std::uint64_t max_len) {
  if (queue_.empty() || max_len == 0) return std::nullopt;
  auto first = *queue_.map().begin();
  Interval iv{first.first, std::min(first.second, first.first + max_len - 1)};
  queue_.remove(iv);
  counts_.add(iv);
  retransmitted_bytes_ += iv.length();
  return iv;
}

}  // namespace mpq
