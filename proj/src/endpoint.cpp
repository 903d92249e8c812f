#include "mpq/endpoint.hpp"

#include <algorithm>

namespace mpq {

namespace {

constexpr std::uint64_t kStreamId = 0;

std::vector<std::uint8_t> make_cid(Role issuer, std::uint64_t seq) {
  std::vector<std::uint8_t> cid(kCidLength, 0);
  cid[0] = issuer == Role::kClient ? 0xc1 : 0x5e;
  for (std::size_t i = 0; i < 7; ++i) cid[kCidLength - 1 - i] = static_cast<std::uint8_t>(seq >> (8 * i));
  return cid;
}

// Largest STREAM payload that fits in `room` bytes at `offset`.
std::uint64_t stream_fit(std::uint64_t offset, std::size_t room) {
  if (room <= wire::stream_header_size(kStreamId, offset, 1)) return 0;
  std::uint64_t len = room - wire::stream_header_size(kStreamId, offset, room);
  while (len > 0 && wire::stream_header_size(kStreamId, offset, len) + len > room) --len;
  return len;
}

TraceEvent event(Time t, EventType type) {
  TraceEvent e;
  e.time = t;
  e.type = type;
  return e;
}

void earliest(std::optional<Time>& best, std::optional<Time> t) {
  if (t && (!best || *t < *best)) best = t;
}

}  // namespace

bool Connection::Builder::add(wire::Frame f) {
  const std::size_t n = wire::frame_size(f);
  if (n > remaining) return false;
  remaining -= n;
  packet.frames.push_back(std::move(f));
  return true;
}

Connection::Connection(Role role, EndpointConfig cfg, Trace* trace)
    : role_(role),
      cfg_(cfg),
      trace_(trace),
      side_(role == Role::kClient ? Side::kClient : Side::kServer),
      paths_mgr_(cfg.seed * 2 + (role == Role::kClient ? 0 : 1)),
      allocator_(Design::kSingleSpace),
      recovery_(cfg.ack.max_ack_delay),
      window_(cfg.initial_window),
      advertised_(cfg.initial_window) {
  cfg_.ack.validate();
  if (cfg_.path_count == 0) throw ConfigError("path_count must be >= 1");
  if (cfg_.path_count > cfg_.active_cid_limit) {
    throw ConfigError("path_count exceeds active_connection_id_limit");
  }
  if (cfg_.initial_window == 0 || cfg_.max_window < cfg_.initial_window) {
    throw ConfigError("invalid flow-control windows");
  }
}

Connection::~Connection() = default;

void Connection::trace(TraceEvent e) {
  if (!trace_) return;
  e.side = side_;
  trace_->add(std::move(e));
}

const CongestionController* Connection::congestion(PathId path) const {
  auto it = ctx_.find(path);
  return it == ctx_.end() ? nullptr : it->second.cc.get();
}

std::uint64_t Connection::bytes_received() const { return recv_.contiguous_from(0); }

Duration Connection::min_srtt() const {
  std::optional<Duration> best;
  for (PathId p : paths_mgr_.validated_paths()) {
    const auto s = recovery_.rtt(p).smoothed();
    if (!best || s < *best) best = s;
  }
  return best.value_or(RttEstimator::kInitialRtt);
}

Duration Connection::max_srtt() const {
  Duration best{};
  for (PathId p : paths_mgr_.validated_paths()) best = std::max(best, recovery_.rtt(p).smoothed());
  return best > Duration::zero() ? best : RttEstimator::kInitialRtt;
}

// ---------------------------------------------------------------- handshake

void Connection::start(Time now) {
  if (role_ != Role::kClient) throw ProtocolError("only the client starts a connection");
  if (handshake_sent_ > 0) throw ProtocolError("connection already started");
  first_send_time_ = now;
  TraceEvent e = event(now, EventType::kTransferStarted);
  e.bytes = cfg_.transfer_size;
  trace(e);
  send_handshake(now);
}

void Connection::send_handshake(Time now) {
  wire::HandshakeParams hp;
  hp.from_client = role_ == Role::kClient;
  hp.single_space = cfg_.support.single_space;
  hp.multi_space = cfg_.support.multi_space;
  hp.active_cid_limit = cfg_.active_cid_limit;
  hp.initial_max_data = cfg_.initial_window;
  Datagram dg;
  dg.path = 0;
  dg.packet.header.dcid_seq = 0;
  dg.packet.header.pn = handshake_sent_++;
  dg.packet.handshake = hp;
  TraceEvent e = event(now, EventType::kPacketSent);
  e.path = 0;
  e.space = -1;
  e.pn = dg.packet.header.pn;
  e.bytes = dg.size();
  e.flag = true;
  trace(e);
  ++stats_.packets_sent;
  outgoing_.push_back(std::move(dg));
  if (role_ == Role::kClient) handshake_deadline_ = now + cfg_.handshake_timeout;
}

void Connection::on_handshake(const wire::HandshakeParams& hp, PathId path, Time now) {
  if (path != 0) return;
  if (role_ == Role::kServer) {
    if (!hp.from_client) return;
    if (!handshake_done_) {
      peer_initial_max_data_ = hp.initial_max_data;
      complete_handshake(negotiate({hp.single_space, hp.multi_space}, cfg_.support), now);
      send_handshake(now);
      // Connection IDs for the client's extra paths travel right after the flight.
      if (multipath_) {
        for (std::uint64_t seq = 1; seq < std::min(cfg_.active_cid_limit, hp.active_cid_limit);
             ++seq) {
          control_.push_back(wire::NewConnectionIdFrame{seq, 0, make_cid(role_, seq), {}});
        }
      }
    } else {
      send_handshake(now);  // client retransmitted: the flight was lost
    }
    return;
  }
  if (hp.from_client || handshake_done_) return;
  handshake_deadline_.reset();
  peer_initial_max_data_ = hp.initial_max_data;
  complete_handshake(negotiate(cfg_.support, {hp.single_space, hp.multi_space}), now);
}

void Connection::complete_handshake(std::optional<Design> negotiated, Time now) {
  handshake_done_ = true;
  multipath_ = negotiated.has_value();
  design_ = negotiated.value_or(Design::kSingleSpace);
  allocator_ = PacketNumberAllocator(design_);
  ack_ = std::make_unique<AckManager>(cfg_.ack, design_ == Design::kMultiSpace && multipath_);
  peer_max_data_ = peer_initial_max_data_;
  peer_max_stream_data_ = peer_initial_max_data_;

  paths_mgr_.cids().issue(0, make_cid(role_ == Role::kClient ? Role::kServer : Role::kClient, 0));
  paths_mgr_.add_initial_path(0, now);
  ensure_path(0);

  TraceEvent e = event(now, EventType::kHandshakeComplete);
  e.text = multipath_ ? to_string(design_) : "single-path";
  trace(e);

  if (role_ == Role::kClient) {
    paths_mgr_.set_handshake_complete();
    send_total_ = cfg_.request_size;
    if (multipath_) {
      for (std::uint64_t seq = 1; seq < cfg_.path_count; ++seq) {
        control_.push_back(wire::NewConnectionIdFrame{seq, 0, make_cid(role_, seq), {}});
        want_paths_.insert(static_cast<PathId>(seq));
      }
    }
  }
  trace_cc(0, now, true);
}

void Connection::ensure_path(PathId path) {
  if (ctx_.count(path)) return;
  allocator_.add_path(path);
  recovery_.add_path(path);
  auto& c = ctx_[path];
  c.cc = make_congestion_controller(cfg_.cc, cfg_.cubic_rtt_exit);
}

void Connection::maybe_open_paths(Time now) {
  if (!paths_mgr_.handshake_complete()) return;
  for (auto it = want_paths_.begin(); it != want_paths_.end();) {
    const PathId p = *it;
    if (paths_mgr_.validated(p) ||
        (paths_mgr_.known(p) && paths_mgr_.record(p).status == PathStatus::kProbing)) {
      it = want_paths_.erase(it);
      continue;
    }
    if (paths_mgr_.cids().cid(p) == nullptr) {
      ++it;
      continue;
    }
    auto challenge = paths_mgr_.start_path_validation(p, now);
    ensure_path(p);
    ctx_[p].probe_frames.push_back(challenge);
    TraceEvent e = event(now, EventType::kPathChallengeSent);
    e.path = p;
    trace(e);
    it = want_paths_.erase(it);
  }
}

// ---------------------------------------------------------------- receive

void Connection::on_datagram(const Datagram& dg, Time now) {
  if (closed_ || close_sent_) return;
  const auto& pkt = dg.packet;
  TraceEvent rx = event(now, EventType::kPacketReceived);
  rx.path = dg.path;
  rx.space = pkt.handshake ? -1 : static_cast<std::int64_t>(pkt.header.space);
  rx.pn = pkt.header.pn;
  rx.bytes = dg.size();
  trace(rx);

  if (pkt.handshake) {
    on_handshake(*pkt.handshake, dg.path, now);
    flush(now);
    return;
  }
  if (!handshake_done_) return;  // 1-RTT before keys: dropped
  if (role_ == Role::kServer && !peer_confirmed_) {
    peer_confirmed_ = true;
    paths_mgr_.set_handshake_complete();
  }
  if (!ctx_.count(dg.path)) {
    if (!multipath_) return;
    ensure_path(dg.path);
  }
  if (!paths_mgr_.known(dg.path)) paths_mgr_.note_peer_path(dg.path);

  const SpaceId space = allocator_.space_for(dg.path);
  if (pkt.header.space != space) throw ProtocolError("packet number space does not match path");
  auto res = ack_->on_packet_received(space, pkt.header.pn, dg.path, pkt.ack_eliciting(), now);
  if (res.duplicate) {
    TraceEvent e = event(now, EventType::kDuplicateReceived);
    e.path = dg.path;
    e.space = static_cast<std::int64_t>(space);
    e.pn = pkt.header.pn;
    trace(e);
    return;
  }
  for (const auto& f : pkt.frames) {
    process_frame(f, dg.path, now);
    if (closed_) return;
  }
  maybe_open_paths(now);
  check_done(now);
  flush(now);
}

void Connection::process_frame(const wire::Frame& f, PathId path, Time now) {
  std::visit(
      [&](const auto& fr) {
        using T = std::decay_t<decltype(fr)>;
        if constexpr (std::is_same_v<T, wire::AckFrame>) {
          process_ack(fr, now);
        } else if constexpr (std::is_same_v<T, wire::StreamFrame>) {
          process_stream(fr, now);
        } else if constexpr (std::is_same_v<T, wire::PathChallengeFrame>) {
          auto r = paths_mgr_.on_path_frame(f, path, now);
          if (r.reply) ctx_[path].probe_frames.push_back(*r.reply);
          if (!paths_mgr_.validated(path)) want_paths_.insert(path);
        } else if constexpr (std::is_same_v<T, wire::PathResponseFrame>) {
          auto r = paths_mgr_.on_path_frame(f, path, now);
          if (r.validated) {
            TraceEvent e = event(now, EventType::kPathValidated);
            e.path = path;
            trace(e);
            trace_cc(path, now, true);
          }
        } else if constexpr (std::is_same_v<T, wire::NewConnectionIdFrame>) {
          paths_mgr_.cids().issue(fr.seq, fr.cid);
        } else if constexpr (std::is_same_v<T, wire::AckFrequencyFrame>) {
          ack_->apply_ack_frequency(fr);
        } else if constexpr (std::is_same_v<T, wire::ConnectionCloseFrame>) {
          closed_ = true;
          completion_time_ = now;
          TraceEvent e = event(now, EventType::kCloseReceived);
          e.path = path;
          trace(e);
          if (first_send_time_) {
            TraceEvent done = event(now, EventType::kTransferComplete);
            done.value = to_seconds(now - *first_send_time_);
            trace(done);
          }
        } else if constexpr (std::is_same_v<T, wire::MaxDataFrame>) {
          peer_max_data_ = std::max(peer_max_data_, fr.limit);
        } else if constexpr (std::is_same_v<T, wire::MaxStreamDataFrame>) {
          if (fr.stream_id == kStreamId) peer_max_stream_data_ = std::max(peer_max_stream_data_, fr.limit);
        }
      },
      f);
}

void Connection::process_stream(const wire::StreamFrame& f, Time now) {
  if (f.stream_id != kStreamId) throw ProtocolError("unexpected stream id");
  if (f.offset + f.length > advertised_) throw ProtocolError("flow control limit exceeded");
  if (f.length > 0) recv_.insert(Interval{f.offset, f.offset + f.length - 1});
  if (f.fin) final_size_ = f.offset + f.length;

  const std::uint64_t delivered = recv_.contiguous_from(0);
  if (role_ == Role::kServer && final_size_ && delivered >= *final_size_ && !send_total_) {
    send_total_ = cfg_.transfer_size;
  }
  if (final_size_ && advertised_ >= *final_size_) return;
  if (advertised_ - delivered < window_ / 2) {
    if (last_window_update_ && now - *last_window_update_ < max_srtt()) {
      window_ = std::min(window_ * 2, cfg_.max_window);
    }
    advertised_ = delivered + window_;
    last_window_update_ = now;
    std::erase_if(control_, [](const wire::Frame& fr) {
      return std::holds_alternative<wire::MaxDataFrame>(fr) ||
             std::holds_alternative<wire::MaxStreamDataFrame>(fr);
    });
    control_.push_back(wire::MaxDataFrame{advertised_});
    control_.push_back(wire::MaxStreamDataFrame{kStreamId, advertised_});
    TraceEvent e = event(now, EventType::kMaxDataSent);
    e.count = advertised_;
    trace(e);
  }
}

void Connection::on_stream_acked(const SentPacketRecord& rec) {
  for (const auto& chunk : rec.stream) {
    if (chunk.length > 0) ledger_.on_acked(chunk);
    if (chunk.fin) fin_acked_ = true;
  }
  for (const auto& ca : rec.acks) ack_->on_ack_of_ack(ca.space, ca.ranges);
}

void Connection::process_ack(const wire::AckFrame& f, Time now) {
  SpaceId space = 0;
  if (f.path_id) {
    if (design_ != Design::kMultiSpace) throw ProtocolError("ACK_MP without multiple spaces");
    space = *f.path_id;
  }
  if (!recovery_.has_space(space)) throw ProtocolError("ACK for a space with no packets sent");
  const auto prev_largest = largest_acked_.count(space) ? std::optional(largest_acked_[space])
                                                        : std::nullopt;
  auto out = recovery_.on_ack_received(f, space, now);

  bool reordered = false;
  std::map<PathId, std::uint64_t> acked_bytes;
  for (const auto* rec : out.newly_acked) {
    on_stream_acked(*rec);
    if (rec->in_flight) acked_bytes[rec->path] += rec->bytes;
    if (prev_largest && rec->pn < *prev_largest) reordered = true;
  }
  for (const auto* rec : out.spurious) {
    on_stream_acked(*rec);
    reordered = true;
    ++stats_.spurious_losses;
    TraceEvent e = event(now, EventType::kSpuriousLoss);
    e.path = rec->path;
    e.space = static_cast<std::int64_t>(rec->space);
    e.pn = rec->pn;
    trace(e);
  }
  if (!prev_largest || f.largest > *prev_largest) largest_acked_[space] = f.largest;

  if (out.rtt_sample_path) {
    const auto& rtt = recovery_.rtt(*out.rtt_sample_path);
    TraceEvent e = event(now, EventType::kRttSample);
    e.path = *out.rtt_sample_path;
    e.value = to_ms(*out.rtt_sample);
    e.value2 = to_ms(rtt.smoothed());
    trace(e);
  }

  for (const auto& [pid, bytes] : acked_bytes) {
    const auto& rtt = recovery_.rtt(pid);
    AckSample s;
    s.now = now;
    s.acked_bytes = bytes;
    s.bytes_in_flight = recovery_.bytes_in_flight(pid);
    s.has_rtt = rtt.has_sample() && out.rtt_sample_path == pid;
    s.latest_rtt = rtt.latest();
    s.ack_delay = rtt.latest_ack_delay();
    s.min_rtt = rtt.min_rtt();
    s.smoothed_rtt = rtt.smoothed();
    if (auto it = out.rate_samples.find(pid); it != out.rate_samples.end()) {
      s.delivery_rate = it->second.delivery_rate;
      s.prior_delivered = it->second.prior_delivered;
      s.delivered_total = it->second.prior_delivered + it->second.delivered;
    }
    ctx_.at(pid).cc->on_ack(s);
    trace_cc(pid, now, false);
  }
  for (const auto& lp : out.lost) on_lost(lp, now);

  if (reordered && !ack_frequency_sent_ && cfg_.send_ack_frequency &&
      cfg_.ack.ack_frequency_enabled && !cfg_.ack.pquic_mode && send_total_ &&
      role_ == Role::kServer) {
    ack_frequency_sent_ = true;
    wire::AckFrequencyFrame af;
    af.seq = 1;
    af.packet_threshold = cfg_.ack_frequency_threshold;
    af.max_ack_delay_us =
        static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::microseconds>(
                                       cfg_.ack.max_ack_delay)
                                       .count());
    af.ignore_reorder = true;
    control_.push_back(af);
    TraceEvent e = event(now, EventType::kAckFrequencySent);
    e.count = af.packet_threshold;
    e.flag = true;
    trace(e);
  }
}

void Connection::on_lost(const LostPacket& lp, Time now) {
  const auto& rec = *lp.record;
  ++stats_.packets_lost;
  TraceEvent e = event(now, EventType::kPacketLost);
  e.path = rec.path;
  e.space = static_cast<std::int64_t>(rec.space);
  e.pn = rec.pn;
  e.text = to_string(lp.trigger);
  trace(e);

  ledger_.mark_retransmission(rec);
  for (const auto& chunk : rec.stream) {
    if (chunk.fin && chunk.length == 0 && !fin_acked_) fin_sent_ = false;
  }
  for (const auto& f : rec.control) {
    if (const auto* ch = std::get_if<wire::PathChallengeFrame>(&f)) {
      if (!paths_mgr_.validated(rec.path)) ctx_.at(rec.path).probe_frames.push_back(*ch);
    } else if (const auto* md = std::get_if<wire::MaxDataFrame>(&f)) {
      if (md->limit == advertised_) control_.push_back(f);
    } else if (const auto* msd = std::get_if<wire::MaxStreamDataFrame>(&f)) {
      if (msd->limit == advertised_) control_.push_back(f);
    } else if (std::holds_alternative<wire::NewConnectionIdFrame>(f) ||
               std::holds_alternative<wire::AckFrequencyFrame>(f)) {
      control_.push_back(f);
    }
  }
  if (lp.trigger != LossTrigger::kPto && rec.in_flight) {
    ctx_.at(rec.path).cc->on_loss(rec.sent_time, now);
    trace_cc(rec.path, now, true);
  }
}

void Connection::trace_cc(PathId path, Time now, bool force) {
  auto& c = ctx_.at(path);
  const auto mode = c.cc->mode();
  if (!force && mode == c.last_mode) return;
  c.last_mode = mode;
  TraceEvent e = event(now, EventType::kCcState);
  e.path = path;
  e.count = c.cc->cwnd();
  e.value = c.cc->pacing_rate(recovery_.rtt(path).smoothed());
  e.text = mode;
  trace(e);
}

void Connection::check_done(Time now) {
  if (role_ != Role::kServer || close_sent_ || !send_total_) return;
  const std::uint64_t total = *send_total_;
  const bool data_acked = total == 0 || ledger_.acked().covers({0, total - 1});
  if (data_acked && fin_acked_) send_close(now);
}

void Connection::send_close(Time now) {
  if (!close_sent_) {
    close_sent_ = true;
    Duration best{};
    bool first = true;
    for (PathId p : paths_mgr_.validated_paths()) {
      const auto s = recovery_.rtt(p).smoothed();
      if (first || s < best) {
        best = s;
        close_path_ = p;
        first = false;
      }
    }
  }
  Builder b;
  b.add(wire::ConnectionCloseFrame{0, 0, ""});
  emit(b, close_path_, now);
  ++close_count_;
  if (close_count_ <= cfg_.close_retransmits) {
    close_deadline_ = now + 3 * recovery_.rtt(close_path_).smoothed();
  } else {
    close_deadline_.reset();
  }
}

// ---------------------------------------------------------------- timers

std::optional<Time> Connection::next_wakeup() const {
  if (closed_) return std::nullopt;
  if (close_sent_) return close_deadline_;
  std::optional<Time> best;
  earliest(best, handshake_deadline_);
  if (!handshake_done_) return best;
  earliest(best, ack_->next_deadline());
  earliest(best, recovery_.loss_timer());
  for (const auto& [p, c] : ctx_) earliest(best, recovery_.pto_deadline(p));
  earliest(best, pacing_wakeup_);
  return best;
}

void Connection::on_wakeup(Time now) {
  if (closed_) return;
  if (close_sent_) {
    if (close_deadline_ && *close_deadline_ <= now) send_close(now);
    return;
  }
  if (handshake_deadline_ && *handshake_deadline_ <= now && !handshake_done_) {
    send_handshake(now);
  }
  if (!handshake_done_) return;
  if (auto t = recovery_.loss_timer(); t && *t <= now) {
    std::vector<LostPacket> lost;
    recovery_.on_loss_timer(now, lost);
    for (const auto& lp : lost) on_lost(lp, now);
  }
  for (auto& [p, c] : ctx_) {
    auto d = recovery_.pto_deadline(p);
    if (!d || *d > now) continue;
    if (auto lp = recovery_.on_pto(p, now)) {
      on_lost(*lp, now);
      c.pto_probe = true;
      c.ping_pending = true;
    }
  }
  flush(now);
}

// ---------------------------------------------------------------- send

std::vector<Datagram> Connection::take_outgoing() {
  std::vector<Datagram> out;
  out.swap(outgoing_);
  return out;
}

bool Connection::new_data_available() const {
  if (!send_total_) return false;
  const std::uint64_t limit = std::min(peer_max_data_, peer_max_stream_data_);
  if (next_offset_ < *send_total_ && next_offset_ < limit) return true;
  return *send_total_ == 0 && !fin_sent_;
}

bool Connection::payload_pending() const {
  return !control_.empty() || ledger_.pending() || new_data_available();
}

bool Connection::can_send_data(PathId path, Time now) {
  auto& c = ctx_.at(path);
  if (!c.pto_probe && recovery_.bytes_in_flight(path) >= c.cc->cwnd()) return false;
  if (!cfg_.pacing) return true;
  c.pacer.set_rate(c.cc->pacing_rate(recovery_.rtt(path).smoothed()));
  auto d = c.pacer.allow(now);
  if (!d.allowed) {
    if (!pacing_wakeup_ || d.wait_until < *pacing_wakeup_) pacing_wakeup_ = d.wait_until;
    return false;
  }
  return true;
}

void Connection::flush(Time now) {
  if (closed_ || close_sent_ || !handshake_done_) return;
  pacing_wakeup_.reset();
  send_probes(now);
  if (ack_->ack_due(now)) send_due_acks(now);
  while (send_one(now)) {
  }
  check_done(now);
}

void Connection::add_acks(Builder& b, const std::vector<AckFrameInfo>& frames, PathId path,
                          Time now) {
  for (const auto& info : frames) {
    if (!b.add(info.frame)) continue;
    b.record.acks.push_back({info.space, info.frame.ranges});
    ++stats_.ack_frames;
    stats_.ack_ranges += info.frame.ranges.size();
    stats_.ack_bytes += info.bytes;
    if (info.at_limit) ++stats_.ack_frames_at_limit;
    TraceEvent e = event(now, EventType::kAckGenerated);
    e.path = path;
    e.space = static_cast<std::int64_t>(info.space);
    e.count = info.frame.ranges.size();
    e.flag = info.at_limit;
    e.bytes = info.bytes;
    trace(e);
  }
}

void Connection::maybe_add_ping(Builder& b, Time now) {
  // Data receivers elicit an acknowledgment about once per RTT so that
  // their ACK ranges can be pruned.
  if (role_ != Role::kClient) return;
  if (last_ping_ && now - *last_ping_ < min_srtt()) return;
  if (b.packet.ack_eliciting()) {
    last_ping_ = now;
    return;
  }
  if (b.add(wire::PingFrame{})) last_ping_ = now;
}

void Connection::send_probes(Time now) {
  for (auto& [p, c] : ctx_) {
    if (c.probe_frames.empty()) continue;
    Builder b;
    for (auto& f : c.probe_frames) {
      if (std::holds_alternative<wire::PathChallengeFrame>(f)) b.record.control.push_back(f);
      b.add(std::move(f));
    }
    c.probe_frames.clear();
    if (ack_->next_deadline()) {
      const PathId only[] = {p};
      auto em = ack_->build_ack_frames(now, only);
      if (!em.empty()) add_acks(b, em.front().frames, p, now);
    }
    emit(b, p, now);
  }
}

void Connection::send_due_acks(Time now) {
  const auto active = paths_mgr_.validated_paths();
  for (auto& em : ack_->build_ack_frames(now, active)) {
    Builder b;
    add_acks(b, em.frames, em.path, now);
    maybe_add_ping(b, now);
    if (payload_pending() && can_send_data(em.path, now)) add_payload(b, em.path);
    emit(b, em.path, now);
  }
}

bool Connection::send_one(Time now) {
  const auto paths = paths_mgr_.validated_paths();
  if (paths.empty()) return false;
  const bool pending = payload_pending();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::size_t idx = (rr_next_ + i) % paths.size();
    const PathId p = paths[idx];
    auto& c = ctx_.at(p);
    if (!pending && !c.ping_pending) continue;
    if (!can_send_data(p, now)) continue;
    Builder b;
    if (ack_->next_deadline()) {
      const PathId only[] = {p};
      auto em = ack_->build_ack_frames(now, only);
      if (!em.empty()) add_acks(b, em.front().frames, p, now);
    }
    add_payload(b, p);
    if (!b.packet.ack_eliciting()) {
      if (b.packet.frames.empty()) return false;
      b.add(wire::PingFrame{});
    }
    emit(b, p, now);
    rr_next_ = idx + 1;
    return true;
  }
  return false;
}

void Connection::add_payload(Builder& b, PathId path) {
  auto& c = ctx_.at(path);
  while (!control_.empty() && wire::frame_size(control_.front()) <= b.remaining) {
    b.record.control.push_back(control_.front());
    b.add(std::move(control_.front()));
    control_.pop_front();
  }
  if (c.ping_pending) {
    if (b.add(wire::PingFrame{})) c.ping_pending = false;
  }
  if (!send_total_) return;
  const std::uint64_t total = *send_total_;

  while (ledger_.pending()) {
    const std::uint64_t off = ledger_.queue().min();
    const std::uint64_t room = stream_fit(off, b.remaining);
    if (room == 0) break;
    auto iv = ledger_.take(room);
    const bool fin = iv->hi + 1 == total;
    wire::StreamFrame sf{kStreamId, iv->lo, iv->length(), fin};
    b.record.stream.push_back({sf.offset, sf.length, fin});
    b.add(sf);
    // Timestamped and traced once the packet is emitted.
    TraceEvent e = event(Time{}, EventType::kStreamRetransmit);
    e.offset = iv->lo;
    e.length = iv->length();
    e.count = ledger_.count_at(iv->lo);
    pending_retx_.push_back(e);
  }

  const std::uint64_t limit = std::min({peer_max_data_, peer_max_stream_data_, total});
  if (next_offset_ < limit) {
    const std::uint64_t room = stream_fit(next_offset_, b.remaining);
    const std::uint64_t len = std::min(room, limit - next_offset_);
    if (len > 0) {
      const bool fin = next_offset_ + len == total;
      wire::StreamFrame sf{kStreamId, next_offset_, len, fin};
      b.record.stream.push_back({sf.offset, sf.length, fin});
      b.add(sf);
      next_offset_ += len;
      if (fin) fin_sent_ = true;
    }
  } else if (total == 0 && !fin_sent_) {
    wire::StreamFrame sf{kStreamId, 0, 0, true};
    if (b.add(sf)) {
      b.record.stream.push_back({0, 0, true});
      fin_sent_ = true;
    }
  }
}

void Connection::emit(Builder& b, PathId path, Time now) {
  if (b.packet.frames.empty()) return;
  const auto a = allocator_.assign(path);
  b.packet.header = {path, a.pn, a.space};
  const std::size_t size = b.packet.size();
  const bool eliciting = b.packet.ack_eliciting();

  auto& rec = b.record;
  rec.pn = a.pn;
  rec.space = a.space;
  rec.path = path;
  rec.sent_time = now;
  rec.bytes = size;
  rec.ack_eliciting = eliciting;
  rec.in_flight = eliciting;
  recovery_.on_packet_sent(std::move(rec));
  ++stats_.packets_sent;
  if (!first_send_time_) first_send_time_ = now;

  TraceEvent e = event(now, EventType::kPacketSent);
  e.path = path;
  e.space = static_cast<std::int64_t>(a.space);
  e.pn = a.pn;
  e.bytes = size;
  e.flag = eliciting;
  trace(e);
  for (auto& r : pending_retx_) {
    r.time = now;
    trace(r);
  }
  pending_retx_.clear();
  for (const auto& f : b.packet.frames) {
    if (const auto* sf = std::get_if<wire::StreamFrame>(&f)) {
      stats_.stream_bytes_sent += sf->length;
      TraceEvent s = event(now, EventType::kStreamFrameSent);
      s.path = path;
      s.space = static_cast<std::int64_t>(a.space);
      s.pn = a.pn;
      s.offset = sf->offset;
      s.length = sf->length;
      s.flag = sf->fin;
      trace(s);
    }
  }

  auto& c = ctx_.at(path);
  if (eliciting) {
    c.pto_probe = false;
    if (cfg_.pacing) {
      c.pacer.set_rate(c.cc->pacing_rate(recovery_.rtt(path).smoothed()));
      c.pacer.on_sent(size, now);
    }
  }
  outgoing_.push_back({path, std::move(b.packet)});
}

}  // namespace mpq
