#include "mpq/cc.hpp"

#include <algorithm>
#include <cmath>

namespace mpq {

std::string to_string(CcKind k) { return k == CcKind::kCubic ? "cubic" : "bbr"; }

CcKind parse_cc(const std::string& s) {
  if (s == "cubic") return CcKind::kCubic;
  if (s == "bbr") return CcKind::kBbr;
  throw ConfigError("unknown congestion controller '" + s + "'");
}

PacerDecision Pacer::allow(Time now) const {
  if (std::isinf(rate_) || now >= next_send_) return {true, now};
  return {false, next_send_};
}

void Pacer::on_sent(std::size_t bytes, Time now) {
  if (std::isinf(rate_) || rate_ <= 0) return;
  const Time base = std::max(now, next_send_);
  next_send_ = base + from_seconds(static_cast<double>(bytes) / rate_);
}

// ---------------------------------------------------------------- Cubic

Cubic::Cubic(CubicParams p) : p_(p), cwnd_(static_cast<double>(p.initial_cwnd)) {}

double Cubic::k_seconds(double w_max_bytes, double c, double beta) {
  return std::cbrt(w_max_bytes / kMss * (1.0 - beta) / c);
}

double Cubic::window_at(double t, double w_max_bytes, double c, double beta) {
  const double k = k_seconds(w_max_bytes, c, beta);
  const double d = t - k;
  return (c * d * d * d + w_max_bytes / kMss) * kMss;
}

void Cubic::exit_slow_start(Time now) {
  in_slow_start_ = false;
  ssthresh_ = cwnd_;
  w_max_ = cwnd_;
  k_ = 0;
  epoch_start_ = now;
}

void Cubic::on_ack(const AckSample& s) {
  if (s.acked_bytes == 0) return;
  if (in_slow_start_) {
    cwnd_ += static_cast<double>(s.acked_bytes);
    const bool rtt_exit = p_.rtt_slow_start_exit && s.has_rtt &&
                          to_seconds(s.latest_rtt - s.ack_delay) > p_.rtt_exit_factor * to_seconds(s.min_rtt);
    if (rtt_exit || cwnd_ >= ssthresh_) exit_slow_start(s.now);
    return;
  }
  const double t = to_seconds(s.now - epoch_start_);
  // K is stored per epoch; exit from slow start uses K = 0.
  const double d = t - k_;
  const double cubic = (p_.c * d * d * d + w_max_ / kMss) * kMss;
  double reno = cubic;
  if (s.has_rtt && s.smoothed_rtt > Duration::zero()) {
    reno = w_max_ * p_.beta +
           3.0 * (1.0 - p_.beta) / (1.0 + p_.beta) * (t / to_seconds(s.smoothed_rtt)) * kMss;
  }
  const double target = std::max(cubic, reno);
  if (target > cwnd_) cwnd_ = std::min(target, cwnd_ + static_cast<double>(s.acked_bytes));
}

void Cubic::on_loss(Time sent_time, Time now) {
  if (in_recovery_ && sent_time <= recovery_start_) return;
  in_recovery_ = true;
  recovery_start_ = now;
  w_max_ = cwnd_;
  cwnd_ = std::max(cwnd_ * p_.beta, static_cast<double>(p_.min_cwnd));
  ssthresh_ = cwnd_;
  k_ = k_seconds(w_max_, p_.c, p_.beta);
  epoch_start_ = now;
  in_slow_start_ = false;
}

double Cubic::pacing_rate(Duration smoothed_rtt) const {
  const double factor = in_slow_start_ ? 2.0 : 1.25;
  return factor * cwnd_ / std::max(to_seconds(smoothed_rtt), 1e-4);
}

// ---------------------------------------------------------------- BBR

Bbr::Bbr(BbrParams p)
    : p_(p), pacing_gain_(p.startup_gain), cwnd_gain_(p.startup_gain), cwnd_(p.initial_cwnd) {}

std::string Bbr::mode() const {
  switch (mode_) {
    case Mode::kStartup: return "startup";
    case Mode::kDrain: return "drain";
    case Mode::kProbeBw: return "probe_bw";
    case Mode::kProbeRtt: return "probe_rtt";
  }
  return "?";
}

double Bbr::target_cwnd() const {
  return cwnd_gain_ * bw_ * to_seconds(min_rtt_);
}

void Bbr::update_bw(const AckSample& s, bool round_start) {
  const std::size_t slot = round_ % p_.bw_window_rounds;
  if (round_start) bw_samples_[slot] = 0;
  if (s.delivery_rate > 0) bw_samples_[slot] = std::max(bw_samples_[slot], s.delivery_rate);
  bw_ = *std::max_element(bw_samples_.begin(),
                          bw_samples_.begin() + static_cast<std::ptrdiff_t>(p_.bw_window_rounds));
}

void Bbr::update_min_rtt(const AckSample& s) {
  if (!s.has_rtt) return;
  const bool expired = has_min_rtt_ && s.now > min_rtt_stamp_ + p_.min_rtt_window;
  if (!has_min_rtt_ || s.latest_rtt <= min_rtt_ || expired) {
    min_rtt_ = s.latest_rtt;
    min_rtt_stamp_ = s.now;
    has_min_rtt_ = true;
  }
  if (expired && mode_ != Mode::kProbeRtt) {
    mode_ = Mode::kProbeRtt;
    pacing_gain_ = 1.0;
    probe_rtt_done_ = s.now + p_.probe_rtt_duration;
    probe_rtt_round_ = round_;
  }
}

void Bbr::check_full_bw(bool round_start) {
  if (filled_pipe_ || !round_start || bw_ <= 0) return;
  if (bw_ >= full_bw_ * 1.25) {
    full_bw_ = bw_;
    full_bw_count_ = 0;
    return;
  }
  if (++full_bw_count_ >= 3) filled_pipe_ = true;
}

void Bbr::enter_probe_bw(Time now) {
  mode_ = Mode::kProbeBw;
  cycle_index_ = 0;
  cycle_stamp_ = now;
  pacing_gain_ = kGainCycle[cycle_index_];
  cwnd_gain_ = p_.cwnd_gain;
}

void Bbr::advance_mode(const AckSample& s) {
  switch (mode_) {
    case Mode::kStartup:
      if (filled_pipe_) {
        mode_ = Mode::kDrain;
        pacing_gain_ = 1.0 / p_.startup_gain;
        cwnd_gain_ = p_.startup_gain;
      }
      break;
    case Mode::kDrain:
      if (static_cast<double>(s.bytes_in_flight) <= bw_ * to_seconds(min_rtt_)) {
        enter_probe_bw(s.now);
      }
      break;
    case Mode::kProbeBw:
      if (s.now - cycle_stamp_ > min_rtt_) {
        cycle_index_ = (cycle_index_ + 1) % kGainCycle.size();
        cycle_stamp_ = s.now;
        pacing_gain_ = kGainCycle[cycle_index_];
      }
      break;
    case Mode::kProbeRtt:
      if (s.now >= probe_rtt_done_ && round_ > probe_rtt_round_) {
        min_rtt_stamp_ = s.now;
        if (filled_pipe_) {
          enter_probe_bw(s.now);
        } else {
          mode_ = Mode::kStartup;
          pacing_gain_ = p_.startup_gain;
          cwnd_gain_ = p_.startup_gain;
        }
      }
      break;
  }
}

void Bbr::set_cwnd() {
  if (mode_ == Mode::kProbeRtt) {
    cwnd_ = p_.min_cwnd;
    return;
  }
  if (bw_ <= 0 || !has_min_rtt_) {
    cwnd_ = p_.initial_cwnd;
    return;
  }
  const std::uint64_t floor = filled_pipe_ ? p_.min_cwnd : p_.initial_cwnd;
  cwnd_ = std::max<std::uint64_t>(static_cast<std::uint64_t>(target_cwnd()), floor);
}

void Bbr::on_ack(const AckSample& s) {
  bool round_start = false;
  if (s.delivery_rate > 0 && s.prior_delivered >= next_round_delivered_) {
    next_round_delivered_ = s.delivered_total;
    ++round_;
    round_start = true;
  }
  last_inflight_ = s.bytes_in_flight;
  update_bw(s, round_start);
  update_min_rtt(s);
  check_full_bw(round_start);
  advance_mode(s);
  set_cwnd();
}

double Bbr::pacing_rate(Duration smoothed_rtt) const {
  if (bw_ > 0) return pacing_gain_ * bw_;
  return pacing_gain_ * static_cast<double>(p_.initial_cwnd) /
         std::max(to_seconds(smoothed_rtt), 1e-4);
}

std::unique_ptr<CongestionController> make_congestion_controller(CcKind kind,
                                                                 bool cubic_rtt_exit) {
  if (kind == CcKind::kBbr) return std::make_unique<Bbr>();
  CubicParams p;
  p.rtt_slow_start_exit = cubic_rtt_exit;
  return std::make_unique<Cubic>(p);
}

}  // namespace mpq
