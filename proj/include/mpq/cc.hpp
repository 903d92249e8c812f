#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "mpq/types.hpp"

namespace mpq {

enum class CcKind { kCubic, kBbr };
std::string to_string(CcKind k);
CcKind parse_cc(const std::string& s);

struct PacerDecision {
  bool allowed = true;
  Time wait_until{};
};

// Token bucket holding a single packet of burst.
class Pacer {
 public:
  static constexpr double kUnlimited = std::numeric_limits<double>::infinity();

  void set_rate(double bytes_per_second) { rate_ = bytes_per_second; }
  double rate() const { return rate_; }

  PacerDecision allow(Time now) const;
  void on_sent(std::size_t bytes, Time now);
  Time next_send_time() const { return next_send_; }

 private:
  double rate_ = kUnlimited;
  Time next_send_{};
};

struct AckSample {
  Time now{};
  std::uint64_t acked_bytes = 0;
  std::uint64_t bytes_in_flight = 0;
  Duration latest_rtt{};
  // Receiver-side delay included in latest_rtt.
  Duration ack_delay{};
  Duration min_rtt{};
  Duration smoothed_rtt{};
  bool has_rtt = false;
  // Delivery-rate sample (bytes/s); zero when unavailable.
  double delivery_rate = 0;
  std::uint64_t prior_delivered = 0;
  std::uint64_t delivered_total = 0;
};

class CongestionController {
 public:
  virtual ~CongestionController() = default;

  virtual void on_ack(const AckSample& s) = 0;
  // A packet sent at `sent_time` was declared lost.
  virtual void on_loss(Time sent_time, Time now) = 0;

  virtual std::uint64_t cwnd() const = 0;
  virtual double pacing_rate(Duration smoothed_rtt) const = 0;
  virtual std::string mode() const = 0;
};

struct CubicParams {
  double c = 0.4;
  double beta = 0.7;
  std::uint64_t initial_cwnd = 10 * kMss;
  std::uint64_t min_cwnd = 2 * kMss;
  // Leave slow start once latest_rtt, less the peer's ACK delay, exceeds
  // this factor of min_rtt.
  bool rtt_slow_start_exit = true;
  double rtt_exit_factor = 1.25;
};

class Cubic final : public CongestionController {
 public:
  explicit Cubic(CubicParams p = {});

  // Closed-form window (bytes) `t` after the epoch start.
  static double window_at(double t_seconds, double w_max_bytes, double c, double beta);
  static double k_seconds(double w_max_bytes, double c, double beta);

  void on_ack(const AckSample& s) override;
  void on_loss(Time sent_time, Time now) override;

  std::uint64_t cwnd() const override { return static_cast<std::uint64_t>(cwnd_); }
  double pacing_rate(Duration smoothed_rtt) const override;
  std::string mode() const override { return in_slow_start_ ? "slow_start" : "congestion_avoidance"; }

  bool in_slow_start() const { return in_slow_start_; }
  // Unrounded window in bytes.
  double window() const { return cwnd_; }
  double w_max() const { return w_max_; }
  double ssthresh() const { return ssthresh_; }
  double k() const { return k_; }

 private:
  void exit_slow_start(Time now);

  CubicParams p_;
  double cwnd_;
  double w_max_ = 0;
  double k_ = 0;
  double ssthresh_ = std::numeric_limits<double>::infinity();
  bool in_slow_start_ = true;
  Time epoch_start_{};
  Time recovery_start_{};
  bool in_recovery_ = false;
};

struct BbrParams {
  double startup_gain = 2.89;
  double cwnd_gain = 2.0;
  std::uint64_t initial_cwnd = 10 * kMss;
  std::uint64_t min_cwnd = 4 * kMss;
  std::size_t bw_window_rounds = 10;
  Duration min_rtt_window = std::chrono::seconds(10);
  Duration probe_rtt_duration = std::chrono::milliseconds(200);
};

// Simplified BBRv1: startup, drain, eight-phase probe_bw and probe_rtt.
class Bbr final : public CongestionController {
 public:
  enum class Mode { kStartup, kDrain, kProbeBw, kProbeRtt };
  static constexpr std::array<double, 8> kGainCycle{1.25, 0.75, 1, 1, 1, 1, 1, 1};

  explicit Bbr(BbrParams p = {});

  void on_ack(const AckSample& s) override;
  void on_loss(Time, Time) override {}

  std::uint64_t cwnd() const override { return cwnd_; }
  double pacing_rate(Duration smoothed_rtt) const override;
  std::string mode() const override;

  Mode state() const { return mode_; }
  double bottleneck_bw() const { return bw_; }
  Duration min_rtt() const { return min_rtt_; }
  double pacing_gain() const { return pacing_gain_; }
  double cwnd_gain() const { return cwnd_gain_; }
  std::size_t cycle_index() const { return cycle_index_; }
  // cwnd_gain * bw * min_rtt in bytes, before the floor.
  double target_cwnd() const;

 private:
  void update_bw(const AckSample& s, bool round_start);
  void update_min_rtt(const AckSample& s);
  void check_full_bw(bool round_start);
  void advance_mode(const AckSample& s);
  void set_cwnd();
  void enter_probe_bw(Time now);

  BbrParams p_;
  Mode mode_ = Mode::kStartup;
  double pacing_gain_;
  double cwnd_gain_;
  std::uint64_t cwnd_;

  std::array<double, 16> bw_samples_{};  // ring of per-round maxima
  std::uint64_t round_ = 0;
  std::uint64_t next_round_delivered_ = 0;
  double bw_ = 0;

  Duration min_rtt_{};
  bool has_min_rtt_ = false;
  Time min_rtt_stamp_{};

  double full_bw_ = 0;
  int full_bw_count_ = 0;
  bool filled_pipe_ = false;

  std::size_t cycle_index_ = 0;
  Time cycle_stamp_{};

  Time probe_rtt_done_{};
  bool probe_rtt_round_done_ = false;
  std::uint64_t probe_rtt_round_ = 0;
  std::uint64_t last_inflight_ = 0;
};

std::unique_ptr<CongestionController> make_congestion_controller(CcKind kind,
                                                                 bool cubic_rtt_exit);

}  // namespace mpq
