#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "mpq/cc.hpp"

using namespace mpq;
using std::chrono::milliseconds;

namespace {

Time at_s(double s) { return kTimeZero + from_seconds(s); }

AckSample plain_ack(Time now, std::uint64_t bytes) {
  AckSample s;
  s.now = now;
  s.acked_bytes = bytes;
  return s;
}

// Steady 10 Mbps path with a 20 ms RTT, one ACK per millisecond.
struct SteadyFlow {
  Duration rtt = milliseconds(20);
  double rate = 1.25e6;
  std::uint64_t delivered = 0;
  int tick = 0;

  AckSample next() {
    ++tick;
    const auto per_ms = static_cast<std::uint64_t>(rate / 1000);
    delivered += per_ms;
    const auto inflight = static_cast<std::uint64_t>(rate * to_seconds(rtt));
    AckSample s;
    s.now = kTimeZero + milliseconds(tick);
    s.acked_bytes = per_ms;
    s.bytes_in_flight = inflight;
    s.latest_rtt = rtt;
    s.min_rtt = rtt;
    s.smoothed_rtt = rtt;
    s.has_rtt = true;
    s.delivery_rate = rate;
    s.delivered_total = delivered;
    s.prior_delivered = delivered > inflight ? delivered - inflight : 0;
    return s;
  }
};

}  // namespace

TEST_SUITE("cc") {
  TEST_CASE("cubic K and inflection") {
    const double w_max = 100.0 * kMss;
    const double k = Cubic::k_seconds(w_max, 0.4, 0.7);
    CHECK(k == doctest::Approx(std::cbrt(75.0)).epsilon(1e-12));
    CHECK(k == doctest::Approx(4.217).epsilon(1e-3));
    CHECK(Cubic::window_at(k, w_max, 0.4, 0.7) == doctest::Approx(w_max).epsilon(1e-12));
    CHECK(Cubic::window_at(0, w_max, 0.4, 0.7) == doctest::Approx(0.7 * w_max).epsilon(1e-12));
  }

  TEST_CASE("cubic slow start doubles per window") {
    Cubic c;
    CHECK(c.cwnd() == 10 * kMss);
    c.on_ack(plain_ack(at_s(0.05), 10 * kMss));
    CHECK(c.cwnd() == 20 * kMss);
    CHECK(c.in_slow_start());
  }

  TEST_CASE("cubic loss reaction") {
    Cubic c;
    c.on_ack(plain_ack(at_s(0.01), 90 * kMss));
    REQUIRE(c.cwnd() == 100 * kMss);
    c.on_loss(at_s(0.02), at_s(0.1));
    CHECK(c.window() == doctest::Approx(70.0 * kMss).epsilon(1e-12));
    CHECK(c.w_max() == doctest::Approx(100.0 * kMss).epsilon(1e-12));
    CHECK(c.ssthresh() == doctest::Approx(70.0 * kMss).epsilon(1e-12));
    // A second loss from the same round is ignored.
    c.on_loss(at_s(0.05), at_s(0.11));
    CHECK(c.window() == doctest::Approx(70.0 * kMss).epsilon(1e-12));

    // Repeated fresh losses stop at the two-packet floor.
    double t = 1;
    for (int i = 0; i < 30; ++i, t += 1) c.on_loss(at_s(t), at_s(t + 0.5));
    CHECK(c.cwnd() == 2 * kMss);
    c.on_loss(at_s(t + 1), at_s(t + 2));
    CHECK(c.cwnd() == 2 * kMss);
  }

  TEST_CASE("cubic follows the closed form after a loss") {
    CubicParams p;
    p.rtt_slow_start_exit = false;
    Cubic c(p);
    c.on_ack(plain_ack(at_s(0.01), 90 * kMss));
    const Time epoch = at_s(1);
    c.on_loss(at_s(0.5), epoch);
    const double w_max = 100.0 * kMss;
    for (double t = 0.05; t < 12; t += 0.05) {
      // Acked bytes large enough that the window is never ack-limited.
      c.on_ack(plain_ack(epoch + from_seconds(t), 1u << 30));
      const double want = Cubic::window_at(t, w_max, 0.4, 0.7);
      // The stored epoch time is whole nanoseconds; compare at that instant.
      const double t_ns = to_seconds(from_seconds(t));
      const double want_ns = Cubic::window_at(t_ns, w_max, 0.4, 0.7);
      REQUIRE(std::abs(c.window() - want_ns) <= 1e-9 * want_ns);
      REQUIRE(std::abs(c.window() - want) <= 1e-6 * want);
    }
  }

  TEST_CASE("cubic RTT exit ignores the receiver's ACK delay") {
    Cubic c{CubicParams{}};
    AckSample s = plain_ack(at_s(0.1), kMss);
    s.has_rtt = true;
    s.min_rtt = milliseconds(100);
    s.latest_rtt = milliseconds(125) + Duration(1000);
    s.ack_delay = milliseconds(25);
    c.on_ack(s);
    CHECK(c.in_slow_start());
    s.ack_delay = Duration::zero();
    c.on_ack(s);
    CHECK_FALSE(c.in_slow_start());
  }

  TEST_CASE("cubic window is continuous across slow-start exit") {
    CubicParams p;
    Cubic c(p);
    AckSample s = plain_ack(at_s(0.1), 5 * kMss);
    s.has_rtt = true;
    s.min_rtt = milliseconds(20);
    s.latest_rtt = milliseconds(30);  // above 1.25 x min
    s.smoothed_rtt = milliseconds(25);
    c.on_ack(s);
    CHECK_FALSE(c.in_slow_start());
    const double at_exit = c.window();
    CHECK(at_exit == doctest::Approx(15.0 * kMss).epsilon(1e-12));
    AckSample later = s;
    later.now = at_s(0.1) + Duration(1);
    later.acked_bytes = 1;
    c.on_ack(later);
    CHECK(std::abs(c.window() - at_exit) < 2.0);

    CubicParams plain;
    plain.rtt_slow_start_exit = false;
    Cubic d(plain);
    d.on_ack(s);
    CHECK(d.in_slow_start());
  }

  TEST_CASE("bbr gain cycle averages to one") {
    const double sum = std::accumulate(Bbr::kGainCycle.begin(), Bbr::kGainCycle.end(), 0.0);
    CHECK(sum / Bbr::kGainCycle.size() == 1.0);
  }

  TEST_CASE("bbr startup paces at 2.89 x bandwidth") {
    Bbr b;
    SteadyFlow f;
    b.on_ack(f.next());
    CHECK(b.state() == Bbr::Mode::kStartup);
    CHECK(b.bottleneck_bw() == doctest::Approx(1.25e6));
    // 10 Mbps estimate -> 28.9 Mbps
    CHECK(b.pacing_rate(milliseconds(20)) * 8 == doctest::Approx(28.9e6).epsilon(1e-9));
  }

  TEST_CASE("bbr reaches probe_bw and cycles through all eight gains") {
    Bbr b;
    SteadyFlow f;
    std::vector<double> gains;
    std::size_t last_index = 99;
    for (int i = 0; i < 3000; ++i) {
      b.on_ack(f.next());
      if (b.state() == Bbr::Mode::kProbeBw && b.cycle_index() != last_index) {
        last_index = b.cycle_index();
        gains.push_back(b.pacing_gain());
        CHECK(b.pacing_rate(f.rtt) == doctest::Approx(b.pacing_gain() * b.bottleneck_bw()));
      }
      if (b.state() != Bbr::Mode::kProbeRtt) {
        const BbrParams bp;
        const double floor = static_cast<double>(
            b.state() == Bbr::Mode::kStartup ? bp.initial_cwnd : bp.min_cwnd);
        REQUIRE(static_cast<double>(b.cwnd()) ==
                doctest::Approx(std::max(std::floor(b.target_cwnd()), floor)));
        REQUIRE(b.target_cwnd() ==
                doctest::Approx(b.cwnd_gain() * b.bottleneck_bw() * to_seconds(b.min_rtt())));
      }
    }
    REQUIRE(gains.size() >= 16);
    const double mean = std::accumulate(gains.begin(), gains.begin() + 8, 0.0) / 8;
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::count(gains.begin(), gains.begin() + 8, 1.0) == 6);
  }

  TEST_CASE("bbr cwnd scales with a wrong min_rtt") {
    Bbr good, bad;
    SteadyFlow g, w;
    w.rtt = milliseconds(180);
    good.on_ack(g.next());
    bad.on_ack(w.next());
    CHECK(bad.target_cwnd() / good.target_cwnd() == doctest::Approx(9.0));
  }

  TEST_CASE("pacer spacing") {
    Pacer p;
    CHECK(p.allow(at_s(0)).allowed);  // unlimited
    p.set_rate(1252.0 / 1e-3);
    const Time t = at_s(1);
    CHECK(p.allow(t).allowed);
    p.on_sent(1252, t);
    const auto d = p.allow(t + Duration(1));
    CHECK_FALSE(d.allowed);
    CHECK(d.wait_until == t + milliseconds(1));
    CHECK(p.allow(t + milliseconds(1)).allowed);
  }

  TEST_CASE("factory and names") {
    CHECK(make_congestion_controller(CcKind::kBbr, true)->mode() == "startup");
    CHECK(make_congestion_controller(CcKind::kCubic, true)->mode() == "slow_start");
    CHECK(parse_cc("bbr") == CcKind::kBbr);
    CHECK_THROWS_AS(parse_cc("reno"), ConfigError);
  }
}
