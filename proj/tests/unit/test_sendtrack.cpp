#include <random>
#include <set>

#include <doctest.h>

#include "mpq/sendtrack.hpp"

using namespace mpq;
using std::chrono::milliseconds;

namespace {

Time at_ms(double ms) { return kTimeZero + from_seconds(ms / 1000.0); }

SentPacketRecord sent(SpaceId space, PacketNumber pn, PathId path, Time t) {
  SentPacketRecord r;
  r.pn = pn;
  r.space = space;
  r.path = path;
  r.sent_time = t;
  r.bytes = kMss;
  r.ack_eliciting = true;
  r.in_flight = true;
  return r;
}

wire::AckFrame ack(std::vector<Interval> ranges) {
  wire::AckFrame f;
  f.largest = ranges.front().hi;
  f.ranges = std::move(ranges);
  return f;
}

std::vector<PacketNumber> lost_pns(const std::vector<LostPacket>& v) {
  std::vector<PacketNumber> out;
  for (const auto& l : v) out.push_back(l.record->pn);
  return out;
}

}  // namespace

TEST_SUITE("sendtrack") {
  TEST_CASE("assign_pn numbering") {
    PacketNumberAllocator spns(Design::kSingleSpace);
    PacketNumberAllocator mpns(Design::kMultiSpace);
    for (PathId p : {0u, 1u}) {
      spns.add_path(p);
      mpns.add_path(p);
    }
    std::vector<PacketNumber> s0, s1, m0, m1;
    for (int i = 0; i < 6; ++i) {
      const PathId p = i % 2;
      const auto a = spns.assign(p);
      CHECK(a.space == 0);
      (p == 0 ? s0 : s1).push_back(a.pn);
      const auto b = mpns.assign(p);
      CHECK(b.space == p);
      (p == 0 ? m0 : m1).push_back(b.pn);
    }
    CHECK(s0 == std::vector<PacketNumber>{0, 2, 4});
    CHECK(s1 == std::vector<PacketNumber>{1, 3, 5});
    CHECK(m0 == std::vector<PacketNumber>{0, 1, 2});
    CHECK(m1 == std::vector<PacketNumber>{0, 1, 2});

    for (Design d : {Design::kSingleSpace, Design::kMultiSpace}) {
      PacketNumberAllocator one(d);
      one.add_path(0);
      for (PacketNumber i = 0; i < 5; ++i) CHECK(one.assign(0).pn == i);
    }
    CHECK_THROWS_AS(spns.assign(7), ProtocolError);
  }

  TEST_CASE("compute_nonce examples") {
    CHECK(compute_nonce(Design::kMultiSpace, 0, 0) != compute_nonce(Design::kMultiSpace, 1, 0));
    CHECK(compute_nonce(Design::kSingleSpace, 0, 5) == compute_nonce(Design::kSingleSpace, 3, 5));
    CHECK_THROWS_AS(compute_nonce(Design::kMultiSpace, 0, std::uint64_t{1} << 62), ProtocolError);
  }

  TEST_CASE("nonces are unique on a 4x1024 grid") {
    std::set<std::array<std::uint8_t, 12>> seen;
    for (PathId p = 0; p < 4; ++p) {
      for (PacketNumber pn = 0; pn < 1024; ++pn) seen.insert(compute_nonce(Design::kMultiSpace, p, pn).bytes());
    }
    CHECK(seen.size() == 4096);

    // Under one space the allocator never repeats a pn, so nonces stay unique too.
    PacketNumberAllocator alloc(Design::kSingleSpace);
    std::set<std::array<std::uint8_t, 12>> single;
    for (PathId p = 0; p < 4; ++p) alloc.add_path(p);
    for (int i = 0; i < 4096; ++i) {
      const PathId p = i % 4;
      single.insert(compute_nonce(Design::kSingleSpace, p, alloc.assign(p).pn).bytes());
    }
    CHECK(single.size() == 4096);
  }

  TEST_CASE("RTT sample goes to the path the largest was sent on") {
    LossRecovery lr;
    lr.add_path(0);
    lr.add_path(1);
    for (PacketNumber pn = 0; pn < 6; ++pn) lr.on_packet_sent(sent(0, pn, pn % 2, at_ms(pn)));
    auto out = lr.on_ack_received(ack({{5, 5}, {0, 3}}), 0, at_ms(50));
    CHECK(out.rtt_sample_path == std::optional<PathId>{1});
    CHECK(lr.rtt(1).has_sample());
    CHECK_FALSE(lr.rtt(0).has_sample());
    CHECK(out.newly_acked.size() == 5);

    auto again = lr.on_ack_received(ack({{5, 5}, {0, 3}}), 0, at_ms(60));
    CHECK(again.newly_acked.empty());
    CHECK_FALSE(again.rtt_sample.has_value());
  }

  TEST_CASE("ACK of an unsent packet is a protocol error") {
    LossRecovery lr;
    lr.add_path(0);
    lr.on_packet_sent(sent(0, 0, 0, at_ms(0)));
    CHECK_THROWS_AS(lr.on_ack_received(ack({{3, 3}}), 0, at_ms(10)), ProtocolError);
    CHECK_THROWS_AS(lr.on_ack_received(ack({{0, 0}}), 9, at_ms(10)), ProtocolError);
    CHECK_THROWS_AS(lr.on_packet_sent(sent(0, 5, 0, at_ms(1))), ProtocolError);
  }

  TEST_CASE("smoothed RTT recurrence") {
    RttEstimator e;
    e.update(milliseconds(100), Duration::zero(), milliseconds(25));
    CHECK(e.smoothed() == milliseconds(100));
    e.update(milliseconds(60), Duration::zero(), milliseconds(25));
    CHECK(e.smoothed() == milliseconds(95));

    std::mt19937_64 rng(4);
    RttEstimator r;
    double srtt = 0;
    std::int64_t min_ns = 0;
    for (int i = 0; i < 1000; ++i) {
      const std::int64_t latest = 5'000'000 + static_cast<std::int64_t>(rng() % 200'000'000);
      const std::int64_t delay = static_cast<std::int64_t>(rng() % 30'000'000);
      r.update(Duration(latest), Duration(delay), milliseconds(25));
      if (i == 0) {
        srtt = static_cast<double>(latest);
        min_ns = latest;
      } else {
        min_ns = std::min(min_ns, latest);
        const std::int64_t d = std::min<std::int64_t>(delay, 25'000'000);
        const std::int64_t adj = latest >= min_ns + d ? latest - d : latest;
        srtt = (7 * srtt + static_cast<double>(adj)) / 8;
      }
      // Integer nanoseconds truncate at each step; the drift stays far below 1 us.
      REQUIRE(std::abs(static_cast<double>(r.smoothed().count()) - srtt) < 1000.0);
      REQUIRE(r.min_rtt().count() == min_ns);
    }
  }

  TEST_CASE("packet threshold declares loss after three later acks") {
    LossRecovery lr;
    lr.add_path(0);
    for (PacketNumber pn = 0; pn < 4; ++pn) lr.on_packet_sent(sent(0, pn, 0, at_ms(pn)));
    auto out = lr.on_ack_received(ack({{1, 3}}), 0, at_ms(40));
    CHECK(lost_pns(out.lost) == std::vector<PacketNumber>{0});
    CHECK(out.lost.at(0).trigger == LossTrigger::kThreshold);
  }

  TEST_CASE("one later ack inside the time threshold loses nothing") {
    LossRecovery lr;
    lr.add_path(0);
    lr.on_packet_sent(sent(0, 0, 0, at_ms(0)));
    lr.on_packet_sent(sent(0, 1, 0, at_ms(1)));
    auto out = lr.on_ack_received(ack({{1, 1}}), 0, at_ms(40));
    CHECK(out.lost.empty());
    CHECK(lr.find(0, 0)->state == PacketState::kInFlight);
    REQUIRE(lr.loss_timer().has_value());
    std::vector<LostPacket> later;
    lr.on_loss_timer(*lr.loss_timer(), later);
    CHECK(lost_pns(later) == std::vector<PacketNumber>{0});
    CHECK(later.at(0).trigger == LossTrigger::kTime);
  }

  TEST_CASE("single space: other-path acks never declare loss") {
    LossRecovery lr;
    lr.add_path(0);  // A
    lr.add_path(1);  // B
    for (PacketNumber pn = 0; pn < 8; ++pn) lr.on_packet_sent(sent(0, pn, pn % 2, at_ms(pn)));
    auto out = lr.on_ack_received(ack({{7, 7}, {5, 5}, {3, 3}, {1, 1}}), 0, at_ms(30));
    CHECK(out.lost.empty());
    // Long after any time threshold, still nothing without a path-A ack.
    CHECK(lr.detect_losses(0, at_ms(5000)).empty());
    CHECK(lr.find(0, 0)->state == PacketState::kInFlight);

    // A later path-A ack inside the threshold leaves pn 0 alone; the time
    // threshold takes it afterwards.
    LossRecovery lr2;
    lr2.add_path(0);
    lr2.add_path(1);
    for (PacketNumber pn = 0; pn < 8; ++pn) lr2.on_packet_sent(sent(0, pn, pn % 2, at_ms(pn)));
    auto a = lr2.on_ack_received(ack({{7, 7}, {5, 5}, {1, 3}}), 0, at_ms(30));
    CHECK(a.lost.empty());
    const Duration delay = lr2.rtt(0).loss_delay();
    CHECK(lr2.detect_losses(0, at_ms(0) + delay - milliseconds(1)).empty());
    auto timed = lr2.detect_losses(0, at_ms(0) + delay);
    CHECK(lost_pns(timed) == std::vector<PacketNumber>{0});
    CHECK(timed.at(0).trigger == LossTrigger::kTime);
  }

  TEST_CASE("late ack of a lost packet is spurious") {
    LossRecovery lr;
    lr.add_path(0);
    for (PacketNumber pn = 0; pn < 4; ++pn) lr.on_packet_sent(sent(0, pn, 0, at_ms(pn)));
    lr.on_ack_received(ack({{1, 3}}), 0, at_ms(40));
    auto out = lr.on_ack_received(ack({{0, 3}}), 0, at_ms(45));
    CHECK(out.spurious.size() == 1);
    CHECK(out.newly_acked.empty());
  }

  TEST_CASE("PTO declares the oldest in-flight packet lost and backs off") {
    LossRecovery lr;
    lr.add_path(0);
    lr.on_packet_sent(sent(0, 0, 0, at_ms(0)));
    lr.on_packet_sent(sent(0, 1, 0, at_ms(1)));
    const auto first = lr.pto_deadline(0);
    REQUIRE(first.has_value());
    CHECK(*first == at_ms(0) + 3 * RttEstimator::kInitialRtt);
    auto lp = lr.on_pto(0, *first);
    REQUIRE(lp.has_value());
    CHECK(lp->record->pn == 0);
    CHECK(lp->trigger == LossTrigger::kPto);
    const auto second = lr.pto_deadline(0);
    REQUIRE(second.has_value());
    CHECK(*second == at_ms(1) + 6 * RttEstimator::kInitialRtt);
  }

  TEST_CASE("mark_retransmission examples") {
    RetransmissionLedger led;
    SentPacketRecord rec = sent(0, 0, 0, at_ms(0));
    rec.stream = {{1000, 1200, false}};
    const auto q = led.mark_retransmission(rec);
    CHECK(q == std::vector<StreamChunk>{{1000, 1200, false}});
    auto iv = led.take(5000);
    REQUIRE(iv.has_value());
    CHECK(*iv == Interval{1000, 2199});

    RetransmissionLedger acked;
    acked.on_acked({1000, 1200, false});
    CHECK(acked.mark_retransmission(rec).empty());
    CHECK_FALSE(acked.pending());

    RetransmissionLedger twice;
    for (int i = 0; i < 2; ++i) {
      twice.mark_retransmission(rec);
      while (twice.take(500)) {
      }
    }
    CHECK(twice.count_at(1000) == 2);
    CHECK(twice.count_at(2199) == 2);
    CHECK(twice.count_at(2200) == 0);
    CHECK(twice.max_per_byte() == 2);
    CHECK(twice.retransmitted_bytes() == 2400);
  }

  TEST_CASE("partially acked data resends only the gap") {
    RetransmissionLedger led;
    led.on_acked({1200, 400, false});
    SentPacketRecord rec = sent(0, 0, 0, at_ms(0));
    rec.stream = {{1000, 1200, false}};
    CHECK(led.mark_retransmission(rec) ==
          std::vector<StreamChunk>{{1000, 200, false}, {1600, 600, false}});
  }
}
