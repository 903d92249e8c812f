#include <map>
#include <sstream>

#include <doctest.h>

#include "mpq/harness/run.hpp"

using namespace mpq;
using namespace mpq::harness;

namespace {

RunConfig two_paths(Design d, double mbps = 20, double rtt = 40, std::uint64_t size = kMiB) {
  RunConfig c;
  c.family = Family::kHomo2;
  c.paths = homo2_paths(mbps, rtt);
  c.design = d;
  c.transfer_size = size;
  return c;
}

std::vector<TraceEvent> events(const RunResult& r, EventType t, std::optional<Side> side = {}) {
  std::vector<TraceEvent> out;
  for (const auto& e : r.trace.events()) {
    if (e.type == t && (!side || e.side == *side)) out.push_back(e);
  }
  return out;
}

double ms(Time t) { return to_ms(t - kTimeZero); }

}  // namespace

TEST_SUITE("endpoint") {
  TEST_CASE("handshake takes one round trip plus serialization") {
    RunConfig c;
    c.paths = {{100, 40}};
    c.transfer_size = 0;
    const auto r = run_once(c);
    const auto hs = events(r, EventType::kHandshakeComplete, Side::kClient);
    REQUIRE(hs.size() == 1);
    // Two 1228-byte datagrams at 100 Mbps add about 0.2 ms.
    CHECK(ms(hs[0].time) == doctest::Approx(40.0 + 2 * 1228 * 8 / 1e5).epsilon(1e-6));
    // Negotiation succeeds even with one path configured.
    CHECK(hs[0].text == to_string(c.design));
  }

  TEST_CASE("empty transfer is a handshake and a close") {
    RunConfig c;
    c.paths = {{50, 30}};
    c.transfer_size = 0;
    const auto r = run_once(c);
    CHECK(r.metrics.completed);
    // Handshake, request, FIN, then the close follows the last delayed ACK.
    CHECK(r.metrics.transfer_time_s > 0.06);
    CHECK(r.metrics.transfer_time_s < 0.15);
  }

  TEST_CASE("failed negotiation falls back to one path") {
    auto c = two_paths(Design::kMultiSpace);
    auto client = c.endpoint(Role::kClient);
    auto server = c.endpoint(Role::kServer);
    client.support = {true, false};
    server.support = {false, true};
    const auto r = run_endpoints(c, client, server);
    CHECK(r.metrics.completed);
    const auto hs = events(r, EventType::kHandshakeComplete);
    REQUIRE(hs.size() == 2);
    for (const auto& e : hs) CHECK(e.text == "single-path");
    CHECK(events(r, EventType::kPathChallengeSent).empty());
    for (const auto& e : events(r, EventType::kPacketSent)) CHECK(e.path == 0);
  }

  TEST_CASE("client opens every path at handshake completion") {
    RunConfig c;
    c.family = Family::kHetero3;
    c.paths = hetero3_paths({0.3, 0.3, 0.4}, {0.4, 0.6, 0.9});
    c.transfer_size = kMiB;
    const auto r = run_once(c);
    CHECK(r.metrics.completed);
    const auto hs = events(r, EventType::kHandshakeComplete, Side::kClient);
    const auto ch = events(r, EventType::kPathChallengeSent, Side::kClient);
    REQUIRE(ch.size() == 2);
    for (const auto& e : ch) {
      CHECK(e.time >= hs.at(0).time);
      CHECK(e.time - hs.at(0).time < std::chrono::milliseconds(1));
    }
    CHECK(events(r, EventType::kPathValidated, Side::kClient).size() == 2);
  }

  TEST_CASE("stream data only on validated paths") {
    for (Design d : {Design::kSingleSpace, Design::kMultiSpace}) {
      const auto r = run_once(two_paths(d, 30, 60));
      std::map<std::int64_t, Time> validated{{0, kTimeZero}};
      for (const auto& e : r.trace.events()) {
        if (e.type == EventType::kPathValidated && e.side == Side::kServer) validated[e.path] = e.time;
        if (e.type == EventType::kStreamFrameSent && e.side == Side::kServer) {
          REQUIRE(validated.count(e.path) == 1);
        }
      }
      CHECK(validated.size() == 2);
    }
  }

  TEST_CASE("single space numbering alternates across paths") {
    const auto r = run_once(two_paths(Design::kSingleSpace));
    std::vector<std::uint64_t> last(2, 0);
    bool first[2] = {true, true};
    std::uint64_t expect = 0;
    for (const auto& e : events(r, EventType::kPacketSent, Side::kServer)) {
      if (e.space < 0) continue;  // handshake flight
      CHECK(e.space == 0);
      REQUIRE(e.pn == expect++);
      const auto p = static_cast<std::size_t>(e.path);
      if (!first[p]) CHECK(e.pn > last[p]);
      first[p] = false;
      last[p] = e.pn;
    }
  }

  TEST_CASE("multi space numbering is consecutive per path") {
    const auto r = run_once(two_paths(Design::kMultiSpace));
    std::map<std::int64_t, std::uint64_t> next;
    for (const auto& e : events(r, EventType::kPacketSent, Side::kServer)) {
      if (e.space < 0) continue;
      CHECK(e.space == e.path);
      REQUIRE(e.pn == next[e.path]++);
    }
    CHECK(next.size() == 2);
  }

  TEST_CASE("round-robin keeps equal paths balanced") {
    // ACK_MP frames crossing paths inflate RTT samples, so the RTT-based
    // slow-start exit would skew the split; switch it off to isolate the scheduler.
    const auto c = two_paths(Design::kMultiSpace, 50, 20, 4 * kMiB);
    auto client = c.endpoint(Role::kClient);
    auto server = c.endpoint(Role::kServer);
    client.cubic_rtt_exit = server.cubic_rtt_exit = false;
    const auto r = run_endpoints(c, client, server);
    std::map<std::int64_t, std::int64_t> count;
    for (const auto& e : events(r, EventType::kStreamFrameSent, Side::kServer)) ++count[e.path];
    REQUIRE(count.size() == 2);
    const double total = static_cast<double>(count[0] + count[1]);
    CHECK(std::abs(count[0] - count[1]) / total < 0.02);
  }

  TEST_CASE("retransmissions go ahead of new data") {
    // A 4-AB SPNS run over unequal paths retransmits plenty.
    RunConfig c;
    c.paths = hetero2_paths(0.8, 0.15);
    c.design = Design::kSingleSpace;
    c.ab_limit = 4;
    c.transfer_size = 5 * kMiB;
    const auto r = run_once(c);
    REQUIRE(r.metrics.rel_retransmitted > 0);
    std::uint64_t frontier = 0;
    std::optional<std::uint64_t> pn;
    bool seen_new = false;
    for (const auto& e : events(r, EventType::kStreamFrameSent, Side::kServer)) {
      if (!pn || *pn != e.pn) {
        pn = e.pn;
        seen_new = false;
      }
      const bool old = e.offset < frontier;
      if (old) REQUIRE_FALSE(seen_new);
      if (!old) seen_new = true;
      frontier = std::max(frontier, e.offset + e.length);
    }
    CHECK(r.metrics.completed);
  }

  TEST_CASE("ACK_MP for one path may travel on another") {
    auto c = two_paths(Design::kMultiSpace, 20, 40);
    c.dispatch = AckDispatch::kDuplicateAll;
    const auto r = run_once(c);
    CHECK(r.metrics.completed);
    bool crossed = false;
    for (const auto& e : events(r, EventType::kAckGenerated, Side::kClient)) {
      if (e.path != e.space) crossed = true;
    }
    CHECK(crossed);
  }

  TEST_CASE("single 10 Mbps path cannot beat its bandwidth") {
    RunConfig c;
    c.paths = {{10, 40}};
    c.transfer_size = 5 * kMiB;
    const auto r = run_once(c);
    CHECK(r.metrics.completed);
    CHECK(r.metrics.transfer_time_s >= 5.0 * kMiB * 8 / 10e6);
  }

  TEST_CASE("every byte is delivered once regardless of retransmission") {
    RunConfig c;
    c.paths = hetero2_paths(0.7, 0.2);
    c.design = Design::kSingleSpace;
    c.ab_limit = 8;
    c.transfer_size = 3 * kMiB;
    const auto r = run_once(c);
    REQUIRE(r.metrics.completed);
    // Trace-side retransmission total equals the sender ledger.
    CHECK(r.metrics.rel_retransmitted == doctest::Approx(r.online.rel_retransmitted));
    CHECK(r.metrics.max_per_byte_retrans == r.online.max_per_byte_retrans);
  }

  TEST_CASE("identical configs give identical traces") {
    auto c = two_paths(Design::kSingleSpace, 25, 70, 2 * kMiB);
    std::ostringstream a, b;
    run_once(c).trace.write_jsonl(a);
    run_once(c).trace.write_jsonl(b);
    CHECK(a.str() == b.str());
    CHECK(a.str().size() > 1000);
  }
}
