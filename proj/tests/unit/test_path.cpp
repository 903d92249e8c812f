#include <doctest.h>

#include "mpq/path.hpp"

using namespace mpq;

namespace {

std::vector<std::uint8_t> cid(std::uint8_t b) { return std::vector<std::uint8_t>(kCidLength, b); }

PathManager ready_manager(std::uint64_t cids, std::uint64_t limit = 8) {
  PathManager m(1);
  m.cids() = CidRegistry(limit);
  for (std::uint64_t s = 0; s < cids; ++s) REQUIRE(m.cids().issue(s, cid(static_cast<std::uint8_t>(s))));
  m.add_initial_path(0, kTimeZero);
  m.set_handshake_complete();
  return m;
}

}  // namespace

TEST_SUITE("path") {
  TEST_CASE("negotiate examples") {
    CHECK_FALSE(negotiate({true, false}, {false, true}).has_value());
    CHECK(negotiate({true, true}, {false, true}) == std::optional<Design>{Design::kMultiSpace});
    CHECK(negotiate({true, false}, {true, false}) == std::optional<Design>{Design::kSingleSpace});
    CHECK(negotiate({true, true}, {true, true}) == std::optional<Design>{Design::kMultiSpace});
    CHECK_FALSE(negotiate({false, false}, {true, true}).has_value());
  }

  TEST_CASE("opening a path needs an unused CID") {
    auto m = ready_manager(2);
    const auto [id, ch] = m.start_path_validation(kTimeZero);
    CHECK(id == 1);
    CHECK(m.record(1).status == PathStatus::kProbing);
    CHECK_FALSE(m.validated(1));
    CHECK_THROWS_AS(m.start_path_validation(kTimeZero), CannotOpenPath);
  }

  TEST_CASE("active limit caps issued CIDs") {
    CidRegistry r(2);
    CHECK(r.issue(0, cid(0)));
    CHECK(r.issue(1, cid(1)));
    CHECK_FALSE(r.issue(2, cid(2)));
    CHECK(r.active() == 2);
    r.mark_used(0);
    r.mark_used(1);
    CHECK_FALSE(r.next_unused().has_value());
    CHECK_THROWS_AS(r.mark_used(5), CannotOpenPath);
  }

  TEST_CASE("validation needs a completed handshake") {
    PathManager m(1);
    m.cids().issue(0, cid(0));
    m.cids().issue(1, cid(1));
    m.add_initial_path(0, kTimeZero);
    CHECK_THROWS_AS(m.start_path_validation(kTimeZero), CannotOpenPath);
  }

  TEST_CASE("challenge and response") {
    auto client = ready_manager(3);
    PathManager server(2);
    const auto [id, ch] = client.start_path_validation(kTimeZero);

    const auto r = server.on_path_frame(ch, id, kTimeZero);
    REQUIRE(r.reply.has_value());
    const auto& resp = std::get<wire::PathResponseFrame>(*r.reply);
    CHECK(resp.data == ch.data);

    auto wrong = resp;
    wrong.data[0] ^= 0xff;
    CHECK_FALSE(client.on_path_frame(wrong, id, kTimeZero).validated);
    CHECK(client.record(id).status == PathStatus::kProbing);

    const Time t = kTimeZero + std::chrono::milliseconds(40);
    const auto ok = client.on_path_frame(resp, id, t);
    CHECK(ok.validated);
    CHECK(client.validated(id));
    CHECK(client.record(id).validated_at == t);
    // A replayed response changes nothing.
    CHECK_FALSE(client.on_path_frame(resp, id, t).validated);
    CHECK(client.validated_paths() == std::vector<PathId>{0, 1});
  }

  TEST_CASE("challenge data is seeded and distinct per path") {
    auto a = ready_manager(3);
    auto b = ready_manager(3);
    const auto c1 = a.start_path_validation(1, kTimeZero);
    const auto c2 = a.start_path_validation(2, kTimeZero);
    CHECK(c1.data != c2.data);
    CHECK(b.start_path_validation(1, kTimeZero).data == c1.data);
  }

  TEST_CASE("non path frames are rejected") {
    auto m = ready_manager(2);
    CHECK_THROWS_AS(m.on_path_frame(wire::PingFrame{}, 0, kTimeZero), ProtocolError);
  }
}
