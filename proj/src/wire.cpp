#include "mpq/wire.hpp"

#include <algorithm>

namespace mpq::wire {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t varint() {
    auto r = varint_decode(in_.subspan(pos_));
    pos_ += r.consumed;
    return r.value;
  }

  std::uint8_t byte() {
    need(1);
    return in_[pos_++];
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    need(N);
    std::array<std::uint8_t, N> out{};
    std::copy_n(in_.begin() + static_cast<std::ptrdiff_t>(pos_), N, out.begin());
    pos_ += N;
    return out;
  }

  std::span<const std::uint8_t> bytes(std::uint64_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ >= in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (in_.size() - pos_ < n) throw WireError("truncated frame");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::size_t ack_body_size(const AckFrame& f) {
  if (f.ranges.empty()) throw WireError("ACK frame without ranges");
  std::size_t n = varint_size(f.largest) +
                  varint_size(f.ack_delay_us >> kAckDelayExponent) +
                  varint_size(f.ranges.size() - 1) +
                  varint_size(f.ranges[0].hi - f.ranges[0].lo);
  for (std::size_t i = 1; i < f.ranges.size(); ++i) {
    const auto& prev = f.ranges[i - 1];
    const auto& cur = f.ranges[i];
    if (cur.hi + 2 > prev.lo) throw WireError("ACK ranges not descending");
    n += varint_size(prev.lo - cur.hi - 2) + varint_size(cur.hi - cur.lo);
  }
  return n;
}

void append_ack_body(const AckFrame& f, std::vector<std::uint8_t>& out) {
  if (f.ranges.empty() || f.ranges[0].hi != f.largest) {
    throw WireError("ACK first range must end at largest");
  }
  varint_append(out, f.largest);
  varint_append(out, f.ack_delay_us >> kAckDelayExponent);
  varint_append(out, f.ranges.size() - 1);
  varint_append(out, f.ranges[0].hi - f.ranges[0].lo);
  for (std::size_t i = 1; i < f.ranges.size(); ++i) {
    const auto& prev = f.ranges[i - 1];
    const auto& cur = f.ranges[i];
    if (cur.hi + 2 > prev.lo) throw WireError("ACK ranges not descending");
    varint_append(out, prev.lo - cur.hi - 2);
    varint_append(out, cur.hi - cur.lo);
  }
}

AckFrame read_ack_body(Reader& r, std::optional<std::uint64_t> path) {
  AckFrame f;
  f.path_id = path;
  f.largest = r.varint();
  f.ack_delay_us = r.varint() << kAckDelayExponent;
  const std::uint64_t count = r.varint();
  const std::uint64_t first = r.varint();
  if (first > f.largest) throw WireError("ACK first range below zero");
  f.ranges.push_back({f.largest - first, f.largest});
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t gap = r.varint();
    const std::uint64_t len = r.varint();
    const std::uint64_t prev_lo = f.ranges.back().lo;
    if (prev_lo < gap + 2 || prev_lo - gap - 2 < len) {
      throw WireError("ACK range underflow");
    }
    const std::uint64_t hi = prev_lo - gap - 2;
    f.ranges.push_back({hi - len, hi});
  }
  return f;
}

std::uint64_t stream_type(const StreamFrame& f) {
  std::uint64_t t = frame_type::kStreamBase | 0x02;  // LEN always present
  if (f.offset != 0) t |= 0x04;
  if (f.fin) t |= 0x01;
  return t;
}

}  // namespace

std::size_t varint_size(std::uint64_t v) {
  if (v <= 63) return 1;
  if (v <= 16383) return 2;
  if (v <= 1073741823) return 4;
  if (v <= kVarIntMax) return 8;
  throw WireError("varint out of range: " + std::to_string(v));
}

void varint_append(std::vector<std::uint8_t>& out, std::uint64_t v) {
  const std::size_t n = varint_size(v);
  const std::uint8_t prefix = n == 1 ? 0x00 : n == 2 ? 0x40 : n == 4 ? 0x80 : 0xc0;
  for (std::size_t i = 0; i < n; ++i) {
    auto b = static_cast<std::uint8_t>(v >> (8 * (n - 1 - i)));
    if (i == 0) b |= prefix;
    out.push_back(b);
  }
}

std::vector<std::uint8_t> varint_encode(std::uint64_t v) {
  std::vector<std::uint8_t> out;
  varint_append(out, v);
  return out;
}

VarIntRead varint_decode(std::span<const std::uint8_t> in) {
  if (in.empty()) throw WireError("truncated varint");
  const std::size_t n = std::size_t{1} << (in[0] >> 6);
  if (in.size() < n) throw WireError("truncated varint");
  std::uint64_t v = in[0] & 0x3f;
  for (std::size_t i = 1; i < n; ++i) v = (v << 8) | in[i];
  return {v, n};
}

std::size_t stream_header_size(std::uint64_t stream_id, std::uint64_t offset,
                               std::uint64_t length) {
  return 1 + varint_size(stream_id) + (offset != 0 ? varint_size(offset) : 0) +
         varint_size(length);
}

std::size_t frame_size(const Frame& frame) {
  return std::visit(
      Overloaded{
          [](const PaddingFrame& f) -> std::size_t { return f.length; },
          [](const PingFrame&) -> std::size_t { return 1; },
          [](const AckFrame& f) -> std::size_t {
            const std::uint64_t type = f.path_id ? frame_type::kAckMp : frame_type::kAck;
            return varint_size(type) + (f.path_id ? varint_size(*f.path_id) : 0) +
                   ack_body_size(f);
          },
          [](const StreamFrame& f) -> std::size_t {
            return stream_header_size(f.stream_id, f.offset, f.length) + f.length;
          },
          [](const PathChallengeFrame&) -> std::size_t { return 9; },
          [](const PathResponseFrame&) -> std::size_t { return 9; },
          [](const NewConnectionIdFrame& f) -> std::size_t {
            return 1 + varint_size(f.seq) + varint_size(f.retire_prior_to) + 1 +
                   f.cid.size() + f.reset_token.size();
          },
          [](const AckFrequencyFrame& f) -> std::size_t {
            return varint_size(frame_type::kAckFrequency) + varint_size(f.seq) +
                   varint_size(f.packet_threshold) + varint_size(f.max_ack_delay_us) + 1;
          },
          [](const ConnectionCloseFrame& f) -> std::size_t {
            return 1 + varint_size(f.error_code) + varint_size(f.frame_type) +
                   varint_size(f.reason.size()) + f.reason.size();
          },
          [](const MaxDataFrame& f) -> std::size_t { return 1 + varint_size(f.limit); },
          [](const MaxStreamDataFrame& f) -> std::size_t {
            return 1 + varint_size(f.stream_id) + varint_size(f.limit);
          },
      },
      frame);
}

void encode_frame(const Frame& frame, std::vector<std::uint8_t>& out) {
  std::visit(
      Overloaded{
          [&](const PaddingFrame& f) { out.insert(out.end(), f.length, 0x00); },
          [&](const PingFrame&) { out.push_back(frame_type::kPing); },
          [&](const AckFrame& f) {
            if (f.path_id) {
              varint_append(out, frame_type::kAckMp);
              varint_append(out, *f.path_id);
            } else {
              varint_append(out, frame_type::kAck);
            }
            append_ack_body(f, out);
          },
          [&](const StreamFrame& f) {
            varint_append(out, stream_type(f));
            varint_append(out, f.stream_id);
            if (f.offset != 0) varint_append(out, f.offset);
            varint_append(out, f.length);
            out.insert(out.end(), f.length, 0x00);
          },
          [&](const PathChallengeFrame& f) {
            out.push_back(frame_type::kPathChallenge);
            out.insert(out.end(), f.data.begin(), f.data.end());
          },
          [&](const PathResponseFrame& f) {
            out.push_back(frame_type::kPathResponse);
            out.insert(out.end(), f.data.begin(), f.data.end());
          },
          [&](const NewConnectionIdFrame& f) {
            if (f.cid.empty() || f.cid.size() > 20) throw WireError("bad CID length");
            out.push_back(frame_type::kNewConnectionId);
            varint_append(out, f.seq);
            varint_append(out, f.retire_prior_to);
            out.push_back(static_cast<std::uint8_t>(f.cid.size()));
            out.insert(out.end(), f.cid.begin(), f.cid.end());
            out.insert(out.end(), f.reset_token.begin(), f.reset_token.end());
          },
          [&](const AckFrequencyFrame& f) {
            varint_append(out, frame_type::kAckFrequency);
            varint_append(out, f.seq);
            varint_append(out, f.packet_threshold);
            varint_append(out, f.max_ack_delay_us);
            out.push_back(f.ignore_reorder ? 1 : 0);
          },
          [&](const ConnectionCloseFrame& f) {
            out.push_back(frame_type::kConnectionClose);
            varint_append(out, f.error_code);
            varint_append(out, f.frame_type);
            varint_append(out, f.reason.size());
            out.insert(out.end(), f.reason.begin(), f.reason.end());
          },
          [&](const MaxDataFrame& f) {
            out.push_back(frame_type::kMaxData);
            varint_append(out, f.limit);
          },
          [&](const MaxStreamDataFrame& f) {
            out.push_back(frame_type::kMaxStreamData);
            varint_append(out, f.stream_id);
            varint_append(out, f.limit);
          },
      },
      frame);
}

std::vector<std::uint8_t> encode_frame(const Frame& f) {
  std::vector<std::uint8_t> out;
  out.reserve(frame_size(f));
  encode_frame(f, out);
  return out;
}

FrameRead decode_frame(std::span<const std::uint8_t> in) {
  Reader r(in);
  const std::uint64_t type = r.varint();
  Frame frame;
  if (type == frame_type::kPadding) {
    std::size_t n = 1;
    while (!r.done() && in[r.pos()] == 0x00) {
      r.byte();
      ++n;
    }
    frame = PaddingFrame{n};
  } else if (type == frame_type::kPing) {
    frame = PingFrame{};
  } else if (type == frame_type::kAck) {
    frame = read_ack_body(r, std::nullopt);
  } else if (type == frame_type::kAckMp) {
    const std::uint64_t path = r.varint();
    frame = read_ack_body(r, path);
  } else if (type >= frame_type::kStreamBase && type <= frame_type::kStreamBase + 7) {
    StreamFrame f;
    f.stream_id = r.varint();
    if (type & 0x04) f.offset = r.varint();
    if (!(type & 0x02)) throw WireError("STREAM frame without LEN is unsupported");
    f.length = r.varint();
    f.fin = (type & 0x01) != 0;
    if (f.offset + f.length > kVarIntMax) throw WireError("STREAM offset overflow");
    r.bytes(f.length);
    frame = f;
  } else if (type == frame_type::kPathChallenge) {
    frame = PathChallengeFrame{r.fixed<8>()};
  } else if (type == frame_type::kPathResponse) {
    frame = PathResponseFrame{r.fixed<8>()};
  } else if (type == frame_type::kNewConnectionId) {
    NewConnectionIdFrame f;
    f.seq = r.varint();
    f.retire_prior_to = r.varint();
    const std::uint8_t len = r.byte();
    if (len == 0 || len > 20) throw WireError("bad CID length");
    auto cid = r.bytes(len);
    f.cid.assign(cid.begin(), cid.end());
    f.reset_token = r.fixed<16>();
    frame = std::move(f);
  } else if (type == frame_type::kAckFrequency) {
    AckFrequencyFrame f;
    f.seq = r.varint();
    f.packet_threshold = r.varint();
    f.max_ack_delay_us = r.varint();
    f.ignore_reorder = r.byte() != 0;
    frame = f;
  } else if (type == frame_type::kConnectionClose) {
    ConnectionCloseFrame f;
    f.error_code = r.varint();
    f.frame_type = r.varint();
    auto reason = r.bytes(r.varint());
    f.reason.assign(reason.begin(), reason.end());
    frame = std::move(f);
  } else if (type == frame_type::kMaxData) {
    frame = MaxDataFrame{r.varint()};
  } else if (type == frame_type::kMaxStreamData) {
    MaxStreamDataFrame f;
    f.stream_id = r.varint();
    f.limit = r.varint();
    frame = f;
  } else {
    throw WireError("unknown frame type " + std::to_string(type));
  }
  return {std::move(frame), r.pos()};
}

std::vector<Frame> decode_frames(std::span<const std::uint8_t> in) {
  std::vector<Frame> frames;
  std::size_t pos = 0;
  while (pos < in.size()) {
    auto r = decode_frame(in.subspan(pos));
    pos += r.consumed;
    frames.push_back(std::move(r.frame));
  }
  return frames;
}

bool is_ack_eliciting(const Frame& f) {
  return !std::holds_alternative<PaddingFrame>(f) && !std::holds_alternative<AckFrame>(f) &&
         !std::holds_alternative<ConnectionCloseFrame>(f);
}

std::string frame_name(const Frame& frame) {
  return std::visit(
      Overloaded{
          [](const PaddingFrame&) { return std::string("padding"); },
          [](const PingFrame&) { return std::string("ping"); },
          [](const AckFrame& f) { return std::string(f.path_id ? "ack_mp" : "ack"); },
          [](const StreamFrame&) { return std::string("stream"); },
          [](const PathChallengeFrame&) { return std::string("path_challenge"); },
          [](const PathResponseFrame&) { return std::string("path_response"); },
          [](const NewConnectionIdFrame&) { return std::string("new_connection_id"); },
          [](const AckFrequencyFrame&) { return std::string("ack_frequency"); },
          [](const ConnectionCloseFrame&) { return std::string("connection_close"); },
          [](const MaxDataFrame&) { return std::string("max_data"); },
          [](const MaxStreamDataFrame&) { return std::string("max_stream_data"); },
      },
      frame);
}

std::size_t Packet::size() const {
  if (handshake) return kHandshakePacketBytes;
  std::size_t n = kPacketOverhead;
  for (const auto& f : frames) n += frame_size(f);
  return n;
}

bool Packet::ack_eliciting() const {
  if (handshake) return true;
  return std::any_of(frames.begin(), frames.end(),
                     [](const Frame& f) { return is_ack_eliciting(f); });
}

}  // namespace mpq::wire
