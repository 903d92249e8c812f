#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mpq/types.hpp"

namespace mpq::wire {

inline constexpr std::uint64_t kVarIntMax = (std::uint64_t{1} << 62) - 1;

// Frame type codes. Standard frames use their registered values; ACK_MP
// uses an unassigned single-byte code so that its minimum size is exactly
// one varint larger than ACK.
namespace frame_type {
inline constexpr std::uint64_t kPadding = 0x00;
inline constexpr std::uint64_t kPing = 0x01;
inline constexpr std::uint64_t kAck = 0x02;
inline constexpr std::uint64_t kStreamBase = 0x08;
inline constexpr std::uint64_t kMaxData = 0x10;
inline constexpr std::uint64_t kMaxStreamData = 0x11;
inline constexpr std::uint64_t kNewConnectionId = 0x18;
inline constexpr std::uint64_t kPathChallenge = 0x1a;
inline constexpr std::uint64_t kPathResponse = 0x1b;
inline constexpr std::uint64_t kConnectionClose = 0x1c;
inline constexpr std::uint64_t kAckMp = 0x2a;
inline constexpr std::uint64_t kAckFrequency = 0xaf;
}  // namespace frame_type

// Exponent applied to the ACK Delay field (microseconds >> 3).
inline constexpr int kAckDelayExponent = 3;

std::size_t varint_size(std::uint64_t v);
void varint_append(std::vector<std::uint8_t>& out, std::uint64_t v);
std::vector<std::uint8_t> varint_encode(std::uint64_t v);

struct VarIntRead {
  std::uint64_t value;
  std::size_t consumed;
};
VarIntRead varint_decode(std::span<const std::uint8_t> in);

struct PaddingFrame {
  std::size_t length = 1;
  friend bool operator==(const PaddingFrame&, const PaddingFrame&) = default;
};

struct PingFrame {
  friend bool operator==(const PingFrame&, const PingFrame&) = default;
};

// ACK and ACK_MP. `ranges` are descending and disjoint with
// ranges.front().hi == largest. The delay is carried in microseconds and
// quantized to the ack-delay exponent on the wire, so only multiples of 8
// survive a round trip unchanged.
struct AckFrame {
  std::optional<std::uint64_t> path_id;  // set => ACK_MP
  PacketNumber largest = 0;
  std::uint64_t ack_delay_us = 0;
  std::vector<Interval> ranges;

  bool multipath() const { return path_id.has_value(); }
  std::size_t additional_blocks() const {
    return ranges.empty() ? 0 : ranges.size() - 1;
  }
  friend bool operator==(const AckFrame&, const AckFrame&) = default;
};

// Payload bytes are not carried; encoding emits `length` zero bytes.
struct StreamFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool fin = false;
  friend bool operator==(const StreamFrame&, const StreamFrame&) = default;
};

using PathData = std::array<std::uint8_t, 8>;

struct PathChallengeFrame {
  PathData data{};
  friend bool operator==(const PathChallengeFrame&, const PathChallengeFrame&) = default;
};

struct PathResponseFrame {
  PathData data{};
  friend bool operator==(const PathResponseFrame&, const PathResponseFrame&) = default;
};

struct NewConnectionIdFrame {
  std::uint64_t seq = 0;
  std::uint64_t retire_prior_to = 0;
  std::vector<std::uint8_t> cid;
  std::array<std::uint8_t, 16> reset_token{};
  friend bool operator==(const NewConnectionIdFrame&, const NewConnectionIdFrame&) = default;
};

struct AckFrequencyFrame {
  std::uint64_t seq = 0;
  std::uint64_t packet_threshold = 2;
  std::uint64_t max_ack_delay_us = 25000;
  bool ignore_reorder = false;
  friend bool operator==(const AckFrequencyFrame&, const AckFrequencyFrame&) = default;
};

struct ConnectionCloseFrame {
  std::uint64_t error_code = 0;
  std::uint64_t frame_type = 0;
  std::string reason;
  friend bool operator==(const ConnectionCloseFrame&, const ConnectionCloseFrame&) = default;
};

struct MaxDataFrame {
  std::uint64_t limit = 0;
  friend bool operator==(const MaxDataFrame&, const MaxDataFrame&) = default;
};

struct MaxStreamDataFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t limit = 0;
  friend bool operator==(const MaxStreamDataFrame&, const MaxStreamDataFrame&) = default;
};

using Frame = std::variant<PaddingFrame, PingFrame, AckFrame, StreamFrame,
                           PathChallengeFrame, PathResponseFrame,
                           NewConnectionIdFrame, AckFrequencyFrame,
                           ConnectionCloseFrame, MaxDataFrame,
                           MaxStreamDataFrame>;

std::size_t frame_size(const Frame& f);
void encode_frame(const Frame& f, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode_frame(const Frame& f);

struct FrameRead {
  Frame frame;
  std::size_t consumed;
};
FrameRead decode_frame(std::span<const std::uint8_t> in);
std::vector<Frame> decode_frames(std::span<const std::uint8_t> in);

bool is_ack_eliciting(const Frame& f);
std::string frame_name(const Frame& f);

// Bytes needed by a STREAM frame header carrying `length` bytes at `offset`.
std::size_t stream_header_size(std::uint64_t stream_id, std::uint64_t offset,
                               std::uint64_t length);

struct PacketHeader {
  std::uint64_t dcid_seq = 0;
  PacketNumber pn = 0;
  SpaceId space = 0;
};

// Abstract handshake parameters carried by the two handshake flights.
struct HandshakeParams {
  bool from_client = true;
  bool single_space = false;
  bool multi_space = false;
  std::uint64_t active_cid_limit = 8;
  std::uint64_t initial_max_data = 0;
};

struct Packet {
  PacketHeader header;
  std::vector<Frame> frames;
  std::optional<HandshakeParams> handshake;

  // QUIC datagram size: header + frames + AEAD tag, or the fixed
  // handshake flight size.
  std::size_t size() const;
  bool ack_eliciting() const;
};

}  // namespace mpq::wire
