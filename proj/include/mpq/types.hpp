#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mpq {

// Simulated clock. Nanosecond resolution keeps serialization times of
// small packets at 100 Mbps exact enough for deterministic replays.
struct SimClock {
  using rep = std::int64_t;
  using period = std::nano;
  using duration = std::chrono::nanoseconds;
  using time_point = std::chrono::time_point<SimClock>;
  static constexpr bool is_steady = true;
};

using Duration = std::chrono::nanoseconds;
using Time = SimClock::time_point;

inline constexpr Time kTimeZero{};

inline double to_seconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}

Duration from_seconds(double seconds);

inline double to_ms(Duration d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

using PathId = std::uint32_t;
using PacketNumber = std::uint64_t;
using SpaceId = std::uint64_t;

enum class Design { kSingleSpace, kMultiSpace };

std::string to_string(Design d);
Design parse_design(const std::string& s);

// Closed interval [lo, hi]; used for packet numbers and stream bytes.
struct Interval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  std::uint64_t length() const { return hi - lo + 1; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Maximum UDP payload of a post-handshake datagram.
inline constexpr std::size_t kMss = 1252;
// 1-byte flags + 8-byte DCID + 4-byte packet number.
inline constexpr std::size_t kShortHeaderBytes = 1 + 8 + 4;
inline constexpr std::size_t kAeadTagBytes = 16;
inline constexpr std::size_t kPacketOverhead = kShortHeaderBytes + kAeadTagBytes;
// IPv4 + UDP headers, counted on links but not in QUIC sizes.
inline constexpr std::size_t kIpUdpOverhead = 28;
inline constexpr std::size_t kHandshakePacketBytes = 1200;
inline constexpr std::size_t kCidLength = 8;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WireError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpq
