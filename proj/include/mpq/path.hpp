#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "mpq/types.hpp"
#include "mpq/wire.hpp"

namespace mpq {

// Packet number space designs an endpoint advertises in enable_multipath.
struct MultipathSupport {
  bool single_space = false;
  bool multi_space = false;

  bool any() const { return single_space || multi_space; }
};

// Multi-space is preferred when both designs are common; nullopt means
// the negotiation failed and the connection stays single-path.
std::optional<Design> negotiate(MultipathSupport client, MultipathSupport server);

class CannotOpenPath : public Error {
 public:
  using Error::Error;
};

// Destination connection IDs issued by the peer, keyed by sequence number.
class CidRegistry {
 public:
  explicit CidRegistry(std::uint64_t active_limit = 8) : active_limit_(active_limit) {}

  // Returns false when the active limit would be exceeded.
  bool issue(std::uint64_t seq, std::vector<std::uint8_t> cid);
  std::optional<std::uint64_t> next_unused() const;
  void mark_used(std::uint64_t seq);
  bool is_used(std::uint64_t seq) const;
  std::size_t active() const { return issued_.size(); }
  std::uint64_t active_limit() const { return active_limit_; }
  const std::vector<std::uint8_t>* cid(std::uint64_t seq) const;

 private:
  struct Entry {
    std::vector<std::uint8_t> cid;
    bool used = false;
  };
  std::uint64_t active_limit_;
  std::map<std::uint64_t, Entry> issued_;
};

enum class PathStatus { kUnused, kProbing, kValidated, kActive };
std::string to_string(PathStatus s);

struct PathRecord {
  PathId id = 0;  // Destination CID sequence number
  PathStatus status = PathStatus::kUnused;
  wire::PathData challenge{};
  bool challenge_outstanding = false;
  Time validated_at{};
};

struct PathFrameResult {
  std::optional<wire::Frame> reply;
  bool validated = false;
};

// Path validation state machine of one endpoint.
class PathManager {
 public:
  explicit PathManager(std::uint64_t seed);

  CidRegistry& cids() { return cids_; }
  const CidRegistry& cids() const { return cids_; }

  void set_handshake_complete() { handshake_complete_ = true; }
  bool handshake_complete() const { return handshake_complete_; }

  // The path the handshake ran on; validated by the handshake itself.
  void add_initial_path(PathId id, Time now);

  // Opens the next unused CID as a new path and returns its challenge.
  std::pair<PathId, wire::PathChallengeFrame> start_path_validation(Time now);
  // Opens a specific CID sequence as a path.
  wire::PathChallengeFrame start_path_validation(PathId id, Time now);

  // Challenge received on `path`: the reply is a PATH_RESPONSE echo.
  // Response received: validates the path if the data matches.
  PathFrameResult on_path_frame(const wire::Frame& frame, PathId path, Time now);

  bool validated(PathId id) const;
  bool known(PathId id) const { return paths_.count(id) != 0; }
  std::vector<PathId> validated_paths() const;
  std::vector<PathId> known_paths() const;
  const PathRecord& record(PathId id) const { return paths_.at(id); }
  // Marks a path known to the responder side once the peer probes it.
  void note_peer_path(PathId id);

 private:
  wire::PathData random_data();

  CidRegistry cids_;
  std::map<PathId, PathRecord> paths_;
  std::mt19937_64 rng_;
  bool handshake_complete_ = false;
};

}  // namespace mpq
