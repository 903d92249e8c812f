#include "mpq/path.hpp"

#include <variant>

namespace mpq {

std::optional<Design> negotiate(MultipathSupport client, MultipathSupport server) {
  if (client.multi_space && server.multi_space) return Design::kMultiSpace;
  if (client.single_space && server.single_space) return Design::kSingleSpace;
  return std::nullopt;
}

bool CidRegistry::issue(std::uint64_t seq, std::vector<std::uint8_t> cid) {
  if (issued_.count(seq)) return true;
  if (issued_.size() >= active_limit_) return false;
  issued_.emplace(seq, Entry{std::move(cid), false});
  return true;
}

std::optional<std::uint64_t> CidRegistry::next_unused() const {
  for (const auto& [seq, e] : issued_) {
    if (!e.used) return seq;
  }
  return std::nullopt;
}

void CidRegistry::mark_used(std::uint64_t seq) {
  auto it = issued_.find(seq);
  if (it == issued_.end()) throw CannotOpenPath("CID sequence " + std::to_string(seq) + " not issued");
  it->second.used = true;
}

bool CidRegistry::is_used(std::uint64_t seq) const {
  auto it = issued_.find(seq);
  return it != issued_.end() && it->second.used;
}

const std::vector<std::uint8_t>* CidRegistry::cid(std::uint64_t seq) const {
  auto it = issued_.find(seq);
  return it == issued_.end() ? nullptr : &it->second.cid;
}

std::string to_string(PathStatus s) {
  switch (s) {
    case PathStatus::kUnused: return "unused";
    case PathStatus::kProbing: return "probing";
    case PathStatus::kValidated: return "validated";
    case PathStatus::kActive: return "active";
  }
  return "?";
}

PathManager::PathManager(std::uint64_t seed) : rng_(seed) {}

wire::PathData PathManager::random_data() {
  wire::PathData d{};
  std::uint64_t v = rng_();
  for (auto& b : d) {
    b = static_cast<std::uint8_t>(v);
    v >>= 8;
  }
  return d;
}

void PathManager::add_initial_path(PathId id, Time now) {
  auto& rec = paths_[id];
  rec.id = id;
  rec.status = PathStatus::kActive;
  rec.validated_at = now;
  cids_.mark_used(id);
}

std::pair<PathId, wire::PathChallengeFrame> PathManager::start_path_validation(Time now) {
  auto seq = cids_.next_unused();
  if (!seq) throw CannotOpenPath("no unused destination connection ID");
  const auto id = static_cast<PathId>(*seq);
  return {id, start_path_validation(id, now)};
}

wire::PathChallengeFrame PathManager::start_path_validation(PathId id, Time) {
  if (!handshake_complete_) throw CannotOpenPath("handshake not complete");
  if (cids_.cid(id) == nullptr) throw CannotOpenPath("no connection ID for path " + std::to_string(id));
  if (cids_.is_used(id) && paths_.count(id) && paths_[id].status != PathStatus::kProbing) {
    throw CannotOpenPath("connection ID already in use");
  }
  cids_.mark_used(id);
  auto& rec = paths_[id];
  rec.id = id;
  rec.status = PathStatus::kProbing;
  rec.challenge = random_data();
  rec.challenge_outstanding = true;
  return wire::PathChallengeFrame{rec.challenge};
}

void PathManager::note_peer_path(PathId id) {
  auto& rec = paths_[id];
  rec.id = id;
}

PathFrameResult PathManager::on_path_frame(const wire::Frame& frame, PathId path, Time now) {
  PathFrameResult result;
  if (const auto* ch = std::get_if<wire::PathChallengeFrame>(&frame)) {
    note_peer_path(path);
    result.reply = wire::PathResponseFrame{ch->data};
    return result;
  }
  if (const auto* resp = std::get_if<wire::PathResponseFrame>(&frame)) {
    auto it = paths_.find(path);
    if (it == paths_.end()) return result;
    auto& rec = it->second;
    if (rec.challenge_outstanding && rec.challenge == resp->data) {
      rec.challenge_outstanding = false;
      if (rec.status == PathStatus::kProbing || rec.status == PathStatus::kUnused) {
        rec.status = PathStatus::kValidated;
        rec.validated_at = now;
        result.validated = true;
      }
    }
    return result;
  }
  throw ProtocolError("not a path validation frame");
}

bool PathManager::validated(PathId id) const {
  auto it = paths_.find(id);
  return it != paths_.end() &&
         (it->second.status == PathStatus::kValidated || it->second.status == PathStatus::kActive);
}

std::vector<PathId> PathManager::validated_paths() const {
  std::vector<PathId> out;
  for (const auto& [id, rec] : paths_) {
    if (validated(id)) out.push_back(id);
  }
  return out;
}

std::vector<PathId> PathManager::known_paths() const {
  std::vector<PathId> out;
  for (const auto& [id, rec] : paths_) out.push_back(id);
  return out;
}

}  // namespace mpq
