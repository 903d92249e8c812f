#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "mpq/acktrack.hpp"
#include "mpq/cc.hpp"
#include "mpq/path.hpp"
#include "mpq/rangeset.hpp"
#include "mpq/sendtrack.hpp"
#include "mpq/trace.hpp"
#include "mpq/types.hpp"
#include "mpq/wire.hpp"

namespace mpq {

enum class Role { kClient, kServer };

inline constexpr std::uint64_t kMiB = 1024 * 1024;

struct EndpointConfig {
  MultipathSupport support{true, true};
  AckPolicy ack;
  CcKind cc = CcKind::kCubic;
  bool cubic_rtt_exit = true;
  bool pacing = true;
  // Paths the client opens, including the handshake path.
  std::uint64_t path_count = 2;
  std::uint64_t active_cid_limit = 8;
  std::uint64_t initial_window = 2 * kMiB;
  std::uint64_t max_window = 16 * kMiB;
  // Bytes the server returns once the request is complete.
  std::uint64_t transfer_size = 5 * kMiB;
  std::uint64_t request_size = 16;
  // Data sender asks the peer to ignore reordering once it sees it.
  bool send_ack_frequency = true;
  std::uint64_t ack_frequency_threshold = 10;
  Duration handshake_timeout = std::chrono::seconds(1);
  std::uint64_t close_retransmits = 3;
  std::uint64_t seed = 1;
};

// A QUIC datagram in transit on one path.
struct Datagram {
  PathId path = 0;
  wire::Packet packet;

  std::size_t size() const { return packet.size(); }
};

struct ConnectionStats {
  std::uint64_t ack_frames = 0;
  std::uint64_t ack_ranges = 0;
  std::uint64_t ack_frames_at_limit = 0;
  std::uint64_t ack_bytes = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_lost = 0;
  std::uint64_t spurious_losses = 0;
  std::uint64_t stream_bytes_sent = 0;
};

// One endpoint of a single-stream bulk transfer. The client sends a small
// request on stream 0 and the server answers with `transfer_size` bytes.
// Driven purely by on_datagram/on_wakeup; output is collected with
// take_outgoing().
class Connection {
 public:
  Connection(Role role, EndpointConfig cfg, Trace* trace = nullptr);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // Client only: sends the first handshake flight on path 0.
  void start(Time now);
  void on_datagram(const Datagram& dg, Time now);
  void on_wakeup(Time now);
  std::optional<Time> next_wakeup() const;
  std::vector<Datagram> take_outgoing();

  Role role() const { return role_; }
  bool handshake_complete() const { return handshake_done_; }
  // Negotiated design; single-space when multipath was refused.
  Design design() const { return design_; }
  bool multipath() const { return multipath_; }
  bool closed() const { return closed_; }
  // Client: time the CONNECTION_CLOSE arrived.
  std::optional<Time> completion_time() const { return completion_time_; }
  std::optional<Time> first_send_time() const { return first_send_time_; }

  std::vector<PathId> validated_paths() const { return paths_mgr_.validated_paths(); }
  const ConnectionStats& stats() const { return stats_; }
  std::uint64_t bytes_received() const;
  std::uint64_t duplicates_received() const { return ack_ ? ack_->duplicates() : 0; }
  const RetransmissionLedger& ledger() const { return ledger_; }
  const AckManager* ack_manager() const { return ack_.get(); }
  const LossRecovery& recovery() const { return recovery_; }
  const CongestionController* congestion(PathId path) const;
  std::uint64_t receive_window() const { return window_; }

 private:
  struct PathCtx {
    std::unique_ptr<CongestionController> cc;
    Pacer pacer;
    std::vector<wire::Frame> probe_frames;  // PATH_CHALLENGE/RESPONSE
    bool ping_pending = false;
    bool pto_probe = false;  // one packet may exceed cwnd
    std::string last_mode;
  };

  struct Builder {
    wire::Packet packet;
    SentPacketRecord record;
    std::size_t remaining = kMss - kPacketOverhead;

    bool add(wire::Frame f);
  };

  void trace(TraceEvent e);
  void send_handshake(Time now);
  void on_handshake(const wire::HandshakeParams& hp, PathId path, Time now);
  void complete_handshake(std::optional<Design> negotiated, Time now);
  void ensure_path(PathId path);
  void maybe_open_paths(Time now);

  void process_frame(const wire::Frame& f, PathId path, Time now);
  void process_ack(const wire::AckFrame& f, Time now);
  void process_stream(const wire::StreamFrame& f, Time now);
  void on_lost(const LostPacket& lp, Time now);
  void on_stream_acked(const SentPacketRecord& rec);
  void trace_cc(PathId path, Time now, bool force);
  void check_done(Time now);
  void send_close(Time now);

  void flush(Time now);
  void send_probes(Time now);
  void send_due_acks(Time now);
  bool send_one(Time now);
  bool payload_pending() const;
  bool new_data_available() const;
  bool can_send_data(PathId path, Time now);
  void add_acks(Builder& b, const std::vector<AckFrameInfo>& frames, PathId path, Time now);
  void add_payload(Builder& b, PathId path);
  void maybe_add_ping(Builder& b, Time now);
  void emit(Builder& b, PathId path, Time now);

  Duration min_srtt() const;
  Duration max_srtt() const;

  Role role_;
  EndpointConfig cfg_;
  Trace* trace_;
  Side side_;

  bool handshake_done_ = false;
  bool peer_confirmed_ = false;  // server: client 1-RTT seen
  bool multipath_ = false;
  Design design_ = Design::kSingleSpace;
  std::uint64_t handshake_sent_ = 0;
  std::optional<Time> handshake_deadline_;
  std::uint64_t peer_initial_max_data_ = 0;

  PathManager paths_mgr_;
  PacketNumberAllocator allocator_;
  LossRecovery recovery_;
  std::unique_ptr<AckManager> ack_;
  std::map<PathId, PathCtx> ctx_;
  std::set<PathId> want_paths_;
  std::size_t rr_next_ = 0;
  std::optional<Time> pacing_wakeup_;

  std::deque<wire::Frame> control_;
  std::optional<Time> last_ping_;
  bool ack_frequency_sent_ = false;
  std::map<SpaceId, PacketNumber> largest_acked_;

  // Send side of stream 0.
  std::optional<std::uint64_t> send_total_;
  std::uint64_t next_offset_ = 0;
  bool fin_sent_ = false;
  bool fin_acked_ = false;
  RetransmissionLedger ledger_;
  std::uint64_t peer_max_data_ = 0;
  std::uint64_t peer_max_stream_data_ = 0;

  // Receive side of stream 0.
  RangeSet recv_;
  std::optional<std::uint64_t> final_size_;
  std::uint64_t window_;
  std::uint64_t advertised_;
  std::optional<Time> last_window_update_;

  bool close_sent_ = false;
  std::uint64_t close_count_ = 0;
  std::optional<Time> close_deadline_;
  PathId close_path_ = 0;
  bool closed_ = false;
  std::optional<Time> completion_time_;
  std::optional<Time> first_send_time_;

  std::vector<Datagram> outgoing_;
  std::vector<TraceEvent> pending_retx_;
  ConnectionStats stats_;
};

}  // namespace mpq
