#include "mpq/harness/run.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "mpq/netsim.hpp"
#include "mpq/sendtrack.hpp"

namespace mpq::harness {

EndpointConfig RunConfig::endpoint(Role role) const {
  EndpointConfig e;
  if (role == Role::kClient) {
    e.support = {design == Design::kSingleSpace, design == Design::kMultiSpace};
  } else {
    e.support = {true, true};
  }
  e.ack.ab_limit = ab_limit;
  e.ack.strategy = strategy;
  e.ack.dispatch = dispatch;
  e.ack.pquic_mode = pquic_mode;
  e.ack.ack_frequency_enabled = ack_frequency && !pquic_mode;
  e.cc = cc;
  // The pquic-like profile uses plain Cubic slow start.
  e.cubic_rtt_exit = !pquic_mode;
  e.send_ack_frequency = ack_frequency && !pquic_mode;
  e.path_count = paths.size();
  e.transfer_size = transfer_size;
  e.seed = seed;
  return e;
}

void RunConfig::validate() const {
  if (paths.empty()) throw ConfigError("run needs at least one path");
  if (paths.size() > 8) throw ConfigError("at most 8 paths");
  for (const auto& p : paths) {
    if (!(p.bandwidth_mbps > 0) || !(p.rtt_ms > 0)) throw ConfigError("path values must be positive");
  }
  if (!(time_limit_s > 0)) throw ConfigError("time_limit_s must be positive");
}

namespace {

class Session {
 public:
  Session(const RunConfig& cfg, const EndpointConfig& client, const EndpointConfig& server)
      : cfg_(cfg),
        trace_(true),
        client_(Role::kClient, client, &trace_),
        server_(Role::kServer, server, &trace_) {
    for (const auto& p : cfg.paths) {
      const auto lc = netsim::LinkConfig::for_path(
          p.bandwidth_mbps * 1e6, from_seconds(p.rtt_ms / 1000.0));
      up_.emplace_back(lc);
      down_.emplace_back(lc);
    }
  }

  RunResult run() {
    client_.start(sim_.now());
    pump(client_side_);
    const Time limit = kTimeZero + from_seconds(cfg_.time_limit_s);
    sim_.run_until_idle(limit);

    RunResult r;
    r.config = cfg_;
    r.events = sim_.processed();
    r.sim_end_s = to_seconds(sim_.now() - kTimeZero);
    r.metrics = extract_metrics(trace_, cfg_.transfer_size);
    r.online = online_metrics();
    r.trace = std::move(trace_);
    return r;
  }

 private:
  struct Peer {
    Connection* conn;
    bool is_client;
    std::uint64_t generation = 0;
    std::optional<Time> scheduled;
  };

  void pump(Peer& s) {
    for (auto& dg : s.conn->take_outgoing()) transmit(s, std::move(dg));
    if (client_.closed()) {
      sim_.stop();
      return;
    }
    auto next = s.conn->next_wakeup();
    if (next == s.scheduled) return;
    s.scheduled = next;
    const std::uint64_t gen = ++s.generation;
    if (!next) return;
    sim_.schedule(std::max(*next, sim_.now()), [this, &s, gen] {
      if (gen != s.generation) return;
      s.scheduled.reset();
      s.conn->on_wakeup(sim_.now());
      pump(s);
    });
  }

  void transmit(Peer& from, Datagram dg) {
    auto& links = from.is_client ? up_ : down_;
    if (dg.path >= links.size()) throw ProtocolError("datagram on unknown path");
    const std::size_t bytes = dg.size() + kIpUdpOverhead;
    const std::string dir = from.is_client ? "up" : "down";
    auto res = links[dg.path].enqueue(bytes, sim_.now());
    if (res.dropped) {
      trace_net(EventType::kBufferDrop, dg.path, bytes, dir, sim_.now());
      return;
    }
    if (cfg_.trace_links) trace_net(EventType::kLinkEnqueue, dg.path, bytes, dir, sim_.now());
    Peer& to = from.is_client ? server_side_ : client_side_;
    auto* link = &links[dg.path];
    sim_.schedule(res.arrival, [this, &to, link, dg = std::move(dg), bytes, dir] {
      link->on_delivered();
      if (cfg_.trace_links) trace_net(EventType::kLinkDeliver, dg.path, bytes, dir, sim_.now());
      to.conn->on_datagram(dg, sim_.now());
      pump(to);
    });
  }

  void trace_net(EventType type, PathId path, std::size_t bytes, const std::string& dir, Time t) {
    TraceEvent e;
    e.time = t;
    e.type = type;
    e.side = Side::kNetwork;
    e.path = path;
    e.bytes = bytes;
    e.text = dir;
    trace_.add(std::move(e));
  }

  RunMetrics online_metrics() const {
    RunMetrics m;
    const auto& cs = client_.stats();
    const auto& ss = server_.stats();
    m.completed = client_.completion_time().has_value();
    if (m.completed && client_.first_send_time()) {
      m.transfer_time_s = to_seconds(*client_.completion_time() - *client_.first_send_time());
    }
    m.ack_frames = cs.ack_frames;
    m.ack_bytes_total = cs.ack_bytes;
    if (cs.ack_frames > 0) {
      m.mean_ranges_per_ack_frame = static_cast<double>(cs.ack_ranges) / cs.ack_frames;
      m.frac_ack_frames_at_limit = static_cast<double>(cs.ack_frames_at_limit) / cs.ack_frames;
    }
    if (cfg_.transfer_size > 0) {
      m.rel_retransmitted =
          static_cast<double>(server_.ledger().retransmitted_bytes()) / cfg_.transfer_size;
    }
    m.max_per_byte_retrans = server_.ledger().max_per_byte();
    for (const auto& l : up_) m.buffer_drops += l.dropped();
    for (const auto& l : down_) m.buffer_drops += l.dropped();
    m.spurious_losses = ss.spurious_losses;
    m.packets_lost = ss.packets_lost;
    m.duplicates = client_.duplicates_received();
    return m;
  }

  RunConfig cfg_;
  Trace trace_;
  netsim::Simulator sim_;
  Connection client_;
  Connection server_;
  std::vector<netsim::Link> up_;
  std::vector<netsim::Link> down_;
  Peer client_side_{&client_, true, 0, std::nullopt};
  Peer server_side_{&server_, false, 0, std::nullopt};
};

}  // namespace

RunMetrics extract_metrics(const Trace& trace, std::uint64_t transfer_size) {
  RunMetrics m;
  std::optional<Time> first_client_send, close_rx;
  std::uint64_t ranges = 0, at_limit = 0, stream_bytes = 0;
  ByteCounter per_byte;
  for (const auto& e : trace.events()) {
    switch (e.type) {
      case EventType::kPacketSent:
        if (e.side == Side::kClient && !first_client_send) first_client_send = e.time;
        break;
      case EventType::kCloseReceived:
        if (e.side == Side::kClient) close_rx = e.time;
        break;
      case EventType::kAckGenerated:
        if (e.side != Side::kClient) break;
        ++m.ack_frames;
        ranges += e.count;
        at_limit += e.flag ? 1 : 0;
        m.ack_bytes_total += e.bytes;
        break;
      case EventType::kStreamFrameSent:
        if (e.side != Side::kServer || e.length == 0) break;
        stream_bytes += e.length;
        per_byte.add({e.offset, e.offset + e.length - 1});
        break;
      case EventType::kBufferDrop: ++m.buffer_drops; break;
      case EventType::kSpuriousLoss:
        if (e.side == Side::kServer) ++m.spurious_losses;
        break;
      case EventType::kPacketLost:
        if (e.side == Side::kServer) ++m.packets_lost;
        break;
      case EventType::kDuplicateReceived:
        if (e.side == Side::kClient) ++m.duplicates;
        break;
      default: break;
    }
  }
  m.completed = close_rx.has_value();
  if (m.completed && first_client_send) m.transfer_time_s = to_seconds(*close_rx - *first_client_send);
  if (m.ack_frames > 0) {
    m.mean_ranges_per_ack_frame = static_cast<double>(ranges) / m.ack_frames;
    m.frac_ack_frames_at_limit = static_cast<double>(at_limit) / m.ack_frames;
  }
  // Every byte goes out once; anything beyond that is retransmission.
  const std::uint64_t first_copies = std::min(stream_bytes, transfer_size);
  if (transfer_size > 0) {
    m.rel_retransmitted = static_cast<double>(stream_bytes - first_copies) / transfer_size;
  }
  m.max_per_byte_retrans = per_byte.max() > 0 ? per_byte.max() - 1 : 0;
  return m;
}

RunResult run_once(const RunConfig& cfg) {
  cfg.validate();
  Session s(cfg, cfg.endpoint(Role::kClient), cfg.endpoint(Role::kServer));
  return s.run();
}

RunResult run_endpoints(const RunConfig& cfg, const EndpointConfig& client,
                        const EndpointConfig& server) {
  cfg.validate();
  Session s(cfg, client, server);
  return s.run();
}

std::vector<RunResult> run_batch(const std::vector<RunConfig>& configs, unsigned jobs,
                                 const std::function<void(const RunResult&)>& on_done) {
  std::vector<RunResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      try {
        results[i] = run_once(configs[i]);
        if (on_done) {
          std::lock_guard lock(mu);
          on_done(results[i]);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next.store(configs.size());
        return;
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace mpq::harness
