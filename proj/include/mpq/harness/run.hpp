#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpq/acktrack.hpp"
#include "mpq/cc.hpp"
#include "mpq/endpoint.hpp"
#include "mpq/harness/scenario.hpp"
#include "mpq/trace.hpp"

namespace mpq::harness {

struct RunConfig {
  std::string id = "0";
  Family family = Family::kHetero2;
  std::size_t point_index = 0;
  std::vector<double> point;
  // One entry per path; a single entry gives a single-path connection.
  std::vector<PathSpec> paths;
  Design design = Design::kMultiSpace;
  CcKind cc = CcKind::kCubic;
  std::uint64_t ab_limit = 32;
  RangeStrategy strategy = RangeStrategy::kLargestFirst;
  AckDispatch dispatch = AckDispatch::kOnPath;
  bool pquic_mode = false;
  bool ack_frequency = true;
  std::uint64_t transfer_size = 5 * kMiB;
  std::uint64_t seed = 1;
  bool trace_links = false;
  double time_limit_s = 600;

  EndpointConfig endpoint(Role role) const;
  void validate() const;
};

struct RunMetrics {
  bool completed = false;
  double transfer_time_s = 0;
  double mean_ranges_per_ack_frame = 0;
  double frac_ack_frames_at_limit = 0;
  double rel_retransmitted = 0;
  std::uint64_t max_per_byte_retrans = 0;
  std::uint64_t ack_bytes_total = 0;
  std::uint64_t ack_frames = 0;
  std::uint64_t buffer_drops = 0;
  std::uint64_t spurious_losses = 0;
  std::uint64_t packets_lost = 0;
  std::uint64_t duplicates = 0;

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

// Metrics recomputed from a trace alone.
RunMetrics extract_metrics(const Trace& trace, std::uint64_t transfer_size);

struct RunResult {
  RunConfig config;
  RunMetrics metrics;
  // Metrics read from endpoint counters, for cross-checking the trace.
  RunMetrics online;
  Trace trace;
  std::uint64_t events = 0;
  double sim_end_s = 0;
};

RunResult run_once(const RunConfig& cfg);
// Same network and metrics as run_once, with hand-built endpoint settings.
RunResult run_endpoints(const RunConfig& cfg, const EndpointConfig& client,
                        const EndpointConfig& server);

// Runs independent configs on `jobs` threads; results keep input order.
std::vector<RunResult> run_batch(const std::vector<RunConfig>& configs, unsigned jobs,
                                 const std::function<void(const RunResult&)>& on_done = {});

}  // namespace mpq::harness
