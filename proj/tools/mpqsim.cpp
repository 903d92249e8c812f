#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mpq/harness/config.hpp"
#include "mpq/harness/replay.hpp"
#include "mpq/harness/report.hpp"
#include "mpq/harness/run.hpp"

namespace fs = std::filesystem;
using namespace mpq;
using namespace mpq::harness;

namespace {

template <class T, class F>
std::vector<T> parse_all(const std::vector<std::string>& in, F conv) {
  std::vector<T> out;
  for (const auto& s : in) out.push_back(conv(s));
  return out;
}

std::string intervals(const std::vector<Interval>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? "," : "") + std::string("[") + std::to_string(v[i].lo) + ".." + std::to_string(v[i].hi) + "]";
  }
  return "{" + s + "}";
}

void print_summary(const std::vector<RunRow>& rows) {
  std::printf("%-48s %4s %9s %9s %7s %7s %9s %10s\n", "variant", "runs", "med_t_s", "max_t_s",
              "ranges", "atlim", "retx", "ack_bytes");
  for (const auto& g : summarize(rows)) {
    std::printf("%-48s %4zu %9.3f %9.3f %7.2f %7.3f %9.5f %10.0f\n", g.label.c_str(), g.runs,
                g.median_transfer_time_s, g.max_transfer_time_s, g.median_ranges,
                g.median_frac_at_limit, g.median_rel_retransmitted, g.median_ack_bytes);
  }
}

int cmd_run(const ExperimentSpec& spec, const std::string& out_dir, unsigned jobs, bool traces,
            bool quiet) {
  const auto configs = expand(spec);
  fs::create_directories(out_dir);
  {
    std::ofstream f(fs::path(out_dir) / "experiment.json");
    f << to_json(spec) << "\n";
  }
  {
    std::ofstream f(fs::path(out_dir) / "points.csv");
    write_points_csv(f, spec.family, experiment_points(spec));
  }
  if (traces) fs::create_directories(fs::path(out_dir) / "traces");
  std::size_t done = 0;
  auto results = run_batch(configs, jobs, [&](const RunResult& r) {
    ++done;
    if (traces) {
      std::ofstream f(fs::path(out_dir) / "traces" / ("run-" + r.config.id + ".jsonl"));
      r.trace.write_jsonl(f);
    }
    if (!quiet) {
      std::fprintf(stderr, "[%zu/%zu] %s t=%.3fs ranges=%.2f retx=%.4f%s\n", done, configs.size(),
                   r.config.id.c_str(), r.metrics.transfer_time_s, r.metrics.mean_ranges_per_ack_frame,
                   r.metrics.rel_retransmitted, r.metrics.completed ? "" : " (incomplete)");
    }
  });
  std::vector<RunRow> rows;
  for (const auto& r : results) rows.push_back(to_row(r));
  std::ofstream f(fs::path(out_dir) / "runs.csv");
  write_runs_csv(f, rows);
  print_summary(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic multipath QUIC acknowledgment simulator"};
  app.require_subcommand(1);

  // ---------------------------------------------------------------- run
  auto* run = app.add_subcommand("run", "Run an experiment family over a space-filling design");
  std::string family = "hetero2", out_dir = "results", config_file;
  std::vector<std::string> designs{"mpns"}, ccs{"cubic"}, ab_limits{"32"}, strategies{"largest-first"},
      dispatches{"on-path"};
  bool pquic = false, both_pquic = false, no_ack_freq = false, traces = false, quiet = false;
  std::uint64_t size = 50 * kMiB, seed = 42, run_seed = 1;
  std::size_t points = 95;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  double time_limit = 600;
  run->add_option("--config", config_file, "Experiment JSON; replaces the variant flags");
  run->add_option("--family", family, "homo2|hetero2|hetero3")->capture_default_str();
  run->add_option("--design", designs, "spns,mpns")->delimiter(',')->capture_default_str();
  run->add_option("--cc", ccs, "cubic,bbr")->delimiter(',')->capture_default_str();
  run->add_option("--ab-limit", ab_limits, "4,8,16,32,inf")->delimiter(',')->capture_default_str();
  run->add_option("--strategy", strategies, "largest-first,lowest-first")->delimiter(',')->capture_default_str();
  run->add_option("--dispatch", dispatches, "on-path,duplicate")->delimiter(',')->capture_default_str();
  run->add_flag("--pquic-mode", pquic, "Acknowledge every path every two packets");
  run->add_flag("--both-pquic-modes", both_pquic, "Run each variant with and without pquic mode");
  run->add_flag("--no-ack-frequency", no_ack_freq, "Never send ACK_FREQUENCY");
  run->add_option("--size", size, "Transfer size in bytes")->capture_default_str();
  run->add_option("--points", points, "Design points")->capture_default_str();
  run->add_option("--seed", seed, "Design seed")->capture_default_str();
  run->add_option("--run-seed", run_seed, "Endpoint seed")->capture_default_str();
  run->add_option("--time-limit", time_limit, "Simulated seconds per run")->capture_default_str();
  run->add_option("--jobs,-j", jobs, "Concurrent simulations")->capture_default_str();
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_flag("--traces", traces, "Write traces/run-<id>.jsonl");
  run->add_flag("--quiet,-q", quiet, "No per-run progress");

  // ------------------------------------------------------------- design
  auto* design = app.add_subcommand("design", "Print the space-filling design points as CSV");
  std::string d_family = "hetero2";
  std::size_t d_points = 95;
  std::uint64_t d_seed = 42;
  design->add_option("--family", d_family, "homo2|hetero2|hetero3")->capture_default_str();
  design->add_option("--points", d_points)->capture_default_str();
  design->add_option("--seed", d_seed)->capture_default_str();

  // ------------------------------------------------------------- report
  auto* report = app.add_subcommand("report", "Summaries and SVG plots from runs.csv");
  std::string in_dir = "results";
  bool csv = false, svg = false;
  report->add_option("--in", in_dir, "Directory holding runs.csv")->capture_default_str();
  report->add_flag("--csv", csv, "Write summary.csv and time_ratios.csv");
  report->add_flag("--svg", svg, "Write plots/*.svg");

  // ------------------------------------------------------------- replay
  auto* replay = app.add_subcommand("replay", "Run one config with a full trace");
  std::string replay_config, trace_out;
  replay->add_option("--config", replay_config, "RunConfig JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--trace", trace_out, "Trace output (default: stdout summary only)");

  // ------------------------------------------------------------ reorder
  auto* reorder = app.add_subcommand("reorder", "Scripted two-path reordering scenario");
  std::string r_design = "spns";
  reorder->add_option("--design", r_design, "spns|mpns")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentSpec spec;
      if (!config_file.empty()) {
        spec = load_experiment(config_file);
      } else {
        spec.family = parse_family(family);
        spec.points = points;
        spec.design_seed = seed;
        spec.designs = parse_all<Design>(designs, parse_design);
        spec.ccs = parse_all<CcKind>(ccs, parse_cc);
        spec.ab_limits = parse_all<std::uint64_t>(ab_limits, parse_ab_limit);
        spec.strategies = parse_all<RangeStrategy>(strategies, parse_strategy);
        spec.dispatches = parse_all<AckDispatch>(dispatches, parse_dispatch);
        spec.pquic_modes = both_pquic ? std::vector<bool>{false, true} : std::vector<bool>{pquic};
        spec.ack_frequency = !no_ack_freq;
        spec.transfer_size = size;
        spec.seed = run_seed;
        spec.time_limit_s = time_limit;
      }
      return cmd_run(spec, out_dir, jobs, traces, quiet);
    }
    if (design->parsed()) {
      const auto f = parse_family(d_family);
      write_points_csv(std::cout, f, wsp_design(param_space(f), d_points, d_seed));
      return 0;
    }
    if (report->parsed()) {
      std::ifstream f(fs::path(in_dir) / "runs.csv");
      if (!f) throw ConfigError("no runs.csv in '" + in_dir + "'");
      const auto rows = read_runs_csv(f);
      print_summary(rows);
      for (const auto& rs : time_ratios(rows)) {
        std::printf("ratio %s / %s: median %.3f over %zu points\n", rs.original.c_str(),
                    rs.fixed.c_str(), median(rs.ratios), rs.ratios.size());
      }
      for (const auto& file : write_report(rows, in_dir, csv, svg)) std::printf("wrote %s\n", file.c_str());
      return 0;
    }
    if (replay->parsed()) {
      auto cfg = load_run_config(replay_config);
      cfg.trace_links = true;
      const auto r = run_once(cfg);
      if (!trace_out.empty()) {
        std::ofstream f(trace_out);
        r.trace.write_jsonl(f);
      }
      const auto& m = r.metrics;
      std::printf(
          "id=%s completed=%d transfer_time_s=%.6f mean_ranges=%.4f frac_at_limit=%.4f "
          "rel_retransmitted=%.6f max_per_byte=%llu ack_bytes=%llu drops=%llu events=%zu\n",
          cfg.id.c_str(), m.completed, m.transfer_time_s, m.mean_ranges_per_ack_frame,
          m.frac_ack_frames_at_limit, m.rel_retransmitted,
          static_cast<unsigned long long>(m.max_per_byte_retrans),
          static_cast<unsigned long long>(m.ack_bytes_total),
          static_cast<unsigned long long>(m.buffer_drops), r.trace.events().size());
      return 0;
    }
    if (reorder->parsed()) {
      ReplaySetup setup;
      setup.design = parse_design(r_design);
      const auto r = reordering_replay(setup);
      for (const auto& a : r.arrivals) {
        std::printf("t=%7.3fms arrive path=%s space=%llu pn=%llu\n", to_ms(a.time - kTimeZero),
                    a.path == kLowerPath ? "lower" : "upper", static_cast<unsigned long long>(a.space),
                    static_cast<unsigned long long>(a.pn));
      }
      for (const auto& a : r.acks) {
        std::printf("t=%7.3fms %s space=%llu on %s ranges=%s\n", to_ms(a.time - kTimeZero),
                    a.multipath ? "ACK_MP" : "ACK", static_cast<unsigned long long>(a.space),
                    a.path == kLowerPath ? "lower" : "upper", intervals(a.ranges).c_str());
      }
      std::printf("after 4th lower-path packet: %s, previous ACK %s\n", intervals(r.snapshot).c_str(),
                  r.prior_ack ? intervals(r.prior_ack->ranges).c_str() : "none");
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
