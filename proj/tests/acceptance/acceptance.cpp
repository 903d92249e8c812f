// Acceptance checks. Prints one PASS/FAIL line per criterion; the exit
// status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "mpq/harness/config.hpp"
#include "mpq/harness/replay.hpp"
#include "mpq/harness/report.hpp"
#include "mpq/harness/run.hpp"

using namespace mpq;
using namespace mpq::harness;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kDesignSeed = 42;
constexpr std::size_t kPoints = 20;
constexpr std::uint64_t kDeskSize = 5 * kMiB;
constexpr std::uint64_t kFullSize = 50 * kMiB;

unsigned g_jobs = 1;
bool g_verbose = false;

// Every run is memoized by config hash so criteria sharing a variant
// simulate it once, and the throughput check sees all of them.
std::map<std::uint64_t, RunResult> g_runs;

std::vector<RunConfig> family_configs(Family f, std::uint64_t size,
                                      const std::function<void(RunConfig&)>& variant) {
  const auto pts = wsp_design(param_space(f), kPoints, kDesignSeed);
  std::vector<RunConfig> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    RunConfig c;
    c.family = f;
    c.point_index = i;
    c.point = pts[i];
    c.paths = paths_for(f, pts[i]);
    c.transfer_size = size;
    variant(c);
    char id[16];
    std::snprintf(id, sizeof id, "-p%03zu", i);
    c.id = variant_label(c) + id;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<RunMetrics> run_all(const std::vector<RunConfig>& configs) {
  std::vector<RunConfig> todo;
  for (const auto& c : configs) {
    if (!g_runs.count(config_hash(c))) todo.push_back(c);
  }
  for (auto& r : run_batch(todo, g_jobs)) {
    r.trace = Trace(false);  // traces are not needed past metric extraction
    const auto h = config_hash(r.config);
    g_runs.emplace(h, std::move(r));
  }
  std::vector<RunMetrics> out;
  for (const auto& c : configs) {
    const auto& r = g_runs.at(config_hash(c));
    if (g_verbose) {
      const auto& m = r.metrics;
      std::printf("    %-52s t=%8.3fs ranges=%6.3f atlim=%.3f retx=%.4f ackB=%llu drops=%llu\n",
                  c.id.c_str(), m.transfer_time_s, m.mean_ranges_per_ack_frame,
                  m.frac_ack_frames_at_limit, m.rel_retransmitted,
                  static_cast<unsigned long long>(m.ack_bytes_total),
                  static_cast<unsigned long long>(m.buffer_drops));
    }
    out.push_back(r.metrics);
  }
  return out;
}

template <class F>
std::vector<double> column(const std::vector<RunMetrics>& ms, F f) {
  std::vector<double> out;
  for (const auto& m : ms) out.push_back(f(m));
  return out;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

bool all_completed(const std::vector<RunMetrics>& ms) {
  return std::all_of(ms.begin(), ms.end(), [](const RunMetrics& m) { return m.completed; });
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::string intervals(const std::vector<Interval>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? "," : "") + std::to_string(v[i].lo) + ".." + std::to_string(v[i].hi);
  }
  return "{" + s + "}";
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ------------------------------------------------------------------ 1
Outcome crit1() {
  const auto spns = reordering_replay();
  ReplaySetup ms;
  ms.design = Design::kMultiSpace;
  const auto mpns = reordering_replay(ms);

  const std::vector<Interval> want_snapshot{{0, 3}, {5, 5}, {7, 7}};
  const std::vector<Interval> want_prior{{5, 5}, {0, 3}};
  const bool snap_ok = spns.snapshot == want_snapshot;
  const bool prior_ok = spns.prior_ack && !spns.prior_ack->multipath && spns.prior_ack->ranges == want_prior;
  std::size_t mp_frames = 0, single = 0;
  for (const auto& a : mpns.acks) {
    ++mp_frames;
    single += a.multipath && a.ranges.size() == 1;
  }
  const bool mp_ok = mp_frames > 0 && single == mp_frames;
  return {snap_ok && prior_ok && mp_ok,
          fmt("SPNS snapshot %s, prior ACK %s; MPNS %zu/%zu ACK_MP frames with 1 range",
              intervals(spns.snapshot).c_str(),
              spns.prior_ack ? intervals(spns.prior_ack->ranges).c_str() : "none", single, mp_frames)};
}

// ------------------------------------------------------------------ 2
Outcome crit2() {
  const auto ms = run_all(family_configs(Family::kHomo2, kDeskSize, [](RunConfig& c) {
    c.design = Design::kMultiSpace;
  }));
  std::size_t clean = 0, single = 0;
  double worst = 1.0;
  for (const auto& m : ms) {
    if (m.buffer_drops != 0) continue;
    ++clean;
    if (m.mean_ranges_per_ack_frame == 1.0) {
      ++single;
    } else {
      worst = std::max(worst, m.mean_ranges_per_ack_frame);
    }
  }
  return {all_completed(ms) && clean > 0 && single == clean,
          fmt("%zu/%zu runs without buffer drops; %zu of them at exactly 1.0 ranges per ACK_MP "
              "(worst %.4f)",
              clean, ms.size(), single, worst)};
}

// ------------------------------------------------------------------ 3
Outcome crit3() {
  const std::vector<std::uint64_t> limits{32, 16, 8, 4};
  std::vector<double> med_retx, med_time;
  double max_retx_ab4 = 0;
  bool done = true;
  for (auto ab : limits) {
    const auto ms = run_all(family_configs(Family::kHetero2, kFullSize, [ab](RunConfig& c) {
      c.design = Design::kSingleSpace;
      c.cc = CcKind::kCubic;
      c.ab_limit = ab;
    }));
    done = done && all_completed(ms);
    const auto retx = column(ms, [](const RunMetrics& m) { return m.rel_retransmitted; });
    med_retx.push_back(median(retx));
    med_time.push_back(median(column(ms, [](const RunMetrics& m) { return m.transfer_time_s; })));
    if (ab == 4) max_retx_ab4 = max_of(retx);
  }
  const bool retx_up = std::is_sorted(med_retx.begin(), med_retx.end());
  const bool time_up = std::is_sorted(med_time.begin(), med_time.end());
  const bool extreme = max_retx_ab4 > 0.2;
  return {done && retx_up && time_up && extreme,
          fmt("ab 32/16/8/4 median retx %.4f/%.4f/%.4f/%.4f (%s), median time "
              "%.2f/%.2f/%.2f/%.2f s (%s), max retx at ab4 %.4f (%s 0.2)",
              med_retx[0], med_retx[1], med_retx[2], med_retx[3],
              retx_up ? "non-decreasing" : "NOT non-decreasing", med_time[0], med_time[1],
              med_time[2], med_time[3], time_up ? "non-decreasing" : "NOT non-decreasing",
              max_retx_ab4, extreme ? ">" : "<=")};
}

// ------------------------------------------------------------------ 4
Outcome crit4() {
  auto variant = [](Design d) {
    return [d](RunConfig& c) {
      c.design = d;
      c.ab_limit = 32;
    };
  };
  const auto spns = run_all(family_configs(Family::kHetero3, kFullSize, variant(Design::kSingleSpace)));
  const auto mpns = run_all(family_configs(Family::kHetero3, kFullSize, variant(Design::kMultiSpace)));
  const auto at_limit = std::count_if(spns.begin(), spns.end(), [](const RunMetrics& m) {
    return m.frac_ack_frames_at_limit >= 0.30;
  });
  const double ts = median(column(spns, [](const RunMetrics& m) { return m.transfer_time_s; }));
  const double tm = median(column(mpns, [](const RunMetrics& m) { return m.transfer_time_s; }));
  const bool majority = static_cast<std::size_t>(at_limit) * 2 > spns.size();
  return {all_completed(spns) && all_completed(mpns) && majority && ts >= tm,
          fmt("%ld/%zu SPNS runs with >= 30%% of ACK frames at the limit; median time SPNS %.2f s "
              "vs MPNS %.2f s",
              static_cast<long>(at_limit), spns.size(), ts, tm)};
}

// ------------------------------------------------------------------ 5
Outcome crit5() {
  bool pass = true;
  std::string detail;
  for (Design d : {Design::kSingleSpace, Design::kMultiSpace}) {
    auto variant = [d](AckDispatch dispatch) {
      return [d, dispatch](RunConfig& c) {
        c.design = d;
        c.cc = CcKind::kBbr;
        c.dispatch = dispatch;
      };
    };
    const auto orig = run_all(family_configs(Family::kHetero2, kFullSize, variant(AckDispatch::kOnPath)));
    const auto fixed =
        run_all(family_configs(Family::kHetero2, kFullSize, variant(AckDispatch::kDuplicateAll)));
    std::vector<double> ratios;
    for (std::size_t i = 0; i < orig.size(); ++i) {
      ratios.push_back(orig[i].transfer_time_s / fixed[i].transfer_time_s);
    }
    const double med = median(ratios);
    const double worst_o = max_of(column(orig, [](const RunMetrics& m) { return m.transfer_time_s; }));
    const double worst_f = max_of(column(fixed, [](const RunMetrics& m) { return m.transfer_time_s; }));
    const bool ok = all_completed(orig) && all_completed(fixed) && med >= 1.0 && worst_f <= worst_o;
    pass = pass && ok;
    detail += fmt("%s%s: median ratio original/fixed %.3f, worst time %.2f s -> %.2f s",
                  detail.empty() ? "" : "; ", to_string(d).c_str(), med, worst_o, worst_f);
  }
  return {pass, detail};
}

// ------------------------------------------------------------------ 6
Outcome crit6() {
  auto variant = [](Design d, bool pquic) {
    return [d, pquic](RunConfig& c) {
      c.design = d;
      c.cc = CcKind::kCubic;
      c.ab_limit = 32;
      c.pquic_mode = pquic;
    };
  };
  auto ack_bytes = [](const std::vector<RunMetrics>& ms) {
    return median(column(ms, [](const RunMetrics& m) { return static_cast<double>(m.ack_bytes_total); }));
  };
  const auto mp = run_all(family_configs(Family::kHetero2, kFullSize, variant(Design::kMultiSpace, false)));
  const auto sp = run_all(family_configs(Family::kHetero2, kFullSize, variant(Design::kSingleSpace, false)));
  const auto pq = run_all(family_configs(Family::kHetero2, kFullSize, variant(Design::kMultiSpace, true)));
  const double a = ack_bytes(mp), b = ack_bytes(sp), c = ack_bytes(pq);
  return {all_completed(mp) && all_completed(sp) && all_completed(pq) && a < b && b < c && a < c,
          fmt("median ACK bytes MPNS %.0f, SPNS %.0f, PQUIC-mode %.0f", a, b, c)};
}

// ------------------------------------------------------------------ 7
Outcome crit7() {
  // Homogeneous aggregation versus one of the two paths alone. At high
  // bandwidth-delay products a 5 MiB transfer is mostly slow start, so
  // this uses the full size.
  const auto two = family_configs(Family::kHomo2, kFullSize, [](RunConfig& c) {
    c.design = Design::kMultiSpace;
  });
  auto one = two;
  for (auto& c : one) {
    c.paths.resize(1);
    c.id += "-single";
  }
  const auto mt = run_all(two);
  const auto st = run_all(one);
  std::size_t aggregated = 0;
  double worst_ratio = 0;
  for (std::size_t i = 0; i < mt.size(); ++i) {
    const double r = mt[i].transfer_time_s / st[i].transfer_time_s;
    worst_ratio = std::max(worst_ratio, r);
    aggregated += r <= 0.75;
  }
  // Lower bound over every run simulated by this process.
  std::size_t checked = 0, below = 0;
  double tightest = 1e9;
  for (const auto& [h, r] : g_runs) {
    if (!r.metrics.completed) continue;
    const double bound =
        static_cast<double>(r.config.transfer_size) * 8 / (aggregate_bandwidth_mbps(r.config.paths) * 1e6);
    ++checked;
    below += r.metrics.transfer_time_s < bound;
    tightest = std::min(tightest, r.metrics.transfer_time_s / bound);
  }
  return {all_completed(mt) && all_completed(st) && aggregated == mt.size() && below == 0,
          fmt("%zu/%zu runs at or above size*8/aggregate bandwidth (closest %.3fx); homo2 MPNS <= "
              "0.75 x single path in %zu/%zu points (worst %.3f)",
              checked - below, checked, tightest, aggregated, mt.size(), worst_ratio)};
}

// ------------------------------------------------------------------ 8
std::string g_unit_binary;

Outcome crit8() {
  if (g_unit_binary.empty()) return {false, "no --unit-binary given"};
  const auto t0 = Clock::now();
  const std::string cmd = "\"" + g_unit_binary + "\" --minimal --no-intro";
  const int rc = std::system(cmd.c_str());
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {rc == 0 && secs < 60,
          fmt("unit and property suites %s in %.1f s (limit 60 s)", rc == 0 ? "passed" : "FAILED", secs)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  Outcome (*fn)();
};

const Criterion kCriteria[] = {
    {1, "reordering replay", 1, crit1},
    {2, "homogeneous single-range property", 120, crit2},
    {3, "AB-limit degradation trend", 600, crit3},
    {4, "3-path saturation", 600, crit4},
    {5, "ACK-duplication fix", 600, crit5},
    {6, "ACK overhead ordering", 600, crit6},
    {7, "throughput sanity", 600, crit7},
    {8, "unit/property suites", 60, crit8},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  g_jobs = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--criterion,-c", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--jobs,-j", g_jobs, "Concurrent simulations");
  app.add_option("--unit-binary", g_unit_binary, "Unit test executable for criterion 8");
  app.add_flag("--verbose,-v", g_verbose, "Print every run");
  CLI11_PARSE(app, argc, argv);
  std::set<int> want(selected.begin(), selected.end());

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!want.empty() && !want.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %d %s: %s: %s [%.1f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
