#include "mpq/harness/scenario.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace mpq::harness {

std::string to_string(Family f) {
  switch (f) {
    case Family::kHomo2: return "homo2";
    case Family::kHetero2: return "hetero2";
    case Family::kHetero3: return "hetero3";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  if (s == "homo2") return Family::kHomo2;
  if (s == "hetero2") return Family::kHetero2;
  if (s == "hetero3") return Family::kHetero3;
  throw ConfigError("unknown family '" + s + "'");
}

std::vector<PathSpec> homo2_paths(double bandwidth_mbps, double rtt_ms) {
  if (bandwidth_mbps <= 0 || rtt_ms <= 0) throw ConfigError("path values must be positive");
  return {{bandwidth_mbps, rtt_ms}, {bandwidth_mbps, rtt_ms}};
}

namespace {

void check_balance(double v) {
  if (!(v >= 0.1 - 1e-12 && v <= 0.9 + 1e-12)) throw ConfigError("balance/weight outside [0.1, 0.9]");
}

}  // namespace

std::vector<PathSpec> hetero2_paths(double bal_bw, double bal_rtt) {
  check_balance(bal_bw);
  check_balance(bal_rtt);
  return {{bal_bw * kHetero2TotalMbps, bal_rtt * kHetero2TotalRttMs},
          {kHetero2TotalMbps - bal_bw * kHetero2TotalMbps,
           kHetero2TotalRttMs - bal_rtt * kHetero2TotalRttMs}};
}

std::vector<PathSpec> hetero3_paths(const std::array<double, 3>& w_bw,
                                    const std::array<double, 3>& w_rtt) {
  for (double w : w_bw) check_balance(w);
  for (double w : w_rtt) check_balance(w);
  const double sb = w_bw[0] + w_bw[1] + w_bw[2];
  const double sr = w_rtt[0] + w_rtt[1] + w_rtt[2];
  std::vector<PathSpec> out;
  for (int i = 0; i < 3; ++i) {
    out.push_back({w_bw[i] / sb * kHetero3TotalMbps, w_rtt[i] / sr * kHetero3TotalRttMs});
  }
  return out;
}

double aggregate_bandwidth_mbps(const std::vector<PathSpec>& paths) {
  double s = 0;
  for (const auto& p : paths) s += p.bandwidth_mbps;
  return s;
}

ParamSpace param_space(Family f) {
  switch (f) {
    case Family::kHomo2:
      return {f, {"bandwidth_mbps", "rtt_ms"}, {{2.5, 100}, {5, 100}}};
    case Family::kHetero2:
      return {f, {"bal_bw", "bal_rtt"}, {{0.1, 0.9}, {0.1, 0.9}}};
    case Family::kHetero3:
      return {f,
              {"w_bw1", "w_bw2", "w_bw3", "w_rtt1", "w_rtt2", "w_rtt3"},
              std::vector<std::pair<double, double>>(6, {0.1, 0.9})};
  }
  throw ConfigError("unknown family");
}

std::vector<PathSpec> paths_for(Family f, const std::vector<double>& p) {
  const auto space = param_space(f);
  if (p.size() != space.dims()) throw ConfigError("point has wrong dimension for " + to_string(f));
  switch (f) {
    case Family::kHomo2: return homo2_paths(p[0], p[1]);
    case Family::kHetero2: return hetero2_paths(p[0], p[1]);
    case Family::kHetero3: return hetero3_paths({p[0], p[1], p[2]}, {p[3], p[4], p[5]});
  }
  throw ConfigError("unknown family");
}

std::vector<std::vector<double>> uniform_points(std::size_t dims, std::size_t n,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> out(n, std::vector<double>(dims));
  for (auto& pt : out) {
    for (auto& x : pt) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
  return out;
}

namespace {

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// One maximin sweep: start nearest the centre, drop every candidate closer
// than dmin to the current point, move to the nearest survivor.
std::vector<std::size_t> wsp_select(const std::vector<std::vector<double>>& pts, double dmin,
                                    std::size_t stop_after) {
  const std::size_t dims = pts.front().size();
  const std::vector<double> centre(dims, 0.5);
  std::size_t cur = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = dist2(pts[i], centre);
    if (d < best) {
      best = d;
      cur = i;
    }
  }
  std::vector<std::size_t> alive;
  alive.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i != cur) alive.push_back(i);
  }
  const double dmin2 = dmin * dmin;
  std::vector<std::size_t> chosen{cur};
  while (!alive.empty() && chosen.size() < stop_after) {
    std::vector<std::size_t> next;
    next.reserve(alive.size());
    std::size_t nearest = 0;
    double nd = std::numeric_limits<double>::infinity();
    for (std::size_t i : alive) {
      const double d = dist2(pts[i], pts[cur]);
      if (d < dmin2) continue;
      if (d < nd) {
        nd = d;
        nearest = i;
      }
      next.push_back(i);
    }
    if (next.empty()) break;
    cur = nearest;
    chosen.push_back(cur);
    std::erase(next, cur);
    alive.swap(next);
  }
  return chosen;
}

}  // namespace

std::vector<double> to_unit(const ParamSpace& space, const std::vector<double>& point) {
  std::vector<double> u(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const auto [lo, hi] = space.bounds[i];
    u[i] = (point[i] - lo) / (hi - lo);
  }
  return u;
}

std::vector<double> from_unit(const ParamSpace& space, const std::vector<double>& unit) {
  std::vector<double> p(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const auto [lo, hi] = space.bounds[i];
    p[i] = lo + unit[i] * (hi - lo);
  }
  return p;
}

std::vector<std::vector<double>> wsp_design(const ParamSpace& space, std::size_t n_points,
                                            std::uint64_t seed, std::size_t candidates) {
  if (n_points == 0) throw ConfigError("design needs at least one point");
  if (n_points > candidates) throw ConfigError("more design points than candidates");
  const auto pts = uniform_points(space.dims(), candidates, seed);
  const std::size_t unlimited = candidates + 1;

  std::vector<std::size_t> chosen;
  if (n_points == candidates) {
    chosen = wsp_select(pts, 0.0, unlimited);
  } else {
    // Selected count shrinks as dmin grows; bisect for exactly n_points.
    double lo = 0.0, hi = std::sqrt(static_cast<double>(space.dims()));
    std::vector<std::size_t> best_over = wsp_select(pts, lo, unlimited);
    for (int iter = 0; iter < 64; ++iter) {
      const double mid = 0.5 * (lo + hi);
      auto sel = wsp_select(pts, mid, unlimited);
      if (sel.size() == n_points) {
        best_over = std::move(sel);
        break;
      }
      if (sel.size() > n_points) {
        lo = mid;
        best_over = std::move(sel);
      } else {
        hi = mid;
      }
    }
    chosen = std::move(best_over);
    chosen.resize(n_points);
  }
  std::vector<std::vector<double>> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(from_unit(space, pts[i]));
  return out;
}

double min_pairwise_distance(const std::vector<std::vector<double>>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) best = std::min(best, dist2(pts[i], pts[j]));
  }
  return std::sqrt(best);
}

}  // namespace mpq::harness
