#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mpq/types.hpp"

namespace mpq::harness {

enum class Family { kHomo2, kHetero2, kHetero3 };
std::string to_string(Family f);
Family parse_family(const std::string& s);

struct PathSpec {
  double bandwidth_mbps = 0;
  double rtt_ms = 0;
  friend bool operator==(const PathSpec&, const PathSpec&) = default;
};

inline constexpr double kHetero2TotalMbps = 100;
inline constexpr double kHetero2TotalRttMs = 200;
inline constexpr double kHetero3TotalMbps = 100;
inline constexpr double kHetero3TotalRttMs = 300;

std::vector<PathSpec> homo2_paths(double bandwidth_mbps, double rtt_ms);
// Balances in [0.1, 0.9]; first path takes the balance share.
std::vector<PathSpec> hetero2_paths(double bal_bw, double bal_rtt);
// Each value is its weight over the weight sum, times the total.
std::vector<PathSpec> hetero3_paths(const std::array<double, 3>& w_bw,
                                    const std::array<double, 3>& w_rtt);

double aggregate_bandwidth_mbps(const std::vector<PathSpec>& paths);

// Box-bounded experiment parameter space.
struct ParamSpace {
  Family family;
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> bounds;

  std::size_t dims() const { return bounds.size(); }
};

ParamSpace param_space(Family f);
std::vector<PathSpec> paths_for(Family f, const std::vector<double>& point);

// Space-filling subset of `candidates` seeded uniform points. The result
// is in the space's coordinates, in selection order.
std::vector<std::vector<double>> wsp_design(const ParamSpace& space, std::size_t n_points,
                                            std::uint64_t seed, std::size_t candidates = 4096);

// Seeded uniform points in the unit cube; 53-bit mantissas from mt19937_64
// so the stream is identical across standard libraries.
std::vector<std::vector<double>> uniform_points(std::size_t dims, std::size_t n,
                                                std::uint64_t seed);
double min_pairwise_distance(const std::vector<std::vector<double>>& unit_points);

// Maps between a space's coordinates and the unit cube.
std::vector<double> to_unit(const ParamSpace& space, const std::vector<double>& point);
std::vector<double> from_unit(const ParamSpace& space, const std::vector<double>& unit);

}  // namespace mpq::harness
