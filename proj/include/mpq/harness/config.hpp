#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpq/harness/run.hpp"

namespace mpq::harness {

// ab_limit text form: a number or "inf".
std::string ab_limit_to_string(std::uint64_t ab_limit);
std::uint64_t parse_ab_limit(const std::string& s);

// Short name of everything in a config except the scenario, e.g.
// "spns-cubic-ab32-largest-first-on-path".
std::string variant_label(const RunConfig& cfg);

// JSON document mirroring RunConfig; unknown keys are rejected.
std::string to_json(const RunConfig& cfg, int indent = 2);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& file);

// FNV-1a over the canonical JSON without the id; equal configs hash equal.
std::uint64_t config_hash(const RunConfig& cfg);

// A family, a seeded design and the cross product of protocol variants.
struct ExperimentSpec {
  Family family = Family::kHetero2;
  std::size_t points = 95;
  std::uint64_t design_seed = 42;
  std::vector<Design> designs{Design::kMultiSpace};
  std::vector<CcKind> ccs{CcKind::kCubic};
  std::vector<std::uint64_t> ab_limits{32};
  std::vector<RangeStrategy> strategies{RangeStrategy::kLargestFirst};
  std::vector<AckDispatch> dispatches{AckDispatch::kOnPath};
  std::vector<bool> pquic_modes{false};
  bool ack_frequency = true;
  std::uint64_t transfer_size = 50 * kMiB;
  std::uint64_t seed = 1;
  double time_limit_s = 600;

  void validate() const;
};

std::string to_json(const ExperimentSpec& spec, int indent = 2);
ExperimentSpec experiment_from_json(const std::string& text);
ExperimentSpec load_experiment(const std::string& file);

// Design points of the experiment, in the family's coordinates.
std::vector<std::vector<double>> experiment_points(const ExperimentSpec& spec);
// One config per (variant, point); variants outermost, ids "<label>-p<NNN>".
std::vector<RunConfig> expand(const ExperimentSpec& spec);

}  // namespace mpq::harness
