#include "mpq/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mpq::harness {

using nlohmann::json;

namespace {

std::string read_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(std::string("unknown ") + what + " key '" + k + "'");
  }
}

template <class T>
T get(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

json ab_limit_json(std::uint64_t v) {
  if (v == kUnlimitedAckBlocks) return "inf";
  return v;
}

std::uint64_t ab_limit_from(const json& j) {
  if (j.is_string()) return parse_ab_limit(j.get<std::string>());
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  throw ConfigError("ab_limit must be a non-negative integer or \"inf\"");
}

json run_json(const RunConfig& c, bool with_id) {
  json j;
  if (with_id) j["id"] = c.id;
  j["family"] = to_string(c.family);
  j["point_index"] = c.point_index;
  j["point"] = c.point;
  json paths = json::array();
  for (const auto& p : c.paths) paths.push_back({{"bandwidth_mbps", p.bandwidth_mbps}, {"rtt_ms", p.rtt_ms}});
  j["paths"] = paths;
  j["design"] = to_string(c.design);
  j["cc"] = to_string(c.cc);
  j["ab_limit"] = ab_limit_json(c.ab_limit);
  j["strategy"] = to_string(c.strategy);
  j["dispatch"] = to_string(c.dispatch);
  j["pquic_mode"] = c.pquic_mode;
  j["ack_frequency"] = c.ack_frequency;
  j["transfer_size"] = c.transfer_size;
  j["seed"] = c.seed;
  j["trace_links"] = c.trace_links;
  j["time_limit_s"] = c.time_limit_s;
  return j;
}

template <class T, class F>
std::vector<T> list(const json& j, const char* key, std::vector<T> fallback, F conv) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  std::vector<T> out;
  if (!it->is_array()) {
    out.push_back(conv(*it));
  } else {
    for (const auto& v : *it) out.push_back(conv(v));
  }
  if (out.empty()) throw ConfigError(std::string("'") + key + "' must not be empty");
  return out;
}

std::string str(const json& v) {
  if (!v.is_string()) throw ConfigError("expected a string");
  return v.get<std::string>();
}

}  // namespace

std::string ab_limit_to_string(std::uint64_t ab_limit) {
  return ab_limit == kUnlimitedAckBlocks ? "inf" : std::to_string(ab_limit);
}

std::uint64_t parse_ab_limit(const std::string& s) {
  if (s == "inf" || s == "unlimited") return kUnlimitedAckBlocks;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || s[0] == '-') throw ConfigError("bad ab_limit '" + s + "'");
  return v;
}

std::string variant_label(const RunConfig& c) {
  std::string s = to_string(c.design) + "-" + to_string(c.cc) + "-ab" + ab_limit_to_string(c.ab_limit) +
                  "-" + to_string(c.strategy) + "-" + to_string(c.dispatch);
  if (c.pquic_mode) s += "-pquic";
  if (!c.ack_frequency) s += "-noackfreq";
  return s;
}

std::string to_json(const RunConfig& cfg, int indent) { return run_json(cfg, true).dump(indent); }

RunConfig run_config_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"id", "family", "point_index", "point", "paths", "design", "cc", "ab_limit",
                  "strategy", "dispatch", "pquic_mode", "ack_frequency", "transfer_size", "seed",
                  "trace_links", "time_limit_s"},
                 "run config");
  RunConfig c;
  c.id = get<std::string>(j, "id", c.id);
  c.family = parse_family(get<std::string>(j, "family", to_string(c.family)));
  c.point_index = get<std::size_t>(j, "point_index", 0);
  c.point = get<std::vector<double>>(j, "point", {});
  if (auto it = j.find("paths"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("'paths' must be an array");
    for (const auto& p : *it) {
      reject_unknown(p, {"bandwidth_mbps", "rtt_ms"}, "path");
      c.paths.push_back({get<double>(p, "bandwidth_mbps", 0), get<double>(p, "rtt_ms", 0)});
    }
  } else if (!c.point.empty()) {
    c.paths = paths_for(c.family, c.point);
  }
  c.design = parse_design(get<std::string>(j, "design", to_string(c.design)));
  c.cc = parse_cc(get<std::string>(j, "cc", to_string(c.cc)));
  if (auto it = j.find("ab_limit"); it != j.end()) c.ab_limit = ab_limit_from(*it);
  c.strategy = parse_strategy(get<std::string>(j, "strategy", to_string(c.strategy)));
  c.dispatch = parse_dispatch(get<std::string>(j, "dispatch", to_string(c.dispatch)));
  c.pquic_mode = get<bool>(j, "pquic_mode", c.pquic_mode);
  c.ack_frequency = get<bool>(j, "ack_frequency", c.ack_frequency);
  c.transfer_size = get<std::uint64_t>(j, "transfer_size", c.transfer_size);
  c.seed = get<std::uint64_t>(j, "seed", c.seed);
  c.trace_links = get<bool>(j, "trace_links", c.trace_links);
  c.time_limit_s = get<double>(j, "time_limit_s", c.time_limit_s);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& file) { return run_config_from_json(read_file(file)); }

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string s = run_json(cfg, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

void ExperimentSpec::validate() const {
  if (points == 0) throw ConfigError("points must be >= 1");
  if (designs.empty() || ccs.empty() || ab_limits.empty() || strategies.empty() ||
      dispatches.empty() || pquic_modes.empty()) {
    throw ConfigError("every variant list needs at least one entry");
  }
  if (!(time_limit_s > 0)) throw ConfigError("time_limit_s must be positive");
}

std::string to_json(const ExperimentSpec& s, int indent) {
  json j;
  j["family"] = to_string(s.family);
  j["points"] = s.points;
  j["design_seed"] = s.design_seed;
  json a = json::array();
  for (auto d : s.designs) a.push_back(to_string(d));
  j["designs"] = a;
  a = json::array();
  for (auto c : s.ccs) a.push_back(to_string(c));
  j["ccs"] = a;
  a = json::array();
  for (auto v : s.ab_limits) a.push_back(ab_limit_json(v));
  j["ab_limits"] = a;
  a = json::array();
  for (auto v : s.strategies) a.push_back(to_string(v));
  j["strategies"] = a;
  a = json::array();
  for (auto v : s.dispatches) a.push_back(to_string(v));
  j["dispatches"] = a;
  a = json::array();
  for (bool v : s.pquic_modes) a.push_back(v);
  j["pquic_modes"] = a;
  j["ack_frequency"] = s.ack_frequency;
  j["transfer_size"] = s.transfer_size;
  j["seed"] = s.seed;
  j["time_limit_s"] = s.time_limit_s;
  return j.dump(indent);
}

ExperimentSpec experiment_from_json(const std::string& text) {
  const json j = parse(text);
  reject_unknown(j,
                 {"family", "points", "design_seed", "designs", "ccs", "ab_limits", "strategies",
                  "dispatches", "pquic_modes", "ack_frequency", "transfer_size", "seed",
                  "time_limit_s"},
                 "experiment");
  ExperimentSpec s;
  s.family = parse_family(get<std::string>(j, "family", to_string(s.family)));
  s.points = get<std::size_t>(j, "points", s.points);
  s.design_seed = get<std::uint64_t>(j, "design_seed", s.design_seed);
  s.designs = list(j, "designs", s.designs, [](const json& v) { return parse_design(str(v)); });
  s.ccs = list(j, "ccs", s.ccs, [](const json& v) { return parse_cc(str(v)); });
  s.ab_limits = list(j, "ab_limits", s.ab_limits, ab_limit_from);
  s.strategies = list(j, "strategies", s.strategies, [](const json& v) { return parse_strategy(str(v)); });
  s.dispatches = list(j, "dispatches", s.dispatches, [](const json& v) { return parse_dispatch(str(v)); });
  s.pquic_modes = list(j, "pquic_modes", s.pquic_modes, [](const json& v) {
    if (!v.is_boolean()) throw ConfigError("pquic_modes entries must be booleans");
    return v.get<bool>();
  });
  s.ack_frequency = get<bool>(j, "ack_frequency", s.ack_frequency);
  s.transfer_size = get<std::uint64_t>(j, "transfer_size", s.transfer_size);
  s.seed = get<std::uint64_t>(j, "seed", s.seed);
  s.time_limit_s = get<double>(j, "time_limit_s", s.time_limit_s);
  s.validate();
  return s;
}

ExperimentSpec load_experiment(const std::string& file) { return experiment_from_json(read_file(file)); }

std::vector<std::vector<double>> experiment_points(const ExperimentSpec& spec) {
  return wsp_design(param_space(spec.family), spec.points, spec.design_seed);
}

std::vector<RunConfig> expand(const ExperimentSpec& spec) {
  spec.validate();
  const auto points = experiment_points(spec);
  std::vector<RunConfig> out;
  for (auto design : spec.designs)
    for (auto cc : spec.ccs)
      for (auto ab : spec.ab_limits)
        for (auto strategy : spec.strategies)
          for (auto dispatch : spec.dispatches)
            for (bool pquic : spec.pquic_modes) {
              for (std::size_t i = 0; i < points.size(); ++i) {
                RunConfig c;
                c.family = spec.family;
                c.point_index = i;
                c.point = points[i];
                c.paths = paths_for(spec.family, points[i]);
                c.design = design;
                c.cc = cc;
                c.ab_limit = ab;
                c.strategy = strategy;
                c.dispatch = dispatch;
                c.pquic_mode = pquic;
                c.ack_frequency = spec.ack_frequency;
                c.transfer_size = spec.transfer_size;
                c.seed = spec.seed;
                c.time_limit_s = spec.time_limit_s;
                char idx[16];
                std::snprintf(idx, sizeof idx, "-p%03zu", i);
                c.id = variant_label(c) + idx;
                out.push_back(std::move(c));
              }
            }
  return out;
}

}  // namespace mpq::harness
