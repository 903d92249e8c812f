#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mpq/acktrack.hpp"
#include "mpq/harness/config.hpp"
#include "mpq/harness/replay.hpp"
#include "mpq/harness/report.hpp"
#include "mpq/harness/run.hpp"
#include "mpq/rangeset.hpp"
#include "mpq/wire.hpp"

namespace py = pybind11;
using namespace mpq;
using namespace mpq::harness;

namespace {

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["completed"] = m.completed;
  d["transfer_time_s"] = m.transfer_time_s;
  d["mean_ranges_per_ack_frame"] = m.mean_ranges_per_ack_frame;
  d["frac_ack_frames_at_limit"] = m.frac_ack_frames_at_limit;
  d["rel_retransmitted"] = m.rel_retransmitted;
  d["max_per_byte_retrans"] = m.max_per_byte_retrans;
  d["ack_bytes_total"] = m.ack_bytes_total;
  d["ack_frames"] = m.ack_frames;
  d["buffer_drops"] = m.buffer_drops;
  d["spurious_losses"] = m.spurious_losses;
  d["packets_lost"] = m.packets_lost;
  d["duplicates"] = m.duplicates;
  return d;
}

using Pair = std::pair<std::uint64_t, std::uint64_t>;

std::vector<Pair> pairs(const std::vector<Interval>& v) {
  std::vector<Pair> out;
  for (const auto& iv : v) out.emplace_back(iv.lo, iv.hi);
  return out;
}

std::vector<std::pair<double, double>> path_pairs(const std::vector<PathSpec>& v) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : v) out.emplace_back(p.bandwidth_mbps, p.rtt_ms);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Deterministic multipath QUIC acknowledgment simulator";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "SimError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<WireError>(m, "WireError", PyExc_ValueError);

  py::class_<RangeSet>(m, "RangeSet")
      .def(py::init<>())
      .def("insert", py::overload_cast<std::uint64_t>(&RangeSet::insert), py::arg("value"))
      .def("insert_range",
           [](RangeSet& rs, std::uint64_t lo, std::uint64_t hi) {
             if (lo > hi) throw ConfigError("lo > hi");
             rs.insert(Interval{lo, hi});
           })
      .def("remove_range",
           [](RangeSet& rs, std::uint64_t lo, std::uint64_t hi) {
             if (lo > hi) throw ConfigError("lo > hi");
             rs.remove(Interval{lo, hi});
           })
      .def("__contains__", &RangeSet::contains)
      .def("__len__", &RangeSet::interval_count)
      .def("cardinality", &RangeSet::cardinality)
      .def("intervals", [](const RangeSet& rs) { return pairs(rs.intervals()); });

  m.def(
      "select_ranges",
      [](const std::vector<Pair>& ranges, std::uint64_t ab_limit, const std::string& strategy) {
        RangeSet rs;
        for (auto [lo, hi] : ranges) {
          if (lo > hi) throw ConfigError("lo > hi");
          rs.insert(Interval{lo, hi});
        }
        return pairs(select_ranges(rs, ab_limit, parse_strategy(strategy)));
      },
      py::arg("ranges"), py::arg("ab_limit"), py::arg("strategy") = "largest-first",
      "Ranges an ACK frame would carry, largest range first.");

  m.def("varint_encode", [](std::uint64_t v) {
    const auto b = wire::varint_encode(v);
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  });
  m.def("varint_decode", [](const py::bytes& data) {
    const std::string s = data;
    const auto r = wire::varint_decode(
        std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    return std::make_pair(r.value, r.consumed);
  });

  m.def("hetero2_paths", [](double bw, double rtt) { return path_pairs(hetero2_paths(bw, rtt)); });
  m.def("hetero3_paths", [](std::array<double, 3> w_bw, std::array<double, 3> w_rtt) {
    return path_pairs(hetero3_paths(w_bw, w_rtt));
  });
  m.def("homo2_paths", [](double bw, double rtt) { return path_pairs(homo2_paths(bw, rtt)); });
  m.def(
      "wsp_design",
      [](const std::string& family, std::size_t n, std::uint64_t seed) {
        return wsp_design(param_space(parse_family(family)), n, seed);
      },
      py::arg("family"), py::arg("n_points"), py::arg("seed") = 42);

  m.def("default_run_config", [] { return to_json(RunConfig{}, -1); },
        "Default run configuration as JSON text.");
  m.def("normalize_run_config", [](const std::string& text) {
    return to_json(run_config_from_json(text), -1);
  });
  m.def("config_hash", [](const std::string& text) { return config_hash(run_config_from_json(text)); });

  m.def(
      "run",
      [](const std::string& config_json, bool with_trace) {
        const auto cfg = run_config_from_json(config_json);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_once(cfg);
        }
        py::dict out;
        out["id"] = cfg.id;
        out["label"] = variant_label(cfg);
        out["metrics"] = metrics_dict(r.metrics);
        out["online"] = metrics_dict(r.online);
        out["events"] = r.events;
        if (with_trace) {
          std::ostringstream s;
          r.trace.write_jsonl(s);
          out["trace"] = s.str();
        }
        return out;
      },
      py::arg("config_json"), py::arg("with_trace") = false);

  m.def("extract_metrics", [](const std::string& jsonl, std::uint64_t size) {
    std::istringstream in(jsonl);
    return metrics_dict(extract_metrics(Trace::read_jsonl(in), size));
  });

  m.def(
      "reordering_replay",
      [](const std::string& design) {
        ReplaySetup s;
        s.design = parse_design(design);
        const auto r = reordering_replay(s);
        py::list arrivals, acks;
        for (const auto& a : r.arrivals) {
          arrivals.append(py::make_tuple(to_ms(a.time - kTimeZero), a.path, a.space, a.pn));
        }
        for (const auto& a : r.acks) {
          py::dict d;
          d["time_ms"] = to_ms(a.time - kTimeZero);
          d["path"] = a.path;
          d["space"] = a.space;
          d["multipath"] = a.multipath;
          d["ranges"] = pairs(a.ranges);
          acks.append(d);
        }
        py::dict out;
        out["arrivals"] = arrivals;
        out["acks"] = acks;
        out["snapshot"] = pairs(r.snapshot);
        if (r.prior_ack) {
          out["prior_ack"] = pairs(r.prior_ack->ranges);
        } else {
          out["prior_ack"] = py::none();
        }
        return out;
      },
      py::arg("design") = "spns");

  m.attr("UNLIMITED_ACK_BLOCKS") = kUnlimitedAckBlocks;
}
