#include "mpq/harness/report.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "mpq/harness/config.hpp"

namespace mpq::harness {

namespace {

// Shortest form that parses back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_u(std::uint64_t v) { return std::to_string(v); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_d(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in runs.csv");
  }
}

std::uint64_t to_u(const std::string& s) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer '" + s + "' in runs.csv");
  }
}

bool to_b(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError("bad flag '" + s + "' in runs.csv");
}

std::string join_point(const std::vector<double>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? ";" : "") + fmt(p[i]);
  return s;
}

std::string join_paths(const std::vector<PathSpec>& paths) {
  std::string s;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    s += (i ? ";" : "") + fmt(paths[i].bandwidth_mbps) + "/" + fmt(paths[i].rtt_ms);
  }
  return s;
}

// ------------------------------------------------------------------ svg

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string colour(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

// 1-2-5 tick spacing covering [lo, hi] with about `n` ticks.
std::vector<double> ticks(double lo, double hi, int n) {
  if (!(hi > lo)) hi = lo + 1;
  const double raw = (hi - lo) / n;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    out.push_back(std::abs(t) < step * 1e-9 ? 0 : t);
  }
  return out;
}

struct Frame {
  double w = 760, h = 440;
  double left = 70, right = 230, top = 40, bottom = 60;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

void open_svg(std::ostream& o, const Frame& f, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.w << "\" height=\"" << f.h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << f.w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
    << "</text>\n";
}

void axes(std::ostream& o, const Frame& f, const std::string& xlabel, const std::string& ylabel,
          bool x_ticks) {
  const double xa = f.left, xb = f.w - f.right, ya = f.top, yb = f.h - f.bottom;
  o << "<rect x=\"" << xa << "\" y=\"" << ya << "\" width=\"" << xb - xa << "\" height=\"" << yb - ya
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(f.y0, f.y1, 6)) {
    const double y = f.py(t);
    o << "<line x1=\"" << xa << "\" x2=\"" << xb << "\" y1=\"" << y << "\" y2=\"" << y
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << xa - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  if (x_ticks) {
    for (double t : ticks(f.x0, f.x1, 6)) {
      const double x = f.px(t);
      o << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << ya << "\" y2=\"" << yb
        << "\" stroke=\"#eee\"/>\n";
      o << "<text x=\"" << x << "\" y=\"" << yb + 16 << "\" text-anchor=\"middle\">" << fmt(t)
        << "</text>\n";
    }
  }
  o << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << f.h - 14 << "\" text-anchor=\"middle\">"
    << esc(xlabel) << "</text>\n";
  o << "<text transform=\"translate(18," << (ya + yb) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << esc(ylabel) << "</text>\n";
}

void legend(std::ostream& o, const Frame& f, const std::vector<std::string>& names) {
  const double x = f.w - f.right + 12;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = f.top + 10 + 18.0 * static_cast<double>(i);
    o << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"10\" fill=\"" << colour(i)
      << "\"/>\n";
    o << "<text x=\"" << x + 18 << "\" y=\"" << y << "\" font-size=\"10\">" << esc(names[i])
      << "</text>\n";
  }
}

struct Series {
  std::string name;
  std::vector<double> values;
};

void cdf_svg(std::ostream& o, const std::string& title, const std::string& xlabel,
             const std::vector<Series>& series, std::optional<double> marker = std::nullopt) {
  Frame f;
  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& s : series) {
    for (double v : s.values) {
      if (!any) lo = hi = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      any = true;
    }
  }
  if (marker) {
    lo = std::min(lo, *marker);
    hi = std::max(hi, *marker);
  }
  if (!(hi > lo)) hi = lo + 1;
  const double pad = (hi - lo) * 0.04;
  f.x0 = lo - pad;
  f.x1 = hi + pad;
  f.y0 = 0;
  f.y1 = 1;
  open_svg(o, f, title);
  axes(o, f, xlabel, "CDF", true);
  if (marker) {
    o << "<line x1=\"" << f.px(*marker) << "\" x2=\"" << f.px(*marker) << "\" y1=\"" << f.top
      << "\" y2=\"" << f.h - f.bottom << "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto v = series[i].values;
    names.push_back(series[i].name);
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    std::ostringstream pts;
    double prev = 0;
    pts << f.px(v.front()) << "," << f.py(0);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double y = static_cast<double>(k + 1) / static_cast<double>(v.size());
      pts << " " << f.px(v[k]) << "," << f.py(prev) << " " << f.px(v[k]) << "," << f.py(y);
      prev = y;
    }
    o << "<polyline fill=\"none\" stroke-width=\"1.8\" stroke=\"" << colour(i) << "\" points=\""
      << pts.str() << "\"/>\n";
  }
  legend(o, f, names);
  o << "</svg>\n";
}

void strip_svg(std::ostream& o, const std::string& title, const std::string& ylabel,
               const std::vector<Series>& series) {
  Frame f;
  double hi = 0;
  for (const auto& s : series)
    for (double v : s.values) hi = std::max(hi, v);
  f.x0 = -0.5;
  f.x1 = static_cast<double>(series.size()) - 0.5;
  f.y0 = 0;
  f.y1 = hi > 0 ? hi * 1.05 : 1;
  open_svg(o, f, title);
  axes(o, f, "variant", ylabel, false);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    names.push_back(series[i].name);
    const auto& v = series[i].values;
    for (std::size_t k = 0; k < v.size(); ++k) {
      // Deterministic jitter from the point index.
      const double jitter = (static_cast<double>((k * 37) % 23) / 22.0 - 0.5) * 0.5;
      o << "<circle cx=\"" << f.px(static_cast<double>(i) + jitter) << "\" cy=\"" << f.py(v[k])
        << "\" r=\"3\" fill=\"" << colour(i) << "\" fill-opacity=\"0.7\"/>\n";
    }
    if (!v.empty()) {
      const double m = median(v);
      o << "<line x1=\"" << f.px(i - 0.35) << "\" x2=\"" << f.px(i + 0.35) << "\" y1=\"" << f.py(m)
        << "\" y2=\"" << f.py(m) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
    o << "<text x=\"" << f.px(static_cast<double>(i)) << "\" y=\"" << f.h - f.bottom + 16
      << "\" text-anchor=\"middle\">" << i + 1 << "</text>\n";
  }
  std::vector<std::string> numbered;
  for (std::size_t i = 0; i < names.size(); ++i) numbered.push_back(std::to_string(i + 1) + ": " + names[i]);
  legend(o, f, numbered);
  o << "</svg>\n";
}

template <class F>
std::vector<Series> per_group(const std::vector<RunRow>& rows, F metric) {
  std::vector<Series> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, fresh] = index.emplace(r.label, out.size());
    if (fresh) out.push_back({r.label, {}});
    out[it->second].values.push_back(metric(r));
  }
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& content,
                std::vector<std::string>& written) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write '" + p.string() + "'");
  f << content;
  written.push_back(p.string());
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> runs_csv_columns() {
  return {"id",
          "label",
          "config_hash",
          "family",
          "point_index",
          "point",
          "paths",
          "design",
          "cc",
          "ab_limit",
          "strategy",
          "dispatch",
          "pquic_mode",
          "ack_frequency",
          "transfer_size",
          "seed",
          "completed",
          "transfer_time_s",
          "mean_ranges_per_ack_frame",
          "frac_ack_frames_at_limit",
          "rel_retransmitted",
          "max_per_byte_retrans",
          "ack_bytes_total",
          "ack_frames",
          "buffer_drops",
          "spurious_losses",
          "packets_lost",
          "duplicates"};
}

RunRow to_row(const RunResult& r) {
  return {r.config, variant_label(r.config), config_hash(r.config), r.metrics};
}

void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows) {
  const auto cols = runs_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& row : rows) {
    const auto& c = row.config;
    const auto& m = row.metrics;
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, row.hash);
    const std::vector<std::string> f = {c.id,
                                        row.label,
                                        hash,
                                        to_string(c.family),
                                        fmt_u(c.point_index),
                                        join_point(c.point),
                                        join_paths(c.paths),
                                        to_string(c.design),
                                        to_string(c.cc),
                                        ab_limit_to_string(c.ab_limit),
                                        to_string(c.strategy),
                                        to_string(c.dispatch),
                                        c.pquic_mode ? "1" : "0",
                                        c.ack_frequency ? "1" : "0",
                                        fmt_u(c.transfer_size),
                                        fmt_u(c.seed),
                                        m.completed ? "1" : "0",
                                        fmt(m.transfer_time_s),
                                        fmt(m.mean_ranges_per_ack_frame),
                                        fmt(m.frac_ack_frames_at_limit),
                                        fmt(m.rel_retransmitted),
                                        fmt_u(m.max_per_byte_retrans),
                                        fmt_u(m.ack_bytes_total),
                                        fmt_u(m.ack_frames),
                                        fmt_u(m.buffer_drops),
                                        fmt_u(m.spurious_losses),
                                        fmt_u(m.packets_lost),
                                        fmt_u(m.duplicates)};
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << '\n';
  }
}

std::vector<RunRow> read_runs_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("runs.csv is empty");
  const auto header = split(line, ',');
  if (header != runs_csv_columns()) throw ConfigError("runs.csv header does not match");
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw ConfigError("runs.csv row has the wrong field count");
    RunRow r;
    auto& c = r.config;
    c.id = f[0];
    r.label = f[1];
    r.hash = std::stoull(f[2], nullptr, 16);
    c.family = parse_family(f[3]);
    c.point_index = to_u(f[4]);
    if (!f[5].empty())
      for (const auto& v : split(f[5], ';')) c.point.push_back(to_d(v));
    if (!f[6].empty()) {
      for (const auto& p : split(f[6], ';')) {
        const auto bw_rtt = split(p, '/');
        if (bw_rtt.size() != 2) throw ConfigError("bad path '" + p + "' in runs.csv");
        c.paths.push_back({to_d(bw_rtt[0]), to_d(bw_rtt[1])});
      }
    }
    c.design = parse_design(f[7]);
    c.cc = parse_cc(f[8]);
    c.ab_limit = parse_ab_limit(f[9]);
    c.strategy = parse_strategy(f[10]);
    c.dispatch = parse_dispatch(f[11]);
    c.pquic_mode = to_b(f[12]);
    c.ack_frequency = to_b(f[13]);
    c.transfer_size = to_u(f[14]);
    c.seed = to_u(f[15]);
    auto& m = r.metrics;
    m.completed = to_b(f[16]);
    m.transfer_time_s = to_d(f[17]);
    m.mean_ranges_per_ack_frame = to_d(f[18]);
    m.frac_ack_frames_at_limit = to_d(f[19]);
    m.rel_retransmitted = to_d(f[20]);
    m.max_per_byte_retrans = to_u(f[21]);
    m.ack_bytes_total = to_u(f[22]);
    m.ack_frames = to_u(f[23]);
    m.buffer_drops = to_u(f[24]);
    m.spurious_losses = to_u(f[25]);
    m.packets_lost = to_u(f[26]);
    m.duplicates = to_u(f[27]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_points_csv(std::ostream& out, Family family,
                      const std::vector<std::vector<double>>& points) {
  const auto space = param_space(family);
  out << "index";
  for (const auto& n : space.names) out << "," << n;
  const std::size_t n_paths = points.empty() ? 0 : paths_for(family, points.front()).size();
  for (std::size_t p = 0; p < n_paths; ++p) out << ",bw" << p << "_mbps,rtt" << p << "_ms";
  out << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << i;
    for (double v : points[i]) out << "," << fmt(v);
    for (const auto& p : paths_for(family, points[i])) out << "," << fmt(p.bandwidth_mbps) << "," << fmt(p.rtt_ms);
    out << '\n';
  }
}

std::vector<GroupSummary> summarize(const std::vector<RunRow>& rows) {
  std::vector<GroupSummary> out;
  std::map<std::string, std::vector<const RunRow*>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.label)) out.push_back({r.label});
    groups[r.label].push_back(&r);
  }
  for (auto& g : out) {
    const auto& members = groups[g.label];
    std::vector<double> t, rng, lim, rx, ab;
    for (const auto* r : members) {
      ++g.runs;
      if (r->metrics.completed) ++g.completed;
      t.push_back(r->metrics.transfer_time_s);
      rng.push_back(r->metrics.mean_ranges_per_ack_frame);
      lim.push_back(r->metrics.frac_ack_frames_at_limit);
      rx.push_back(r->metrics.rel_retransmitted);
      ab.push_back(static_cast<double>(r->metrics.ack_bytes_total));
    }
    g.median_transfer_time_s = median(t);
    g.max_transfer_time_s = *std::max_element(t.begin(), t.end());
    g.median_ranges = median(rng);
    g.median_frac_at_limit = median(lim);
    g.median_rel_retransmitted = median(rx);
    g.max_rel_retransmitted = *std::max_element(rx.begin(), rx.end());
    g.median_ack_bytes = median(ab);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& groups) {
  out << "label,runs,completed,median_transfer_time_s,max_transfer_time_s,median_ranges,"
         "median_frac_at_limit,median_rel_retransmitted,max_rel_retransmitted,median_ack_bytes\n";
  for (const auto& g : groups) {
    out << g.label << "," << g.runs << "," << g.completed << "," << fmt(g.median_transfer_time_s) << ","
        << fmt(g.max_transfer_time_s) << "," << fmt(g.median_ranges) << ","
        << fmt(g.median_frac_at_limit) << "," << fmt(g.median_rel_retransmitted) << ","
        << fmt(g.max_rel_retransmitted) << "," << fmt(g.median_ack_bytes) << "\n";
  }
}

std::vector<RatioSeries> time_ratios(const std::vector<RunRow>& rows) {
  // Key without dispatch and strategy; originals and others per key.
  auto base_of = [](const RunConfig& c) {
    RunConfig b = c;
    b.strategy = RangeStrategy::kLargestFirst;
    b.dispatch = AckDispatch::kOnPath;
    return variant_label(b) + "|" + to_string(c.family) + "|" + std::to_string(c.transfer_size);
  };
  std::map<std::string, std::map<std::string, std::map<std::size_t, double>>> by_base;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!r.metrics.completed) continue;
    const auto base = base_of(r.config);
    auto& labels = by_base[base];
    if (!labels.count(r.label)) order.push_back(base + "\n" + r.label);
    labels[r.label][r.config.point_index] = r.metrics.transfer_time_s;
  }
  std::vector<RatioSeries> out;
  for (const auto& key : order) {
    const auto nl = key.find('\n');
    const std::string base = key.substr(0, nl), label = key.substr(nl + 1);
    const auto& labels = by_base[base];
    const std::string original = base.substr(0, base.find('|'));
    if (label == original || !labels.count(original)) continue;
    RatioSeries s{original, label, {}, {}};
    const auto& orig = labels.at(original);
    for (const auto& [pt, t] : labels.at(label)) {
      auto it = orig.find(pt);
      if (it == orig.end() || !(t > 0)) continue;
      s.points.push_back(pt);
      s.ratios.push_back(it->second / t);
    }
    if (!s.ratios.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> write_report(const std::vector<RunRow>& rows, const std::string& dir,
                                      bool csv, bool svg) {
  if (rows.empty()) throw ConfigError("report needs at least one run");
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  fs::create_directories(dir);
  if (csv) {
    std::ostringstream s;
    write_summary_csv(s, summarize(rows));
    write_file(fs::path(dir) / "summary.csv", s.str(), written);
    const auto ratios = time_ratios(rows);
    if (!ratios.empty()) {
      std::ostringstream r;
      r << "original,fixed,point_index,ratio\n";
      for (const auto& rs : ratios)
        for (std::size_t i = 0; i < rs.ratios.size(); ++i)
          r << rs.original << "," << rs.fixed << "," << rs.points[i] << "," << fmt(rs.ratios[i]) << "\n";
      write_file(fs::path(dir) / "time_ratios.csv", r.str(), written);
    }
  }
  if (svg) {
    const fs::path plots = fs::path(dir) / "plots";
    fs::create_directories(plots);
    auto emit = [&](const char* name, auto draw) {
      std::ostringstream s;
      draw(s);
      write_file(plots / name, s.str(), written);
    };
    emit("transfer_time.svg", [&](std::ostream& o) {
      strip_svg(o, "Transfer time per variant", "transfer time (s)",
                per_group(rows, [](const RunRow& r) { return r.metrics.transfer_time_s; }));
    });
    emit("mean_ranges_cdf.svg", [&](std::ostream& o) {
      cdf_svg(o, "Mean ranges per ACK frame", "mean ranges per ACK frame",
              per_group(rows, [](const RunRow& r) { return r.metrics.mean_ranges_per_ack_frame; }));
    });
    emit("at_limit_cdf.svg", [&](std::ostream& o) {
      cdf_svg(o, "ACK frames at the range limit", "fraction of ACK frames at limit",
              per_group(rows, [](const RunRow& r) { return r.metrics.frac_ack_frames_at_limit; }));
    });
    emit("retransmission_cdf.svg", [&](std::ostream& o) {
      cdf_svg(o, "Retransmitted data", "retransmitted bytes / transfer size",
              per_group(rows, [](const RunRow& r) { return r.metrics.rel_retransmitted; }));
    });
    emit("ack_bytes_cdf.svg", [&](std::ostream& o) {
      cdf_svg(o, "Acknowledgment bytes", "total ACK frame bytes",
              per_group(rows, [](const RunRow& r) { return static_cast<double>(r.metrics.ack_bytes_total); }));
    });
    const auto ratios = time_ratios(rows);
    if (!ratios.empty()) {
      std::vector<Series> s;
      for (const auto& r : ratios) s.push_back({r.fixed + " vs " + r.original, r.ratios});
      emit("time_ratio_cdf.svg", [&](std::ostream& o) {
        cdf_svg(o, "Original / fixed transfer time (>1: fixed is faster)", "time ratio", s, 1.0);
      });
    }
  }
  return written;
}

}  // namespace mpq::harness
