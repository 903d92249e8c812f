#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpq/harness/run.hpp"

namespace mpq::harness {

// One line of runs.csv read back.
struct RunRow {
  RunConfig config;
  std::string label;
  std::uint64_t hash = 0;
  RunMetrics metrics;
};

std::vector<std::string> runs_csv_columns();
RunRow to_row(const RunResult& r);
void write_runs_csv(std::ostream& out, const std::vector<RunRow>& rows);
std::vector<RunRow> read_runs_csv(std::istream& in);

void write_points_csv(std::ostream& out, Family family,
                      const std::vector<std::vector<double>>& points);

struct GroupSummary {
  std::string label;
  std::size_t runs = 0;
  std::size_t completed = 0;
  double median_transfer_time_s = 0;
  double max_transfer_time_s = 0;
  double median_ranges = 0;
  double median_frac_at_limit = 0;
  double median_rel_retransmitted = 0;
  double max_rel_retransmitted = 0;
  double median_ack_bytes = 0;
};

// One summary per variant label, in first-appearance order.
std::vector<GroupSummary> summarize(const std::vector<RunRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<GroupSummary>& groups);

// Original (on-path, largest-first) over fixed transfer time for every
// variant differing only in dispatch or range strategy, paired by point.
// A ratio above 1 means the fixed variant is faster.
struct RatioSeries {
  std::string original;
  std::string fixed;
  std::vector<std::size_t> points;
  std::vector<double> ratios;
};
std::vector<RatioSeries> time_ratios(const std::vector<RunRow>& rows);

double median(std::vector<double> v);

// Writes summary.csv (csv) and plots/*.svg (svg) into `dir`; returns the
// files written. Throws on an empty row set.
std::vector<std::string> write_report(const std::vector<RunRow>& rows, const std::string& dir,
                                      bool csv, bool svg);

}  // namespace mpq::harness
