#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qpass/run_log.hpp"

namespace qpass {

/// Geometric mean of the strictly positive entries; nullopt if there are none.
std::optional<double> geometric_mean(std::span<const double> values);

/// Ratio rendered at two decimals, e.g. `1.32x`.
std::string format_ratio(double ratio);

struct ProgramRow {
  std::string set;  // "train" or "valid"
  std::string program_id;
  std::string sequence;
  double o3_speedup = 0.0;
  double agent_speedup = 0.0;
  double ratio() const { return agent_speedup / o3_speedup; }
};

struct SeriesPoint {
  std::int64_t step = 0;
  std::string set;
  std::optional<double> agent_geomean;
  std::optional<double> best_geomean;
  std::optional<double> o3_geomean;
};

struct Report {
  /// Rows of the last evaluation of each set, best ratio first.
  std::vector<ProgramRow> rows;
  std::vector<SeriesPoint> series;
};

/// Builds the report from `eval:<set>` records. Throws ConfigError when the
/// log holds no evaluation records.
Report build_report(const std::vector<LogRecord>& records);

/// Top/bottom `k` rows per set plus the aggregate series, as text.
void print_report(const Report& report, std::ostream& out, std::size_t k = 5);

/// Writes programs.tsv, series.csv and curves.svg into `dir`.
void write_report_files(const Report& report, const std::filesystem::path& dir);

}  // namespace qpass
