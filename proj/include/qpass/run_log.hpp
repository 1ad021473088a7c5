#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

namespace qpass {

/// One line of the run log: `{"step":..,"phase":..,"program_id":..,"metric":..,"value":..}`.
struct LogRecord {
  std::int64_t step = 0;
  std::string phase;       // "train", "eval:train", "eval:valid", ...
  std::string program_id;  // empty for run-wide metrics
  std::string metric;
  std::variant<double, std::string> value;

  double number() const;  // throws Error when the value is text
  std::string text() const;
};

std::string format_record(const LogRecord& record);
/// Throws Error naming the line on malformed input.
LogRecord parse_record(const std::string& line, std::size_t line_no = 0);

class RunLog {
 public:
  /// Appends to `path`, creating parent directories.
  explicit RunLog(const std::filesystem::path& path);
  void write(const LogRecord& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Skips blank lines; throws Error on the first malformed line.
std::vector<LogRecord> read_run_log(const std::filesystem::path& path);

}  // namespace qpass
