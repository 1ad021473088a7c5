#include "qpass/run_log.hpp"

#include <json.hpp>
#include <sstream>

#include "qpass/errors.hpp"

namespace qpass {

using nlohmann::json;

double LogRecord::number() const {
  if (const auto* d = std::get_if<double>(&value)) return *d;
  throw Error("metric " + metric + " is not numeric");
}

std::string LogRecord::text() const {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  std::ostringstream ss;
  ss.precision(17);
  ss << std::get<double>(value);
  return ss.str();
}

std::string format_record(const LogRecord& r) {
  json j{{"step", r.step}, {"phase", r.phase}, {"program_id", r.program_id}, {"metric", r.metric}};
  if (const auto* d = std::get_if<double>(&r.value)) j["value"] = *d;
  else j["value"] = std::get<std::string>(r.value);
  return j.dump();
}

LogRecord parse_record(const std::string& line, std::size_t line_no) {
  const std::string where = "run log line " + std::to_string(line_no);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(where + ": " + e.what());
  }
  LogRecord r;
  try {
    r.step = j.at("step").get<std::int64_t>();
    r.phase = j.at("phase").get<std::string>();
    r.program_id = j.value("program_id", "");
    r.metric = j.at("metric").get<std::string>();
    const auto& v = j.at("value");
    if (v.is_number()) r.value = v.get<double>();
    else if (v.is_string()) r.value = v.get<std::string>();
    else throw Error(where + ": value must be a number or a string");
  } catch (const json::exception& e) {
    throw Error(where + ": " + e.what());
  }
  return r;
}

RunLog::RunLog(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw Error("cannot open run log " + path.string());
}

void RunLog::write(const LogRecord& record) {
  std::lock_guard lock(mu_);
  out_ << format_record(record) << '\n';
  out_.flush();
}

std::vector<LogRecord> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read run log " + path.string());
  std::vector<LogRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_record(line, n));
  }
  return out;
}

}  // namespace qpass
