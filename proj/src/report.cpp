#include "qpass/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "qpass/errors.hpp"

namespace qpass {

std::optional<double> geometric_mean(std::span<const double> values) {
  double log_sum = 0.0;
  std::size_t n = 0;
  for (double v : values)
    if (v > 0.0 && std::isfinite(v)) {
      log_sum += std::log(v);
      ++n;
    }
  if (n == 0) return std::nullopt;
  return std::exp(log_sum / static_cast<double>(n));
}

std::string format_ratio(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fx", ratio);
  return buf;
}

namespace {

struct ProgramEval {
  std::string sequence;
  std::optional<double> agent;
  std::optional<double> o3;
  std::optional<double> best;
};

using EvalKey = std::pair<std::string, std::int64_t>;  // set, step

}  // namespace

Report build_report(const std::vector<LogRecord>& records) {
  std::map<EvalKey, std::map<std::string, ProgramEval>> evals;
  for (const auto& r : records) {
    if (r.phase.rfind("eval:", 0) != 0 || r.program_id.empty()) continue;
    auto& p = evals[{r.phase.substr(5), r.step}][r.program_id];
    if (r.metric == "sequence") p.sequence = r.text();
    else if (r.metric == "agent_speedup") p.agent = r.number();
    else if (r.metric == "o3_speedup") p.o3 = r.number();
    else if (r.metric == "best_speedup") p.best = r.number();
  }
  if (evals.empty()) throw ConfigError("run log holds no evaluation records");

  Report report;
  std::map<std::string, std::map<std::string, double>> running_best;  // set → program → max
  std::map<std::string, std::int64_t> last_step;
  for (const auto& [key, programs] : evals) {
    const auto& [set, step] = key;
    last_step[set] = step;  // keys arrive in ascending step order per set
    std::vector<double> agent, o3, best;
    auto& rb = running_best[set];
    for (const auto& [id, p] : programs) {
      if (p.agent) agent.push_back(*p.agent);
      if (p.o3) o3.push_back(*p.o3);
      const std::optional<double> seen = p.best ? p.best : p.agent;
      if (seen) {
        auto [it, fresh] = rb.emplace(id, *seen);
        if (!fresh) it->second = std::max(it->second, *seen);
      }
    }
    for (const auto& [id, v] : rb) best.push_back(v);
    report.series.push_back({step, set, geometric_mean(agent), geometric_mean(best), geometric_mean(o3)});
  }
  for (const auto& [set, step] : last_step)
    for (const auto& [id, p] : evals.at({set, step})) {
      if (!p.agent || !p.o3) continue;
      report.rows.push_back({set, id, p.sequence, *p.o3, *p.agent});
    }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ProgramRow& a, const ProgramRow& b) {
    if (a.set != b.set) return a.set < b.set;
    return a.ratio() > b.ratio();
  });
  return report;
}

namespace {

std::string fixed(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string speedup(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fx", v);
  return buf;
}

void print_row(const ProgramRow& r, std::ostream& out) {
  out << "  " << r.program_id << "\t" << (r.sequence.empty() ? "(none)" : r.sequence) << "\tO3 " << speedup(r.o3_speedup)
      << "\tagent " << speedup(r.agent_speedup) << "\tratio " << format_ratio(r.ratio()) << "\n";
}

}  // namespace

void print_report(const Report& report, std::ostream& out, std::size_t k) {
  std::set<std::string> sets;
  for (const auto& r : report.rows) sets.insert(r.set);
  for (const auto& set : sets) {
    std::vector<const ProgramRow*> rows;
    for (const auto& r : report.rows)
      if (r.set == set) rows.push_back(&r);
    out << "[" << set << "] " << rows.size() << " programs\n";
    if (rows.size() <= 2 * k) {
      for (const auto* r : rows) print_row(*r, out);
    } else {
      out << " best " << k << ":\n";
      for (std::size_t i = 0; i < k; ++i) print_row(*rows[i], out);
      out << " worst " << k << ":\n";
      for (std::size_t i = rows.size() - k; i < rows.size(); ++i) print_row(*rows[i], out);
    }
  }
  out << "step\tset\tagent_geomean\tbest_geomean\to3_geomean\n";
  for (const auto& p : report.series)
    out << p.step << "\t" << p.set << "\t" << fixed(p.agent_geomean) << "\t" << fixed(p.best_geomean) << "\t"
        << fixed(p.o3_geomean) << "\n";
}

namespace {

void write_svg(const Report& report, const std::filesystem::path& path) {
  std::set<std::string> sets;
  for (const auto& p : report.series) sets.insert(p.set);
  const double w = 640, h = 360, pad = 40;
  std::int64_t max_step = 1;
  double lo = 1.0, hi = 1.0;
  for (const auto& p : report.series) {
    max_step = std::max(max_step, p.step);
    for (auto v : {p.agent_geomean, p.best_geomean, p.o3_geomean})
      if (v) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  auto x = [&](std::int64_t s) { return pad + (w - 2 * pad) * static_cast<double>(s) / static_cast<double>(max_step); };
  auto y = [&](double v) { return h - pad - (h - 2 * pad) * (v - lo) / (hi - lo); };

  std::ofstream out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h * sets.size() << "\">\n";
  const char* colors[] = {"#1f77b4", "#2ca02c", "#d62728"};
  const char* names[] = {"agent", "best observed", "O3"};
  int panel = 0;
  for (const auto& set : sets) {
    out << "<g transform=\"translate(0," << panel * h << ")\">\n";
    out << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << set
        << " geometric mean speedup</text>\n";
    out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
        << "\" stroke=\"black\"/>\n";
    for (int c = 0; c < 3; ++c) {
      out << "<polyline fill=\"none\" stroke=\"" << colors[c] << "\" points=\"";
      for (const auto& p : report.series) {
        if (p.set != set) continue;
        const auto v = c == 0 ? p.agent_geomean : c == 1 ? p.best_geomean : p.o3_geomean;
        if (v) out << x(p.step) << "," << y(*v) << " ";
      }
      out << "\"/>\n";
      out << "<text x=\"" << w - pad - 100 << "\" y=\"" << 40 + 16 * c << "\" fill=\"" << colors[c]
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << names[c] << "</text>\n";
    }
    out << "</g>\n";
    ++panel;
  }
  out << "</svg>\n";
}

}  // namespace

void write_report_files(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "programs.tsv");
    out << "set\tprogram\tsequence\to3_speedup\tagent_speedup\tratio\n";
    for (const auto& r : report.rows)
      out << r.set << "\t" << r.program_id << "\t" << r.sequence << "\t" << r.o3_speedup << "\t" << r.agent_speedup
          << "\t" << format_ratio(r.ratio()) << "\n";
  }
  {
    std::ofstream out(dir / "series.csv");
    out << "step,set,agent_geomean,best_geomean,o3_geomean\n";
    for (const auto& p : report.series)
      out << p.step << "," << p.set << "," << fixed(p.agent_geomean) << "," << fixed(p.best_geomean) << ","
          << fixed(p.o3_geomean) << "\n";
  }
  write_svg(report, dir / "curves.svg");
}

}  // namespace qpass
