#include "qpass/backend.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qpass/errors.hpp"

namespace qpass {

int BenchmarkPolicy::repetitions(double probe_seconds) const {
  int reps = fallback_reps;
  for (const auto& t : tiers)
    if (probe_seconds < t.below_seconds) {
      reps = t.repetitions;
      break;
    }
  return std::clamp(reps, kMinReps, kMaxReps);
}

void BenchmarkPolicy::validate() const {
  int prev = kMaxReps;
  double prev_bound = 0.0;
  for (const auto& t : tiers) {
    if (t.repetitions < kMinReps || t.repetitions > kMaxReps)
      throw ConfigError("benchmark tier repetitions " + std::to_string(t.repetitions) + " outside [20, 1000]");
    if (t.repetitions > prev) throw ConfigError("benchmark repetitions must not increase with runtime");
    if (t.below_seconds <= prev_bound) throw ConfigError("benchmark tier bounds must increase");
    prev = t.repetitions;
    prev_bound = t.below_seconds;
  }
  if (fallback_reps < kMinReps || fallback_reps > prev)
    throw ConfigError("fallback repetitions " + std::to_string(fallback_reps) + " invalid");
}

std::string BenchmarkPolicy::describe() const {
  std::ostringstream ss;
  ss << "median";
  for (const auto& t : tiers) ss << ";<" << t.below_seconds << ":" << t.repetitions;
  ss << ";else:" << fallback_reps;
  return ss.str();
}

double median(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("median of no samples");
  std::vector<double> v(samples.begin(), samples.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

Measurement measure_runtime(Runnable& program, const BenchmarkPolicy& policy) {
  double probe = 0.0;
  try {
    probe = program.run();
  } catch (const EnvironmentFault& e) {
    throw MeasurementFault(std::string("probe run failed: ") + e.what(), -1, e.stderr_text());
  }
  const int reps = policy.repetitions(probe);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    try {
      samples.push_back(program.run());
    } catch (const EnvironmentFault& e) {
      throw MeasurementFault("run " + std::to_string(i) + " failed: " + e.what(), i, e.stderr_text());
    }
  }
  return {median(samples), reps};
}

Measurement measure_runtime(Backend& backend, const std::string& body, const std::string& program_id,
                            const BenchmarkPolicy& policy) {
  auto program = backend.compile(body, program_id);
  return measure_runtime(*program, policy);
}

double reward(double t_before, double t_after) {
  if (!(t_before > 0.0) || !(t_after > 0.0))
    throw std::domain_error("reward needs positive runtimes, got " + std::to_string(t_before) + " and " +
                            std::to_string(t_after));
  return std::log(t_before / t_after);
}

}  // namespace qpass
