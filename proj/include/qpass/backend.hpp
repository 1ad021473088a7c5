#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qpass/action.hpp"

namespace qpass {

struct ProgramSource {
  std::string id;
  std::filesystem::path path;  // empty for generated programs
  std::string text;
};

/// A compiled program that can be executed repeatedly.
class Runnable {
 public:
  virtual ~Runnable() = default;
  /// One wall-clock sample in seconds.
  virtual double run() = 0;
};

/// Lowers sources to IR, applies optimizer invocations and builds runnables.
/// `optimize` must be deterministic in (body, invocation).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual std::string lower_source(const ProgramSource& source) = 0;
  virtual std::string optimize(const std::string& body, const Invocation& invocation) = 0;
  virtual std::string optimize_o3(const std::string& body) = 0;
  virtual std::unique_ptr<Runnable> compile(const std::string& body, const std::string& program_id) = 0;
};

/// Runtime → repetition count. Tiers are checked in order; the first whose
/// bound exceeds the probe runtime wins, otherwise `fallback_reps` applies.
struct BenchmarkPolicy {
  struct Tier {
    double below_seconds;
    int repetitions;
  };

  static constexpr int kMinReps = 20;
  static constexpr int kMaxReps = 1000;

  std::vector<Tier> tiers{{0.01, 1000}, {0.1, 300}, {1.0, 100}};
  int fallback_reps = 20;

  int repetitions(double probe_seconds) const;
  /// Throws ConfigError if counts leave [20, 1000] or increase with runtime.
  void validate() const;
  std::string describe() const;
};

double median(std::span<const double> samples);

struct Measurement {
  double median_seconds = 0.0;
  int repetitions = 0;
};

/// Probe once, pick the repetition count from `policy`, run that many times
/// and return the median. A crashing run raises MeasurementFault with its index.
Measurement measure_runtime(Runnable& program, const BenchmarkPolicy& policy);
Measurement measure_runtime(Backend& backend, const std::string& body, const std::string& program_id,
                            const BenchmarkPolicy& policy);

/// Natural-log speedup ln(t_before / t_after). Throws std::domain_error on
/// non-positive input.
double reward(double t_before, double t_after);

}  // namespace qpass
