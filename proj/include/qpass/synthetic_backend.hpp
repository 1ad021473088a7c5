#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "qpass/backend.hpp"

namespace qpass {

struct SyntheticConfig {
  std::uint64_t seed = 1;
  int token_count = 32;   // tokens per generated program
  int token_range = 16;   // token values lie in [0, token_range)
  int n_actions = 8;      // size of the generated H catalog
  double noise_sigma = 0.0;  // multiplicative Gaussian runtime noise
  int delay_ms = 0;          // artificial latency per optimize/compile call
};

/// Deterministic stand-in for a compiler. IR is a comma-separated integer
/// token sequence; each invocation permutes and substitutes tokens through a
/// table keyed by (seed, tokens, invocation); runtime is a hash of the tokens
/// mapped into [1 ms, 2 ms).
class SyntheticBackend final : public Backend {
 public:
  explicit SyntheticBackend(SyntheticConfig config);

  std::string name() const override { return "synthetic"; }
  std::string lower_source(const ProgramSource& source) override;
  std::string optimize(const std::string& body, const Invocation& invocation) override;
  std::string optimize_o3(const std::string& body) override;
  std::unique_ptr<Runnable> compile(const std::string& body, const std::string& program_id) override;

  /// Noise-free runtime of `body`.
  double true_runtime(const std::string& body) const;

  const SyntheticConfig& config() const { return config_; }
  std::uint64_t optimize_calls() const { return optimize_calls_.load(); }
  std::uint64_t compile_calls() const { return compile_calls_.load(); }

  static std::vector<int> parse_tokens(const std::string& body);
  static std::string format_tokens(const std::vector<int>& tokens);

 private:
  std::string transform(const std::string& body, std::uint64_t invocation_hash);

  SyntheticConfig config_;
  std::atomic<std::uint64_t> optimize_calls_{0};
  std::atomic<std::uint64_t> compile_calls_{0};
  std::atomic<std::uint64_t> noise_stream_{0};
};

}  // namespace qpass
