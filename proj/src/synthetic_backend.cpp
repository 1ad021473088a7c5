#include "qpass/synthetic_backend.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <sstream>
#include <thread>

#include "qpass/errors.hpp"

namespace qpass {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ splitmix(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return splitmix(h);
}

class SyntheticRunnable final : public Runnable {
 public:
  SyntheticRunnable(double runtime, double sigma, std::uint64_t stream)
      : runtime_(runtime), sigma_(sigma), rng_(stream) {}
  double run() override {
    if (sigma_ <= 0.0) return runtime_;
    std::normal_distribution<double> noise(0.0, sigma_);
    return std::max(runtime_ * (1.0 + noise(rng_)), runtime_ * 1e-3);
  }

 private:
  double runtime_;
  double sigma_;
  std::mt19937_64 rng_;
};

}  // namespace

SyntheticBackend::SyntheticBackend(SyntheticConfig config) : config_(config) {
  if (config_.token_count < 2 || config_.token_range < 2)
    throw ConfigError("synthetic backend needs token_count >= 2 and token_range >= 2");
}

std::vector<int> SyntheticBackend::parse_tokens(const std::string& body) {
  std::vector<int> out;
  std::string cur;
  for (char c : body + ",") {
    if (c == ',' || c == '\n') {
      if (!cur.empty()) {
        try {
          out.push_back(std::stoi(cur));
        } catch (const std::exception&) {
          throw EnvironmentFault("synthetic IR: bad token '" + cur + "'");
        }
      }
      cur.clear();
    } else if (c != ' ' && c != '\r') {
      cur += c;
    }
  }
  if (out.empty()) throw EnvironmentFault("synthetic IR: empty token sequence");
  return out;
}

std::string SyntheticBackend::format_tokens(const std::vector<int>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(tokens[i]);
  }
  return out;
}

std::string SyntheticBackend::lower_source(const ProgramSource& source) {
  std::mt19937_64 rng(fnv1a(source.id + "\n" + source.text, config_.seed));
  std::uniform_int_distribution<int> token(0, config_.token_range - 1);
  std::vector<int> tokens(static_cast<std::size_t>(config_.token_count));
  for (auto& t : tokens) t = token(rng);
  return format_tokens(tokens);
}

std::string SyntheticBackend::transform(const std::string& body, std::uint64_t invocation_hash) {
  ++optimize_calls_;
  if (config_.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(config_.delay_ms));
  std::vector<int> tokens = parse_tokens(body);
  const std::string canon = format_tokens(tokens);
  std::mt19937_64 rng(splitmix(fnv1a(canon, config_.seed) ^ splitmix(invocation_hash)));

  // Some invocations leave the program untouched, as real passes often do.
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.15) return canon;

  const int n = static_cast<int>(tokens.size());
  std::uniform_int_distribution<int> pos(0, n - 1);
  std::uniform_int_distribution<int> value(0, config_.token_range - 1);
  const int swaps = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < swaps; ++i) std::swap(tokens[pos(rng)], tokens[pos(rng)]);
  const int subs = static_cast<int>(rng() % 3);
  for (int i = 0; i < subs; ++i) tokens[pos(rng)] = value(rng);
  return format_tokens(tokens);
}

std::string SyntheticBackend::optimize(const std::string& body, const Invocation& invocation) {
  return transform(body, fnv1a(invocation.canonical(), 0x5EED));
}

std::string SyntheticBackend::optimize_o3(const std::string& body) { return transform(body, fnv1a("<O3>", 0x5EED)); }

double SyntheticBackend::true_runtime(const std::string& body) const {
  const std::uint64_t h = fnv1a(format_tokens(parse_tokens(body)), config_.seed ^ 0xA11CEull);
  return 0.001 * (1.0 + static_cast<double>(h % 1000) / 1000.0);
}

std::unique_ptr<Runnable> SyntheticBackend::compile(const std::string& body, const std::string& /*program_id*/) {
  ++compile_calls_;
  const double t = true_runtime(body);
  const std::uint64_t stream = splitmix(config_.seed ^ splitmix(++noise_stream_));
  return std::make_unique<SyntheticRunnable>(t, config_.noise_sigma, stream);
}

}  // namespace qpass
