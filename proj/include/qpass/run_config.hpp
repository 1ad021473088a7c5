#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qpass/action.hpp"
#include "qpass/agent.hpp"
#include "qpass/backend.hpp"
#include "qpass/llvm_backend.hpp"
#include "qpass/synthetic_backend.hpp"

namespace qpass {

/// Everything a training run needs. Loaded from JSON; every key is optional
/// and unknown keys are rejected.
struct RunConfig {
  std::string run_id = "run";

  // dataset
  std::filesystem::path dataset;  // directory of .c/.cc/.cpp sources
  int synthetic_programs = 0;     // > 0: generate prog_000.. instead of reading `dataset`
  int split_train = 4;
  int split_valid = 1;
  std::uint64_t shuffle_seed = 0;
  std::vector<std::string> exclude;

  // actions and backend
  Level level = Level::H;
  std::string catalog = "shipped";  // "shipped", "synthetic" or a directory
  std::string backend = "synthetic";
  SyntheticConfig synthetic;
  LlvmConfig llvm;
  BenchmarkPolicy policy;

  // learning
  TrainConfig train;
  std::int64_t total_steps = 5000;
  std::size_t replay_capacity = 100000;
  std::size_t replay_min_fill = 64;
  int explore_batch = 0;  // 0: min(32, |training set|)
  /// Train steps between exploration rounds.
  int explore_every = 1;

  // execution
  std::string execution = "inline";  // inline | threads | server
  int local_workers = 2;
  std::string listen = "127.0.0.1:0";
  int retry_budget = 2;

  // outputs
  std::filesystem::path store;           // empty: in-memory
  std::filesystem::path output = "runs";  // run log, evaluation tables, checkpoints

  /// Throws ConfigError naming the first inconsistency.
  void validate() const;
};

/// Throws ConfigError on malformed JSON, unknown keys or invalid values.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& config);

}  // namespace qpass
