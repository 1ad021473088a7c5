#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qpass/qnetwork.hpp"

namespace qpass {

struct TrainConfig {
  double gamma = 0.9;
  int tau = 100;               // target sync period, in train steps
  int delta = 1000;            // evaluation period; a positive multiple of tau
  int batch_size = 32;
  double learning_rate = 1e-3;
  /// Linear decay of the learning rate to this value over lr_anneal_steps;
  /// negative keeps it constant.
  double learning_rate_end = -1.0;
  std::int64_t lr_anneal_steps = 0;
  double clip_norm = 10.0;
  double eps_start = 1.0;
  double eps_end = 0.1;
  std::int64_t eps_anneal_steps = 10000;
  int mu_max = 16;
  int blocks = 4;
  int width = 256;
  /// Bootstrap with max(0, max Q) where the rollout may stop (no pending
  /// selection), matching the stop-at-non-positive-Q rollout rule.
  bool stop_floor = true;
  std::uint64_t seed = 0;

  /// Throws ConfigError on inconsistent values (e.g. delta % tau != 0).
  void validate() const;
};

double epsilon(const TrainConfig& config, std::int64_t step);
double learning_rate_at(const TrainConfig& config, std::int64_t step);

/// ε-greedy over the legal set: uniform with probability ε, otherwise the
/// legal argmax with ties broken by the lowest id. nullopt if nothing is legal.
std::optional<int> select_action(std::span<const double> q, double eps, const std::vector<bool>& mask,
                                 std::mt19937_64& rng);

/// Greedy legal argmax (lowest id on ties); nullopt if nothing is legal.
std::optional<int> legal_argmax(std::span<const double> q, const std::vector<bool>& mask);

/// One replayed transition with everything the learner needs.
struct TrainingSample {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  double discount = 1.0;
  bool terminal = false;
  std::vector<double> next_state;
  std::vector<bool> next_mask;
  bool next_can_stop = true;
};

struct TdResult {
  double loss = 0.0;
  std::vector<double> targets;
  std::vector<double> predictions;
};

/// Mean squared TD error against fixed targets:
///   y = r                                   if terminal or no legal a'
///   y = r + d · max_{legal a'} Q_target(s', a')   otherwise
/// (clamped below at 0 inside the max when `stop_floor` and s' can stop).
TdResult td_loss(std::span<const TrainingSample> batch, const QNetwork& net, const QNetwork& target_net,
                 const TrainConfig& config);

/// Analytic gradient of `scale` × td_loss with respect to every parameter of `net`.
ParameterSet gradients(const QNetwork& net, std::span<const TrainingSample> batch, const QNetwork& target_net,
                       const TrainConfig& config, double scale = 1.0);

/// Online network, fixed-target copy and optimizer state.
class Learner {
 public:
  Learner(Architecture arch, TrainConfig config);

  /// One Adam step on the batch; syncs the target every tau steps.
  /// Throws Error with a batch dump when the loss is not finite.
  double train_step(std::span<const TrainingSample> batch);

  const QNetwork& online() const { return online_; }
  const QNetwork& target() const { return target_; }
  QNetwork& online() { return online_; }
  void set_online(QNetwork net);
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }
  const TrainConfig& config() const { return config_; }
  AdamOptimizer& optimizer() { return opt_; }

 private:
  TrainConfig config_;
  QNetwork online_;
  QNetwork target_;
  AdamOptimizer opt_;
  std::int64_t step_ = 0;
};

}  // namespace qpass
