#include "qpass/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qpass/errors.hpp"

namespace qpass {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (tau <= 0) throw ConfigError("tau must be positive");
  if (delta <= 0 || delta % tau != 0)
    throw ConfigError("delta (" + std::to_string(delta) + ") must be a positive multiple of tau (" +
                      std::to_string(tau) + ")");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (learning_rate_end >= 0.0 && lr_anneal_steps <= 0)
    throw ConfigError("lr_anneal_steps must be positive when learning_rate_end is set");
  if (eps_anneal_steps <= 0) throw ConfigError("eps_anneal_steps must be positive");
  if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0)
    throw ConfigError("epsilon bounds must lie in [0, 1]");
  if (mu_max <= 0) throw ConfigError("mu_max must be positive");
  if (blocks < 0 || width <= 0) throw ConfigError("invalid network shape");
}

double epsilon(const TrainConfig& c, std::int64_t step) {
  const double linear =
      c.eps_start - static_cast<double>(step) * (c.eps_start - c.eps_end) / static_cast<double>(c.eps_anneal_steps);
  return std::max(c.eps_end, linear);
}

double learning_rate_at(const TrainConfig& c, std::int64_t step) {
  if (c.learning_rate_end < 0.0) return c.learning_rate;
  const double f = std::min(1.0, static_cast<double>(step) / static_cast<double>(c.lr_anneal_steps));
  return c.learning_rate + f * (c.learning_rate_end - c.learning_rate);
}

std::optional<int> legal_argmax(std::span<const double> q, const std::vector<bool>& mask) {
  std::optional<int> best;
  for (std::size_t i = 0; i < q.size() && i < mask.size(); ++i)
    if (mask[i] && (!best || q[i] > q[static_cast<std::size_t>(*best)])) best = static_cast<int>(i);
  return best;
}

std::optional<int> select_action(std::span<const double> q, double eps, const std::vector<bool>& mask,
                                 std::mt19937_64& rng) {
  std::vector<int> legal;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) legal.push_back(static_cast<int>(i));
  if (legal.empty()) return std::nullopt;
  if (eps > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < eps)
    return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
  return legal_argmax(q, mask);
}

namespace {

Eigen::MatrixXd stack(std::span<const TrainingSample> batch, bool next) {
  const auto& first = next ? batch[0].next_state : batch[0].state;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(first.size()), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& v = next ? batch[j].next_state : batch[j].state;
    if (v.size() != first.size()) throw std::invalid_argument("ragged training batch");
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return m;
}

std::vector<double> targets(std::span<const TrainingSample> batch, const QNetwork& target_net,
                            const TrainConfig& config) {
  std::vector<double> y(batch.size());
  bool any_bootstrap = false;
  for (const auto& s : batch) any_bootstrap |= !s.terminal;
  Eigen::MatrixXd q_next;
  if (any_bootstrap) q_next = target_net.forward(stack(batch, true));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& s = batch[j];
    y[j] = s.reward;
    if (s.terminal) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < s.next_mask.size(); ++a)
      if (s.next_mask[a]) best = std::max(best, q_next(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)));
    if (!std::isfinite(best)) continue;  // no legal continuation
    if (config.stop_floor && s.next_can_stop) best = std::max(best, 0.0);
    y[j] += s.discount * best;
  }
  return y;
}

struct Forward {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd q;
  TdResult td;
};

Forward forward_td(std::span<const TrainingSample> batch, const QNetwork& net, const QNetwork& target_net,
                   const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("td_loss needs a non-empty batch");
  Forward f;
  f.inputs = stack(batch, false);
  f.q = net.forward(f.inputs);
  f.td.targets = targets(batch, target_net, config);
  double sum = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double p = f.q(batch[j].action, static_cast<Eigen::Index>(j));
    f.td.predictions.push_back(p);
    sum += (p - f.td.targets[j]) * (p - f.td.targets[j]);
  }
  f.td.loss = sum / static_cast<double>(batch.size());
  return f;
}

}  // namespace

TdResult td_loss(std::span<const TrainingSample> batch, const QNetwork& net, const QNetwork& target_net,
                 const TrainConfig& config) {
  return forward_td(batch, net, target_net, config).td;
}

namespace {

std::pair<TdResult, ParameterSet> td_with_gradients(const QNetwork& net, std::span<const TrainingSample> batch,
                                                    const QNetwork& target_net, const TrainConfig& config,
                                                    double scale) {
  Forward f = forward_td(batch, net, target_net, config);
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(f.q.rows(), f.q.cols());
  const double n = static_cast<double>(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j)
    dq(batch[j].action, static_cast<Eigen::Index>(j)) = scale * 2.0 * (f.td.predictions[j] - f.td.targets[j]) / n;
  return {std::move(f.td), net.backward(f.inputs, dq)};
}

}  // namespace

ParameterSet gradients(const QNetwork& net, std::span<const TrainingSample> batch, const QNetwork& target_net,
                       const TrainConfig& config, double scale) {
  return td_with_gradients(net, batch, target_net, config, scale).second;
}

Learner::Learner(Architecture arch, TrainConfig config)
    : config_(config), online_(arch, config.seed), target_(online_),
      opt_(online_.parameters(), config.learning_rate, config.clip_norm) {
  config_.validate();
}

void Learner::set_online(QNetwork net) {
  online_ = std::move(net);
  target_ = online_;
  opt_ = AdamOptimizer(online_.parameters(), config_.learning_rate, config_.clip_norm);
}

double Learner::train_step(std::span<const TrainingSample> batch) {
  auto [td, g] = td_with_gradients(online_, batch, target_, config_, 1.0);
  if (!std::isfinite(td.loss)) {
    std::ostringstream dump;
    dump << "non-finite TD loss at step " << step_ << "; batch:";
    for (std::size_t j = 0; j < batch.size(); ++j)
      dump << "\n  a=" << batch[j].action << " r=" << batch[j].reward << " d=" << batch[j].discount
           << " terminal=" << batch[j].terminal << " pred=" << td.predictions[j] << " target=" << td.targets[j];
    throw Error(dump.str());
  }
  if (config_.learning_rate_end >= 0.0) opt_.set_learning_rate(learning_rate_at(config_, step_));
  opt_.apply(online_.parameters(), g);
  ++step_;
  if (step_ % config_.tau == 0) target_ = online_;
  return td.loss;
}

}  // namespace qpass
