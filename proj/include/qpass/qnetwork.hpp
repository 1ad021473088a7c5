#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qpass {

struct Architecture {
  int input_dim = 0;
  int n_actions = 0;
  int blocks = 4;
  int width = 256;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Parameter tensors in a fixed order:
///   in.w, in.b, then per block b{k}.w1, b{k}.b1, b{k}.w2, b{k}.b2, then out.w, out.b.
/// Biases are column vectors stored as n×1 matrices.
using ParameterSet = std::vector<Eigen::MatrixXd>;

/// Residual MLP: x → relu(W_in x + b_in) → B × [h + relu(W2 relu(W1 h + b1) + b2)] → W_out h + b_out.
/// Inputs and outputs are column-major batches (features × samples).
class QNetwork {
 public:
  QNetwork() = default;
  /// Uniform ±1/sqrt(fan_in) weights, zero biases.
  QNetwork(Architecture arch, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const ParameterSet& parameters() const { return params_; }
  ParameterSet& parameters() { return params_; }
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  /// |A| × N Q-values for an input_dim × N batch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  /// Throws std::invalid_argument on a dimension mismatch.
  std::vector<double> q_values(std::span<const double> encoded) const;

  /// Gradient of sum(output_grad ⊙ forward(inputs)) with respect to every parameter.
  ParameterSet backward(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& output_grad) const;

  friend bool operator==(const QNetwork& a, const QNetwork& b);

 private:
  struct Activations {
    Eigen::MatrixXd z_in;
    std::vector<Eigen::MatrixXd> h;   // h[0] after input layer, h[k+1] after block k
    std::vector<Eigen::MatrixXd> pu;  // block pre-activations, first layer
    std::vector<Eigen::MatrixXd> pv;  // block pre-activations, second layer
    Eigen::MatrixXd out;
  };
  Activations run(const Eigen::MatrixXd& inputs) const;

  Architecture arch_;
  ParameterSet params_;
};

ParameterSet zeros_like(const ParameterSet& params);

/// Adam with optional global-norm gradient clipping (clip_norm <= 0 disables it).
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(const ParameterSet& shape, double learning_rate, double clip_norm = 0.0);

  void apply(ParameterSet& params, const ParameterSet& grads);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::int64_t steps() const { return t_; }

 private:
  double lr_ = 1e-3;
  double clip_ = 0.0;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  ParameterSet m_;
  ParameterSet v_;
};

}  // namespace qpass
