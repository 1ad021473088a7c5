#include "qpass/qnetwork.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

namespace qpass {

namespace {

Eigen::MatrixXd uniform(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd relu_grad(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& upstream) {
  return (pre.array() > 0.0).select(upstream, 0.0);
}

}  // namespace

QNetwork::QNetwork(Architecture arch, std::uint64_t seed) : arch_(arch) {
  if (arch.input_dim <= 0 || arch.n_actions <= 0 || arch.width <= 0 || arch.blocks < 0)
    throw std::invalid_argument("invalid network architecture");
  std::mt19937_64 rng(seed);
  const int w = arch.width;
  params_.push_back(uniform(w, arch.input_dim, 1.0 / std::sqrt(arch.input_dim), rng));
  params_.push_back(Eigen::MatrixXd::Zero(w, 1));
  for (int b = 0; b < arch.blocks; ++b) {
    params_.push_back(uniform(w, w, 1.0 / std::sqrt(w), rng));
    params_.push_back(Eigen::MatrixXd::Zero(w, 1));
    params_.push_back(uniform(w, w, 1.0 / std::sqrt(w), rng));
    params_.push_back(Eigen::MatrixXd::Zero(w, 1));
  }
  params_.push_back(uniform(arch.n_actions, w, 1.0 / std::sqrt(w), rng));
  params_.push_back(Eigen::MatrixXd::Zero(arch.n_actions, 1));
}

std::vector<std::string> QNetwork::parameter_names() const {
  std::vector<std::string> names{"in.w", "in.b"};
  for (int b = 0; b < arch_.blocks; ++b)
    for (const char* s : {".w1", ".b1", ".w2", ".b2"}) names.push_back("b" + std::to_string(b) + s);
  names.push_back("out.w");
  names.push_back("out.b");
  return names;
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

QNetwork::Activations QNetwork::run(const Eigen::MatrixXd& x) const {
  if (x.rows() != arch_.input_dim)
    throw std::invalid_argument("network input has " + std::to_string(x.rows()) + " features, expected " +
                                std::to_string(arch_.input_dim));
  Activations a;
  a.z_in = (params_[0] * x).colwise() + params_[1].col(0);
  a.h.push_back(relu(a.z_in));
  for (int b = 0; b < arch_.blocks; ++b) {
    const std::size_t k = 2 + 4 * static_cast<std::size_t>(b);
    a.pu.push_back((params_[k] * a.h.back()).colwise() + params_[k + 1].col(0));
    a.pv.push_back((params_[k + 2] * relu(a.pu.back())).colwise() + params_[k + 3].col(0));
    a.h.push_back(a.h.back() + relu(a.pv.back()));
  }
  const std::size_t o = params_.size() - 2;
  a.out = (params_[o] * a.h.back()).colwise() + params_[o + 1].col(0);
  return a;
}

Eigen::MatrixXd QNetwork::forward(const Eigen::MatrixXd& inputs) const { return run(inputs).out; }

std::vector<double> QNetwork::q_values(std::span<const double> encoded) const {
  if (static_cast<int>(encoded.size()) != arch_.input_dim)
    throw std::invalid_argument("encoded state has length " + std::to_string(encoded.size()) + ", expected " +
                                std::to_string(arch_.input_dim));
  const Eigen::Map<const Eigen::VectorXd> x(encoded.data(), static_cast<Eigen::Index>(encoded.size()));
  const Eigen::MatrixXd q = forward(x);
  return {q.data(), q.data() + q.size()};
}

ParameterSet QNetwork::backward(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& output_grad) const {
  const Activations a = run(inputs);
  ParameterSet g = zeros_like(params_);
  const std::size_t o = params_.size() - 2;
  g[o] = output_grad * a.h.back().transpose();
  g[o + 1] = output_grad.rowwise().sum();
  Eigen::MatrixXd dh = params_[o].transpose() * output_grad;

  for (int b = arch_.blocks - 1; b >= 0; --b) {
    const std::size_t k = 2 + 4 * static_cast<std::size_t>(b);
    const std::size_t bi = static_cast<std::size_t>(b);
    const Eigen::MatrixXd dpv = relu_grad(a.pv[bi], dh);
    const Eigen::MatrixXd u = relu(a.pu[bi]);
    g[k + 2] = dpv * u.transpose();
    g[k + 3] = dpv.rowwise().sum();
    const Eigen::MatrixXd dpu = relu_grad(a.pu[bi], params_[k + 2].transpose() * dpv);
    g[k] = dpu * a.h[bi].transpose();
    g[k + 1] = dpu.rowwise().sum();
    dh += params_[k].transpose() * dpu;
  }
  const Eigen::MatrixXd dz = relu_grad(a.z_in, dh);
  g[0] = dz * inputs.transpose();
  g[1] = dz.rowwise().sum();
  return g;
}

bool operator==(const QNetwork& a, const QNetwork& b) {
  if (!(a.arch_ == b.arch_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i];
    const auto& y = b.params_[i];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  return out;
}

AdamOptimizer::AdamOptimizer(const ParameterSet& shape, double learning_rate, double clip_norm)
    : lr_(learning_rate), clip_(clip_norm), m_(zeros_like(shape)), v_(zeros_like(shape)) {}

void AdamOptimizer::apply(ParameterSet& params, const ParameterSet& grads) {
  double scale = 1.0;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > clip_) scale = clip_ / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Eigen::MatrixXd g = grads[i] * scale;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    if (lr_ == 0.0) continue;
    params[i].array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace qpass
