#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "htlm/random.hpp"
#include "htlm/scenario.hpp"

namespace htlm {

// Feed-forward value network: rectifier hidden layers, identity output.
// Batched calls take one sample per column.
class QNet {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    double squared_norm() const {
      double s = 0.0;
      for (const auto& w : weights) s += w.squaredNorm();
      for (const auto& b : biases) s += b.squaredNorm();
      return s;
    }
  };

  QNet() = default;

  // Zero-initialized network with the given layer widths (input first).
  explicit QNet(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw ContractViolation("QNet: need at least input and output widths");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      weights_.push_back(Eigen::MatrixXd::Zero(idx(dims_[l + 1]), idx(dims_[l])));
      biases_.push_back(Eigen::VectorXd::Zero(idx(dims_[l + 1])));
    }
  }

  // Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static QNet initialized(std::vector<std::size_t> layer_dims, Rng& rng) {
    QNet net(std::move(layer_dims));
    for (auto& w : net.weights_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    return net;
  }

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_size() const { return dims_.front(); }
  std::size_t output_size() const { return dims_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_size())
      throw ContractViolation("QNet::forward: feature length does not match input width");
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) z = z.cwiseMax(0.0);
      a = std::move(z);
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const {
    return forward(Eigen::MatrixXd(input)).col(0);
  }

  // Mean over the batch of (target - Q(x, action))^2 and, when `grad` is
  // non-null, its gradient with respect to every parameter.
  double loss(const Eigen::MatrixXd& inputs, std::span<const std::size_t> actions,
              std::span<const double> targets, Gradients* grad = nullptr) const {
    const auto batch = inputs.cols();
    if (static_cast<std::size_t>(batch) != actions.size() || actions.size() != targets.size() ||
        batch == 0)
      throw ContractViolation("QNet::loss: batch sizes disagree or batch is empty");
    if (static_cast<std::size_t>(inputs.rows()) != input_size())
      throw ContractViolation("QNet::loss: feature length does not match input width");

    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(weights_.size() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * acts.back();
      z.colwise() += biases_[l];
      if (l + 1 < weights_.size()) z = z.cwiseMax(0.0);
      acts.push_back(std::move(z));
    }

    const Eigen::MatrixXd& out = acts.back();
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(out.rows(), batch);
    double total = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto a = static_cast<Eigen::Index>(actions[static_cast<std::size_t>(b)]);
      if (a >= out.rows()) throw ContractViolation("QNet::loss: action index out of range");
      const double err = out(a, b) - targets[static_cast<std::size_t>(b)];
      total += err * err;
      delta(a, b) = 2.0 * err * inv_batch;
    }
    if (!grad) return total * inv_batch;

    grad->weights.resize(weights_.size());
    grad->biases.resize(biases_.size());
    for (std::size_t l = weights_.size(); l-- > 0;) {
      grad->weights[l] = delta * acts[l].transpose();
      grad->biases[l] = delta.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd back = weights_[l].transpose() * delta;
      // Rectifier derivative; acts[l] > 0 exactly where the unit was active.
      delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
    }
    return total * inv_batch;
  }

  void apply_gradient(const Gradients& g, double scale) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      weights_[l] -= scale * g.weights[l];
      biases_[l] -= scale * g.biases[l];
    }
  }

  friend bool operator==(const QNet& a, const QNet& b) {
    if (a.dims_ != b.dims_) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l)
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    return true;
  }

 private:
  static Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

  friend class AdamState;

  std::vector<std::size_t> dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

// First and second moment estimates for an Adam update of one network.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const QNet& net) {
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      m_w_.push_back(Eigen::MatrixXd::Zero(net.weights_[l].rows(), net.weights_[l].cols()));
      v_w_.push_back(m_w_.back());
      m_b_.push_back(Eigen::VectorXd::Zero(net.biases_[l].size()));
      v_b_.push_back(m_b_.back());
    }
  }

  void step(QNet& net, const QNet::Gradients& g, double lr, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      m_w_[l] = beta1 * m_w_[l] + (1.0 - beta1) * g.weights[l];
      v_w_[l] = beta2 * v_w_[l] + (1.0 - beta2) * g.weights[l].cwiseAbs2();
      m_b_[l] = beta1 * m_b_[l] + (1.0 - beta1) * g.biases[l];
      v_b_[l] = beta2 * v_b_[l] + (1.0 - beta2) * g.biases[l].cwiseAbs2();
      net.weights_[l].array() -=
          lr * (m_w_[l].array() / c1) / ((v_w_[l].array() / c2).sqrt() + eps);
      net.biases_[l].array() -=
          lr * (m_b_[l].array() / c1) / ((v_b_[l].array() / c2).sqrt() + eps);
    }
  }

 private:
  std::size_t t_ = 0;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
};

}  // namespace htlm
