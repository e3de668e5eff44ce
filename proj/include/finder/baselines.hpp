#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace finder {

using Eigen::VectorXd;

/// First-moment / second-moment state for Adam with bias correction.
struct AdamState {
  VectorXd m;
  VectorXd v;
  long t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(int dim, double lr = 1e-3) {
    AdamState s;
    s.m = VectorXd::Zero(dim);
    s.v = VectorXd::Zero(dim);
    s.lr = lr;
    return s;
  }
};

inline VectorXd adam_step(AdamState& state, const VectorXd& x, const VectorXd& g) {
  if (x.size() != g.size() || x.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseProduct(g);
  const double m_corr = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double v_corr = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const VectorXd m_hat = state.m / m_corr;
  const VectorXd v_hat = state.v / v_corr;
  return x - state.lr * (m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

inline VectorXd gd_step(const VectorXd& x, const VectorXd& g, double lr) {
  if (x.size() != g.size()) throw std::invalid_argument("gd_step: shape mismatch");
  if (!(lr > 0.0)) throw std::invalid_argument("gd_step: lr must be > 0");
  return x - lr * g;
}

}  // namespace finder
