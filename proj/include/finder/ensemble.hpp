#pragma once

#include <Eigen/Dense>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "finder/rng.hpp"

namespace finder {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-coordinate sampling spread (diagonal of the diffusion matrix).
struct DiffusionDiag {
  VectorXd r;

  explicit DiffusionDiag(VectorXd entries) : r(std::move(entries)) {
    if ((r.array() <= 0.0).any())
      throw std::invalid_argument("diffusion diagonal must be strictly positive");
  }

  static DiffusionDiag uniform(int n, double value) {
    return DiffusionDiag(VectorXd::Constant(n, value));
  }
};

/// Samples an N x p ensemble around the anchor. Column 1 is the anchor
/// itself; columns 2..p are anchor + R*z with z uniform on [-1, 1]^N.
inline MatrixXd generate_ensemble(const VectorXd& anchor, const DiffusionDiag& diffusion,
                                  int particles, SplitMix64& rng) {
  if (particles < 1) throw std::invalid_argument("particle count must be >= 1");
  if (diffusion.r.size() != anchor.size())
    throw std::invalid_argument("diffusion size does not match anchor");
  const auto n = anchor.size();
  MatrixXd x(n, particles);
  x.col(0) = anchor;
  for (int j = 1; j < particles; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      x(i, j) = anchor[i] + diffusion.r[i] * rng.uniform_sym();
  return x;
}

struct SortedEnsemble {
  MatrixXd x;                 // columns in ascending-cost order
  MatrixXd g;
  VectorXd cost;              // ascending
  std::vector<int> perm;      // perm[k] = original column index of sorted column k
};

/// Reorders particle columns by ascending cost; ties keep the lower original
/// index first.
inline SortedEnsemble sort_by_cost(const MatrixXd& x, const MatrixXd& g, const VectorXd& cost) {
  const int p = static_cast<int>(x.cols());
  if (g.cols() != p || g.rows() != x.rows() || cost.size() != p)
    throw std::invalid_argument("sort_by_cost: shape mismatch");
  SortedEnsemble s;
  s.perm.resize(p);
  std::iota(s.perm.begin(), s.perm.end(), 0);
  std::stable_sort(s.perm.begin(), s.perm.end(),
                   [&](int a, int b) { return cost[a] < cost[b]; });
  s.x.resize(x.rows(), p);
  s.g.resize(x.rows(), p);
  s.cost.resize(p);
  for (int k = 0; k < p; ++k) {
    s.x.col(k) = x.col(s.perm[k]);
    s.g.col(k) = g.col(s.perm[k]);
    s.cost[k] = cost[s.perm[k]];
  }
  return s;
}

/// Diagonal mimicked inverse Hessian: per-coordinate ratio of state-gradient
/// covariance to gradient variance, clamped to be nonnegative.
struct DiagonalGain {
  VectorXd b;        // clamped ratio
  VectorXd b_tilde;  // b^gamma, with 0^gamma = 0
  double gamma = 1.0;
};

inline DiagonalGain diagonal_gain(const MatrixXd& xs, const MatrixXd& gs, double gamma) {
  if (xs.cols() < 2) throw std::invalid_argument("diagonal_gain requires >= 2 particles");
  if (gs.rows() != xs.rows() || gs.cols() != xs.cols())
    throw std::invalid_argument("diagonal_gain: shape mismatch");

  const VectorXd mean_x = xs.rowwise().mean();
  const VectorXd mean_g = gs.rowwise().mean();
  const MatrixXd dx = xs.colwise() - mean_x;
  const MatrixXd dg = gs.colwise() - mean_g;

  DiagonalGain gain;
  gain.gamma = gamma;
  const VectorXd num = (dx.array() * dg.array()).rowwise().sum();
  const VectorXd den = (dg.array() * dg.array()).rowwise().sum();
  gain.b.resize(xs.rows());
  gain.b_tilde.resize(xs.rows());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    double b = den[i] != 0.0 ? num[i] / den[i] : 0.0;  // zero gradient variance
    if (!std::isfinite(b) || b < 0.0) b = 0.0;
    gain.b[i] = b;
    if (b == 0.0)
      gain.b_tilde[i] = 0.0;
    else if (gamma == 1.0)
      gain.b_tilde[i] = b;
    else if (gamma == 0.0)
      gain.b_tilde[i] = 1.0;
    else
      gain.b_tilde[i] = std::pow(b, gamma);
  }
  return gain;
}

/// Full N x N gain matrix from the sample covariances,
///   G~ = -Cov(X, grad f) (Cov(grad f, grad f) + eps I)^-1 .
/// Small-N reference construction; the production path is diagonal_gain.
struct FullGain {
  MatrixXd g_tilde;
  double q_eps = 1e-10;
};

inline FullGain full_gain(const MatrixXd& xs, const MatrixXd& gs, double q_eps,
                          int max_dim = 50) {
  const auto n = xs.rows();
  const auto p = xs.cols();
  if (n > max_dim) throw std::domain_error("full_gain: dimension exceeds small-N bound");
  if (p < 2) throw std::invalid_argument("full_gain requires >= 2 particles");
  if (gs.rows() != n || gs.cols() != p) throw std::invalid_argument("full_gain: shape mismatch");
  if (q_eps <= 0.0) throw std::invalid_argument("full_gain: q_eps must be > 0");

  const MatrixXd dx = xs.colwise() - xs.rowwise().mean().eval();
  const MatrixXd dg = gs.colwise() - gs.rowwise().mean().eval();
  const MatrixXd cov_xg = dx * dg.transpose() / static_cast<double>(p);
  MatrixXd cov_gg = dg * dg.transpose() / static_cast<double>(p);
  cov_gg.diagonal().array() += q_eps;

  Eigen::FullPivLU<MatrixXd> lu(cov_gg);
  if (!lu.isInvertible())
    throw std::runtime_error("full_gain: gradient covariance is singular despite regularizer");
  FullGain out;
  out.q_eps = q_eps;
  // G~ = -cov_xg * cov_gg^-1; cov_gg is symmetric, solve on the transpose.
  out.g_tilde = -lu.solve(cov_xg.transpose()).transpose();
  return out;
}

}  // namespace finder
