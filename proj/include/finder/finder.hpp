#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "finder/ensemble.hpp"
#include "finder/objectives.hpp"
#include "finder/rng.hpp"

namespace finder {

struct HyperParams {
  int particles = 5;             // ensemble size p
  double theta = 0.9;            // increment memory weight
  double gamma = 1.0;            // gain exponent, 1 = quasi-Newton, 0 = gradient-like
  double c_s = 0.1;              // span memory weight
  double c_alpha = 0.01;         // sufficient-decrease constant
  double zeta1 = 1e-4;           // diffusion cap
  double zeta2 = 1e-4;           // diffusion floor for zero-span components
  double delta_min = 1e-6;       // smallest line-search trial
  double alpha_fallback = 0.1;   // step when every trial fails
  double alpha_cap = 1.0;        // first line-search trial
  bool cache_best_cost = true;   // reuse the retained particle's known cost
  double eps_tol = 1e-8;
  long max_epochs = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    if (particles < 2) throw std::invalid_argument("particles must be >= 2");
    if (theta < 0.0 || theta >= 1.0) throw std::invalid_argument("theta must be in [0, 1)");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0, 1]");
    if (c_s < 0.0 || c_s > 1.0) throw std::invalid_argument("c_s must be in [0, 1]");
    if (c_alpha <= 0.0) throw std::invalid_argument("c_alpha must be > 0");
    if (zeta1 <= 0.0 || zeta2 <= 0.0) throw std::invalid_argument("zeta1/zeta2 must be > 0");
    if (delta_min <= 0.0) throw std::invalid_argument("delta_min must be > 0");
    if (alpha_fallback <= 0.0) throw std::invalid_argument("alpha_fallback must be > 0");
    if (alpha_cap <= 0.0 || alpha_cap > 1.0) throw std::invalid_argument("alpha_cap must be in (0, 1]");
    if (eps_tol <= 0.0) throw std::invalid_argument("eps_tol must be > 0");
    if (max_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  }
};

/// Hyperparameter regime for stochastic (mini-batch) losses: no increment
/// memory, tiny sampling spread, compressed gain exponent. gamma = 0.1 suits
/// batches near 100; use 0.5 for batches near 500.
inline HyperParams noisy_preset() {
  HyperParams hp;
  hp.theta = 0.0;
  hp.gamma = 0.1;
  hp.zeta1 = 1e-6;
  hp.zeta2 = 1e-6;
  return hp;
}

struct ZetaSchedule {
  enum class Mode { Constant, Linear };
  Mode mode = Mode::Constant;
  double start = 0.1;
  double end = 1e-5;
  long horizon_epochs = 1000;

  void validate() const {
    if (mode == Mode::Constant) return;
    if (!(start >= end) || end <= 0.0)
      throw std::invalid_argument("schedule requires start >= end > 0");
    if (horizon_epochs < 1) throw std::invalid_argument("schedule horizon must be >= 1");
  }

  /// Linear ramp from start to end, then flat.
  double value_at(long t) const {
    const double frac = std::min(static_cast<double>(t) / horizon_epochs, 1.0);
    return start + (end - start) * frac;
  }
};

struct EpochReport {
  long t = 0;               // epoch index, 1-based after the step
  double best_loss = 0.0;
  double alpha = 0.0;
  double b_min = 0.0, b_mean = 0.0, b_max = 0.0;  // stats of b_tilde
  std::int64_t forward_evals = 0;  // cumulative
  std::int64_t grad_evals = 0;     // cumulative
  std::int64_t wall_ms = 0;        // cumulative, measured
  int ls_trials = 0;               // this epoch's line-search evaluations
};

struct OptimizerState {
  long t = 0;
  VectorXd anchor;
  MatrixXd delta;          // increment memory, N x p
  VectorXd span;           // best-worst span memory
  DiffusionDiag diffusion; // sampling spread
  SplitMix64 rng;
  std::int64_t forward_evals = 0;
  std::int64_t grad_evals = 0;
  std::chrono::steady_clock::duration wall{};

  std::int64_t wall_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(wall).count();
  }

  static OptimizerState init(const VectorXd& x0, const HyperParams& hp) {
    const auto n = x0.size();
    return OptimizerState{0,
                          x0,
                          MatrixXd::Zero(n, hp.particles),
                          VectorXd::Zero(n),
                          DiffusionDiag::uniform(static_cast<int>(n), 0.1),
                          SplitMix64(derive_seed(hp.seed, 2)),
                          0,
                          0,
                          {}};
  }
};

/// Delta_next = theta * Delta + diag(b_tilde) * Gs.
inline MatrixXd compute_increment(const MatrixXd& delta_prev, const VectorXd& b_tilde,
                                  const MatrixXd& gs, double theta) {
  if (delta_prev.rows() != gs.rows() || delta_prev.cols() != gs.cols() ||
      b_tilde.size() != gs.rows())
    throw std::invalid_argument("compute_increment: shape mismatch");
  return theta * delta_prev + (gs.array().colwise() * b_tilde.array()).matrix();
}

struct ArmijoResult {
  double alpha = 0.0;
  int trials = 0;        // forward evaluations spent
  bool accepted = false; // false means alpha_fallback was returned
};

/// Backtracking sufficient-decrease search along -d_best from x_best. Trials
/// halve from alpha_cap down to delta_min; the first trial delta with
///   f(x_best - delta d) <= f_best - c_alpha delta <d, g_best>
/// is returned. If every trial fails the fallback step is used.
inline ArmijoResult armijo_search(const VectorXd& x_best, const VectorXd& g_best,
                                  const VectorXd& d_best, double f_best,
                                  const std::function<double(const VectorXd&)>& value,
                                  double c_alpha, double delta_min, double alpha_fallback,
                                  double alpha_cap = 1.0) {
  const double slope = d_best.dot(g_best);
  ArmijoResult res;
  for (double delta = alpha_cap; delta >= delta_min; delta *= 0.5) {
    const double trial = value(x_best - delta * d_best);
    ++res.trials;
    if (trial <= f_best - c_alpha * delta * slope) {
      res.alpha = delta;
      res.accepted = true;
      return res;
    }
  }
  res.alpha = alpha_fallback;
  return res;
}

/// Xhat = Xs - alpha * Delta_next, columnwise.
inline MatrixXd update_ensemble(const MatrixXd& xs, const MatrixXd& delta_next, double alpha) {
  if (xs.rows() != delta_next.rows() || xs.cols() != delta_next.cols())
    throw std::invalid_argument("update_ensemble: shape mismatch");
  if (!(alpha > 0.0)) throw std::invalid_argument("update_ensemble: alpha must be > 0");
  return xs - alpha * delta_next;
}

struct Selection {
  VectorXd best;
  VectorXd worst;
  double best_cost = 0.0;
  int best_index = -1;  // column in [Xhat | prev_best]; p means the retained particle
};

/// Appends the retained particle to the updated ensemble, evaluates the p+1
/// candidates and picks the best (ties: lower column index) and the worst
/// (ties: higher column index). Passing prev_best_cost skips re-evaluating
/// the retained particle. Guarantees best_cost <= f(prev_best).
inline Selection retain_best_and_select(const MatrixXd& xhat, const VectorXd& prev_best,
                                        const std::function<double(const VectorXd&)>& value,
                                        std::optional<double> prev_best_cost = std::nullopt) {
  const int p = static_cast<int>(xhat.cols());
  VectorXd cost(p + 1);
  for (int j = 0; j < p; ++j) cost[j] = value(xhat.col(j));
  cost[p] = prev_best_cost ? *prev_best_cost : value(prev_best);

  int best = -1, worst = -1;
  double best_c = std::numeric_limits<double>::infinity();
  double worst_c = -std::numeric_limits<double>::infinity();
  for (int j = 0; j <= p; ++j) {
    if (cost[j] < best_c) { best_c = cost[j]; best = j; }
    if (cost[j] >= worst_c) { worst_c = cost[j]; worst = j; }
  }
  if (best < 0) throw std::runtime_error("non-finite loss for every update candidate");

  Selection sel;
  sel.best_index = best;
  sel.best_cost = best_c;
  sel.best = best == p ? prev_best : VectorXd(xhat.col(best));
  sel.worst = worst == p ? prev_best : VectorXd(xhat.col(worst));
  return sel;
}

struct DiffusionUpdate {
  VectorXd span_next;
  DiffusionDiag diffusion_next;
};

/// Span memory tracks the best-worst spread; the new diffusion diagonal is
/// the span magnitude capped at zeta1, or zeta2 where the span is zero.
inline DiffusionUpdate update_diffusion(const VectorXd& span_prev, const VectorXd& best,
                                        const VectorXd& worst, double c_s, double zeta1,
                                        double zeta2) {
  VectorXd span = (1.0 - c_s) * span_prev + c_s * (worst - best);
  VectorXd r(span.size());
  for (Eigen::Index i = 0; i < span.size(); ++i)
    r[i] = span[i] != 0.0 ? std::min(std::abs(span[i]), zeta1) : zeta2;
  return DiffusionUpdate{std::move(span), DiffusionDiag(std::move(r))};
}

/// One full iteration: sample, rank, estimate the gain, convolve the
/// increment, line-search, update, retain the best particle, adapt the
/// diffusion. Mutates state and returns the epoch report.
inline EpochReport step(OptimizerState& state, Objective& objective, const HyperParams& hp) {
  const auto start = std::chrono::steady_clock::now();
  objective.begin_epoch(state.t);

  const auto count_value = [&](const VectorXd& x) {
    ++state.forward_evals;
    return objective.value(x);
  };

  MatrixXd x = generate_ensemble(state.anchor, state.diffusion, hp.particles, state.rng);
  const int p = hp.particles;
  MatrixXd g(x.rows(), p);
  VectorXd cost(p);
  for (int j = 0; j < p; ++j) {
    cost[j] = objective.value(x.col(j));
    g.col(j) = objective.gradient(x.col(j));
  }
  state.forward_evals += p;
  state.grad_evals += p;
  if (!cost.allFinite())
    throw std::runtime_error("non-finite loss in ensemble at epoch " + std::to_string(state.t));
  // exploding-gradient guard: drop non-finite components from the gain estimate
  g = g.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });

  const SortedEnsemble sorted = sort_by_cost(x, g, cost);
  const DiagonalGain gain = diagonal_gain(sorted.x, sorted.g, hp.gamma);
  const MatrixXd delta_next = compute_increment(state.delta, gain.b_tilde, sorted.g, hp.theta);

  const ArmijoResult ls =
      armijo_search(sorted.x.col(0), sorted.g.col(0), delta_next.col(0), sorted.cost[0],
                    count_value, hp.c_alpha, hp.delta_min, hp.alpha_fallback, hp.alpha_cap);

  const MatrixXd xhat = update_ensemble(sorted.x, delta_next, ls.alpha);
  const Selection sel = retain_best_and_select(
      xhat, sorted.x.col(0), count_value,
      hp.cache_best_cost ? std::optional<double>(sorted.cost[0]) : std::nullopt);
  if (!std::isfinite(sel.best_cost))
    throw std::runtime_error("non-finite best loss at epoch " + std::to_string(state.t));

  const DiffusionUpdate du =
      update_diffusion(state.span, sel.best, sel.worst, hp.c_s, hp.zeta1, hp.zeta2);

  state.anchor = sel.best;
  state.delta = delta_next;
  state.span = du.span_next;
  state.diffusion = du.diffusion_next;
  state.t += 1;
  state.wall += std::chrono::steady_clock::now() - start;

  EpochReport rep;
  rep.t = state.t;
  rep.best_loss = sel.best_cost;
  rep.alpha = ls.alpha;
  rep.b_min = gain.b_tilde.minCoeff();
  rep.b_mean = gain.b_tilde.mean();
  rep.b_max = gain.b_tilde.maxCoeff();
  rep.forward_evals = state.forward_evals;
  rep.grad_evals = state.grad_evals;
  rep.wall_ms = state.wall_ms();
  rep.ls_trials = ls.trials;
  return rep;
}

struct RunResult {
  VectorXd x_star;
  std::vector<EpochReport> trace;
  double best_loss = 0.0;
  bool reached_tol = false;
  std::int64_t forward_evals = 0;
  std::int64_t grad_evals = 0;
  std::int64_t wall_ms = 0;
};

/// Full optimization loop: steps until the best loss drops to eps_tol or the
/// epoch budget runs out. A linear schedule overrides zeta1 = zeta2 each
/// epoch with the ramp value at t.
inline RunResult run(const VectorXd& x0, Objective& objective, const HyperParams& hp,
                     const ZetaSchedule& schedule = {}) {
  hp.validate();
  schedule.validate();
  if (x0.size() != objective.dim())
    throw std::invalid_argument("x0 dimension does not match objective");

  OptimizerState state = OptimizerState::init(x0, hp);
  objective.begin_epoch(0);
  double best = objective.value(x0);
  ++state.forward_evals;
  if (!std::isfinite(best)) throw std::runtime_error("non-finite loss at the initial point");

  RunResult out;
  while (best > hp.eps_tol && state.t < hp.max_epochs) {
    HyperParams hp_t = hp;
    if (schedule.mode == ZetaSchedule::Mode::Linear)
      hp_t.zeta1 = hp_t.zeta2 = schedule.value_at(state.t);
    out.trace.push_back(step(state, objective, hp_t));
    best = out.trace.back().best_loss;
  }
  out.x_star = state.anchor;
  out.best_loss = best;
  out.reached_tol = best <= hp.eps_tol;
  out.forward_evals = state.forward_evals;
  out.grad_evals = state.grad_evals;
  out.wall_ms = state.wall_ms();
  return out;
}

}  // namespace finder
