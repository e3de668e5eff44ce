#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "finder/rng.hpp"

namespace finder {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cost-function contract: nonnegative value plus analytic gradient over R^N.
/// Stochastic objectives re-bind their sample subset in begin_epoch(); for
/// deterministic objectives it is a no-op and value/gradient are pure.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual int dim() const = 0;
  virtual double value(const VectorXd& x) const = 0;
  virtual VectorXd gradient(const VectorXd& x) const = 0;

  virtual void begin_epoch(std::int64_t /*batch_token*/) {}
  virtual bool stochastic() const { return false; }
};

enum class BenchmarkId {
  Sphere,
  Griewank,
  Ackley,
  Rastrigin,
  Rosenbrock,
  HighConditionedElliptic,
};

inline const char* to_string(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::Sphere: return "sphere";
    case BenchmarkId::Griewank: return "griewank";
    case BenchmarkId::Ackley: return "ackley";
    case BenchmarkId::Rastrigin: return "rastrigin";
    case BenchmarkId::Rosenbrock: return "rosenbrock";
    case BenchmarkId::HighConditionedElliptic: return "elliptic";
  }
  return "?";
}

inline BenchmarkId parse_benchmark(const std::string& name) {
  if (name == "sphere") return BenchmarkId::Sphere;
  if (name == "griewank") return BenchmarkId::Griewank;
  if (name == "ackley") return BenchmarkId::Ackley;
  if (name == "rastrigin") return BenchmarkId::Rastrigin;
  if (name == "rosenbrock") return BenchmarkId::Rosenbrock;
  if (name == "elliptic") return BenchmarkId::HighConditionedElliptic;
  throw std::invalid_argument("unknown objective '" + name +
                              "' (expected sphere|griewank|ackley|rastrigin|rosenbrock|elliptic)");
}

/// The six benchmark functions, global minimum value 0 for all of them.
class Benchmark final : public Objective {
 public:
  Benchmark(BenchmarkId id, int dim) : id_(id), dim_(dim) {
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (id == BenchmarkId::Rosenbrock && dim < 2)
      throw std::domain_error("rosenbrock requires dim >= 2");
  }

  BenchmarkId id() const { return id_; }
  int dim() const override { return dim_; }

  /// Location of the global minimum (f = 0 there).
  VectorXd minimizer() const {
    return id_ == BenchmarkId::Rosenbrock ? VectorXd::Ones(dim_) : VectorXd::Zero(dim_);
  }

  double value(const VectorXd& x) const override {
    check(x);
    const int n = dim_;
    switch (id_) {
      case BenchmarkId::Sphere:
        return x.squaredNorm();
      case BenchmarkId::Griewank: {
        double prod = 1.0;
        for (int i = 0; i < n; ++i) prod *= std::cos(x[i] / std::sqrt(i + 1.0));
        return 1.0 + x.squaredNorm() / 4000.0 - prod;
      }
      case BenchmarkId::Ackley: {
        const double rms = std::sqrt(x.squaredNorm() / n);
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += std::cos(two_pi * x[i]);
        return -20.0 * std::exp(-0.2 * rms) - std::exp(c / n) + 20.0 + std::exp(1.0);
      }
      case BenchmarkId::Rastrigin: {
        double s = 10.0 * n;
        for (int i = 0; i < n; ++i) s += x[i] * x[i] - 10.0 * std::cos(two_pi * x[i]);
        return s;
      }
      case BenchmarkId::Rosenbrock: {
        double s = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
          const double a = x[i + 1] - x[i] * x[i];
          const double b = 1.0 - x[i];
          s += 100.0 * a * a + b * b;
        }
        return s;
      }
      case BenchmarkId::HighConditionedElliptic: {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += coef(i) * x[i] * x[i];
        return s;
      }
    }
    throw std::logic_error("unreachable");
  }

  VectorXd gradient(const VectorXd& x) const override {
    check(x);
    const int n = dim_;
    VectorXd g(n);
    switch (id_) {
      case BenchmarkId::Sphere:
        return 2.0 * x;
      case BenchmarkId::Griewank: {
        std::vector<double> c(n);
        double prod = 1.0;
        for (int i = 0; i < n; ++i) {
          c[i] = std::cos(x[i] / std::sqrt(i + 1.0));
          prod *= c[i];
        }
        for (int i = 0; i < n; ++i) {
          const double root = std::sqrt(i + 1.0);
          double rest;  // product of cos terms excluding i
          if (std::abs(c[i]) > 1e-12) {
            rest = prod / c[i];
          } else {
            rest = 1.0;
            for (int j = 0; j < n; ++j)
              if (j != i) rest *= c[j];
          }
          g[i] = x[i] / 2000.0 + std::sin(x[i] / root) / root * rest;
        }
        return g;
      }
      case BenchmarkId::Ackley: {
        const double rms = std::sqrt(x.squaredNorm() / n);
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += std::cos(two_pi * x[i]);
        const double e1 = std::exp(-0.2 * rms);
        const double e2 = std::exp(c / n);
        for (int i = 0; i < n; ++i) {
          const double radial = rms > 0.0 ? 4.0 * e1 * x[i] / (n * rms) : 0.0;
          g[i] = radial + two_pi / n * std::sin(two_pi * x[i]) * e2;
        }
        return g;
      }
      case BenchmarkId::Rastrigin: {
        for (int i = 0; i < n; ++i)
          g[i] = 2.0 * x[i] + 10.0 * two_pi * std::sin(two_pi * x[i]);
        return g;
      }
      case BenchmarkId::Rosenbrock: {
        g.setZero();
        for (int i = 0; i + 1 < n; ++i) {
          const double a = x[i + 1] - x[i] * x[i];
          g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
          g[i + 1] += 200.0 * a;
        }
        return g;
      }
      case BenchmarkId::HighConditionedElliptic: {
        for (int i = 0; i < n; ++i) g[i] = 2.0 * coef(i) * x[i];
        return g;
      }
    }
    throw std::logic_error("unreachable");
  }

 private:
  static constexpr double two_pi = 2.0 * std::numbers::pi;

  void check(const VectorXd& x) const {
    if (x.size() != dim_)
      throw std::invalid_argument("dimension mismatch: got " + std::to_string(x.size()) +
                                  ", expected " + std::to_string(dim_));
  }

  double coef(int i) const {
    return dim_ == 1 ? 1.0 : std::pow(1e6, static_cast<double>(i) / (dim_ - 1));
  }

  BenchmarkId id_;
  int dim_;
};

/// Mini-batch wrapper producing a noisy loss. A batch token selects exactly
/// batch_size samples: the index permutation is shuffled once per data pass
/// (token / batches_per_epoch) and partitioned sequentially, so the same
/// token always yields the same subset. Indices are handed to the model in
/// ascending order, which makes the full-dataset batch bitwise identical to
/// an unbatched evaluation.
class MinibatchObjective final : public Objective {
 public:
  using BatchValueFn = std::function<double(const VectorXd&, const std::vector<int>&)>;
  using BatchGradFn = std::function<VectorXd(const VectorXd&, const std::vector<int>&)>;

  MinibatchObjective(int param_dim, int sample_count, int batch_size,
                     std::uint64_t epoch_rng_seed, BatchValueFn value_fn, BatchGradFn grad_fn)
      : dim_(param_dim),
        samples_(sample_count),
        batch_size_(batch_size),
        seed_(epoch_rng_seed),
        value_fn_(std::move(value_fn)),
        grad_fn_(std::move(grad_fn)) {
    if (samples_ <= 0) throw std::invalid_argument("minibatch: dataset is empty");
    if (batch_size_ <= 0) throw std::invalid_argument("minibatch: batch_size must be >= 1");
    if (batch_size_ > samples_)
      throw std::invalid_argument("minibatch: batch_size exceeds dataset size");
    batch_ = batch_indices(0);
  }

  int dim() const override { return dim_; }
  bool stochastic() const override { return true; }
  int batches_per_epoch() const { return samples_ / batch_size_; }

  void begin_epoch(std::int64_t batch_token) override { batch_ = batch_indices(batch_token); }

  double value(const VectorXd& x) const override { return value_fn_(x, batch_); }
  VectorXd gradient(const VectorXd& x) const override { return grad_fn_(x, batch_); }

  /// Deterministic sample subset for a token.
  std::vector<int> batch_indices(std::int64_t batch_token) const {
    if (batch_token < 0) throw std::invalid_argument("minibatch: batch_token must be >= 0");
    const std::int64_t per_epoch = batches_per_epoch();
    const std::uint64_t pass = static_cast<std::uint64_t>(batch_token / per_epoch);
    const int slot = static_cast<int>(batch_token % per_epoch);

    std::vector<int> perm(samples_);
    std::iota(perm.begin(), perm.end(), 0);
    SplitMix64 rng(derive_seed(seed_, pass));
    for (int i = samples_ - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);

    std::vector<int> batch(perm.begin() + static_cast<std::ptrdiff_t>(slot) * batch_size_,
                           perm.begin() + static_cast<std::ptrdiff_t>(slot + 1) * batch_size_);
    std::sort(batch.begin(), batch.end());
    return batch;
  }

  std::pair<double, VectorXd> loss_and_grad(const VectorXd& params,
                                            std::int64_t batch_token) const {
    const auto batch = batch_indices(batch_token);
    return {value_fn_(params, batch), grad_fn_(params, batch)};
  }

 private:
  int dim_;
  int samples_;
  int batch_size_;
  std::uint64_t seed_;
  BatchValueFn value_fn_;
  BatchGradFn grad_fn_;
  std::vector<int> batch_;
};

inline std::pair<double, VectorXd> minibatch_loss_and_grad(const MinibatchObjective& obj,
                                                           const VectorXd& params,
                                                           std::int64_t batch_token) {
  return obj.loss_and_grad(params, batch_token);
}

}  // namespace finder
