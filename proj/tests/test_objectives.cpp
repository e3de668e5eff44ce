#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "finder/objectives.hpp"
#include "finder/rng.hpp"
#include "support/oracles.hpp"

using finder::Benchmark;
using finder::BenchmarkId;
using finder::SplitMix64;
using finder::VectorXd;

namespace {

const std::vector<BenchmarkId> kAllIds = {
    BenchmarkId::Sphere,     BenchmarkId::Griewank,   BenchmarkId::Ackley,
    BenchmarkId::Rastrigin,  BenchmarkId::Rosenbrock, BenchmarkId::HighConditionedElliptic,
};

}  // namespace

TEST_CASE("benchmark names round-trip") {
  for (auto id : kAllIds) CHECK(finder::parse_benchmark(finder::to_string(id)) == id);
  CHECK_THROWS_AS(finder::parse_benchmark("banana"), std::invalid_argument);
}

TEST_CASE("global minima evaluate to zero") {
  for (auto id : kAllIds) {
    for (int dim : {2, 5, 10}) {
      Benchmark f(id, dim);
      CHECK(f.value(f.minimizer()) <= 1e-12);
    }
  }
}

TEST_CASE("sphere walkthrough values") {
  Benchmark sphere(BenchmarkId::Sphere, 5);
  CHECK(sphere.value(VectorXd::Ones(5)) == 5.0);

  // the first entry of the walkthrough loss listing
  VectorXd row(5);
  row << 1.0000, 0.9774, 1.0538, 1.0130, 1.0964;
  CHECK(std::abs(sphere.value(row) - 5.2940) < 5e-4);

  const VectorXd g = sphere.gradient(VectorXd::Ones(5));
  for (int i = 0; i < 5; ++i) CHECK(g[i] == 2.0);
}

TEST_CASE("stationary minima have zero gradient") {
  Benchmark ackley(BenchmarkId::Ackley, 7);
  CHECK(ackley.gradient(VectorXd::Zero(7)).cwiseAbs().maxCoeff() == 0.0);
  Benchmark rast(BenchmarkId::Rastrigin, 4);
  CHECK(rast.value(VectorXd::Zero(4)) == 0.0);
  Benchmark rosen(BenchmarkId::Rosenbrock, 6);
  CHECK(rosen.value(VectorXd::Ones(6)) == 0.0);
}

TEST_CASE("dimension errors") {
  Benchmark f(BenchmarkId::Sphere, 3);
  CHECK_THROWS_AS(f.value(VectorXd::Ones(4)), std::invalid_argument);
  CHECK_THROWS_AS(f.gradient(VectorXd::Ones(2)), std::invalid_argument);
  CHECK_THROWS_AS(Benchmark(BenchmarkId::Rosenbrock, 1), std::domain_error);
  CHECK_THROWS_AS(Benchmark(BenchmarkId::Sphere, 0), std::invalid_argument);
}

TEST_CASE("analytic gradients match central differences") {
  SplitMix64 rng(2024);
  for (auto id : kAllIds) {
    for (int dim : {2, 10, 100}) {
      Benchmark f(id, dim);
      const auto value = [&](const VectorXd& v) { return f.value(v); };
      // tighter range for rosenbrock keeps the finite-difference roundoff
      // below the tolerance at N = 100
      const double radius = id == BenchmarkId::Rosenbrock ? 2.0 : 5.0;
      for (int trial = 0; trial < 100; ++trial) {
        VectorXd x(dim);
        for (int i = 0; i < dim; ++i) x[i] = rng.uniform(-radius, radius);
        const auto check =
            testing_oracles::grad_check(f.gradient(x), testing_oracles::central_diff_gradient(value, x));
        REQUIRE(check.norm_rel <= 1e-5);
        REQUIRE(check.comp_mixed <= 1e-5);
      }
    }
  }
}

TEST_CASE("values are nonnegative over the sampling box") {
  SplitMix64 rng(7);
  for (auto id : kAllIds) {
    for (int dim : {2, 10, 100}) {
      Benchmark f(id, dim);
      for (int trial = 0; trial < 10000 / 18; ++trial) {
        VectorXd x(dim);
        for (int i = 0; i < dim; ++i) x[i] = rng.uniform(-5.0, 5.0);
        REQUIRE(f.value(x) >= 0.0);
      }
    }
  }
}

TEST_CASE("minibatch selection is deterministic per token") {
  // toy batch loss: mean squared distance of theta[0] to the sample index
  auto value_fn = [](const VectorXd& t, const std::vector<int>& idx) {
    double s = 0.0;
    for (int i : idx) s += (t[0] - i) * (t[0] - i);
    return s / idx.size();
  };
  auto grad_fn = [](const VectorXd& t, const std::vector<int>& idx) {
    double s = 0.0;
    for (int i : idx) s += 2.0 * (t[0] - i);
    return VectorXd::Constant(1, s / idx.size()).eval();
  };
  finder::MinibatchObjective obj(1, 100, 10, 555, value_fn, grad_fn);

  VectorXd theta = VectorXd::Constant(1, 3.25);
  const auto [l1, g1] = finder::minibatch_loss_and_grad(obj, theta, 4);
  const auto [l2, g2] = finder::minibatch_loss_and_grad(obj, theta, 4);
  CHECK(l1 == l2);
  CHECK(g1[0] == g2[0]);

  const auto [l3, g3] = finder::minibatch_loss_and_grad(obj, theta, 5);
  CHECK(l1 != l3);

  // tokens within one pass partition the permutation
  std::vector<bool> seen(100, false);
  for (int token = 0; token < 10; ++token)
    for (int i : obj.batch_indices(token)) {
      REQUIRE(!seen[i]);
      seen[i] = true;
    }
  for (bool b : seen) REQUIRE(b);
}

TEST_CASE("full-dataset batch equals unbatched evaluation for any token") {
  auto value_fn = [](const VectorXd& t, const std::vector<int>& idx) {
    double s = 0.0;
    for (int i : idx) s += std::sin(t[0] * (i + 1));
    return s / idx.size();
  };
  auto grad_fn = [](const VectorXd&, const std::vector<int>&) { return VectorXd::Zero(1).eval(); };
  finder::MinibatchObjective obj(1, 37, 37, 9, value_fn, grad_fn);
  std::vector<int> all(37);
  std::iota(all.begin(), all.end(), 0);
  VectorXd theta = VectorXd::Constant(1, 0.7);
  const double full = value_fn(theta, all);
  for (int token : {0, 1, 17}) CHECK(obj.loss_and_grad(theta, token).first == full);
}

TEST_CASE("minibatch construction errors") {
  auto v = [](const VectorXd&, const std::vector<int>&) { return 0.0; };
  auto g = [](const VectorXd&, const std::vector<int>&) { return VectorXd::Zero(1).eval(); };
  CHECK_THROWS_AS(finder::MinibatchObjective(1, 0, 1, 0, v, g), std::invalid_argument);
  CHECK_THROWS_AS(finder::MinibatchObjective(1, 10, 11, 0, v, g), std::invalid_argument);
  CHECK_THROWS_AS(finder::MinibatchObjective(1, 10, 0, 0, v, g), std::invalid_argument);
}
