#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "finder/finder.hpp"
#include "finder/tinynet.hpp"
#include "support/oracles.hpp"

using finder::SplitMix64;
using finder::VectorXd;
namespace nn = finder::nn;

namespace {

nn::MlpSpec make_spec(std::vector<int> sizes, nn::Activation act = nn::Activation::Relu) {
  nn::MlpSpec spec;
  spec.layer_sizes = std::move(sizes);
  spec.activation = act;
  return spec;
}

}  // namespace

TEST_CASE("parameter counting and flat layout round-trip") {
  const auto spec = make_spec({2, 4, 2});
  CHECK(spec.param_count() == 2 * 4 + 4 + 4 * 2 + 2);

  for (auto sizes : {std::vector<int>{2, 4, 2}, {2, 8, 8, 2}, {4, 16, 3}}) {
    const auto s = make_spec(sizes);
    const VectorXd theta = nn::init_params(s, 123);
    const VectorXd back = nn::flatten(s, nn::unflatten(s, theta));
    REQUIRE(back == theta);
  }

  CHECK_THROWS_AS(make_spec({3}).validate(), std::invalid_argument);
}

TEST_CASE("uniform logits give log K loss") {
  const auto spec = make_spec({2, 4, 2});
  const auto ds = nn::make_blobs(50, 2, 1);
  const double loss = nn::forward(spec, VectorXd::Zero(spec.param_count()), ds);
  CHECK(loss == Catch::Approx(std::log(2.0)).margin(1e-12));

  const auto spec3 = make_spec({2, 4, 3});
  const auto ds3 = nn::make_blobs(51, 3, 1);
  CHECK(nn::forward(spec3, VectorXd::Zero(spec3.param_count()), ds3) ==
        Catch::Approx(std::log(3.0)).margin(1e-12));
}

TEST_CASE("confident correct logits give near-zero loss") {
  const auto spec = make_spec({2, 2});  // linear net
  std::vector<nn::LayerParams> layers(1);
  layers[0].w.resize(2, 2);
  layers[0].w << 10, 0, -10, 0;
  layers[0].b = VectorXd::Zero(2);
  const VectorXd theta = nn::flatten(spec, layers);

  nn::SyntheticDataset ds;
  ds.classes = 2;
  ds.features.resize(1, 2);
  ds.features << 1.0, 0.0;
  ds.labels = {0};
  CHECK(nn::forward(spec, theta, ds) < 1e-3);
}

TEST_CASE("duplicated samples do not change the mean loss or gradient") {
  const auto spec = make_spec({2, 4, 2});
  const VectorXd theta = nn::init_params(spec, 5);
  nn::SyntheticDataset one;
  one.classes = 2;
  one.features.resize(1, 2);
  one.features << 0.3, -1.2;
  one.labels = {1};

  nn::SyntheticDataset ten;
  ten.classes = 2;
  ten.features.resize(10, 2);
  ten.labels.assign(10, 1);
  for (int i = 0; i < 10; ++i) ten.features.row(i) << 0.3, -1.2;

  CHECK(nn::forward(spec, theta, ten) == Catch::Approx(nn::forward(spec, theta, one)).margin(1e-14));
  const VectorXd g1 = nn::backward(spec, theta, one);
  const VectorXd g10 = nn::backward(spec, theta, ten);
  CHECK((g1 - g10).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("label and shape validation") {
  const auto spec = make_spec({2, 4, 2});
  const VectorXd theta = nn::init_params(spec, 5);
  nn::SyntheticDataset ds;
  ds.classes = 2;
  ds.features.resize(1, 2);
  ds.features << 0.0, 0.0;
  ds.labels = {7};
  CHECK_THROWS_AS(nn::forward(spec, theta, ds), std::out_of_range);
  CHECK_THROWS_AS(nn::forward(spec, VectorXd::Zero(3), ds), std::invalid_argument);
}

TEST_CASE("backward matches central differences on the architecture matrix") {
  SplitMix64 rng(606);
  const std::vector<std::vector<int>> architectures = {{2, 4, 2}, {2, 8, 8, 2}, {4, 16, 3}};
  for (const auto& arch : architectures) {
    for (auto act : {nn::Activation::Tanh, nn::Activation::Relu}) {
      const auto spec = make_spec(arch, act);
      nn::SyntheticDataset ds;
      ds.classes = arch.back();
      const int samples = 8;
      ds.features.resize(samples, arch.front());
      ds.labels.resize(samples);
      for (int i = 0; i < samples; ++i) {
        ds.labels[i] = i % ds.classes;
        for (int c = 0; c < arch.front(); ++c) ds.features(i, c) = rng.uniform(-1.5, 1.5);
      }
      const auto value = [&](const VectorXd& t) { return nn::forward(spec, t, ds); };

      int done = 0;
      while (done < 20) {
        VectorXd theta(spec.param_count());
        for (int i = 0; i < theta.size(); ++i) theta[i] = rng.uniform(-0.8, 0.8);
        if (act == nn::Activation::Relu) {
          // keep clear of the kink: reject draws with near-zero preactivations
          bool near_kink = false;
          const auto layers = nn::unflatten(spec, theta);
          Eigen::MatrixXd a = ds.features.transpose();
          for (size_t l = 0; l + 1 < layers.size(); ++l) {
            Eigen::MatrixXd z = (layers[l].w * a).colwise() + layers[l].b;
            if (z.cwiseAbs().minCoeff() < 1e-4) {
              near_kink = true;
              break;
            }
            a = z.cwiseMax(0.0);
          }
          if (near_kink) continue;
        }
        ++done;
        const VectorXd analytic = nn::backward(spec, theta, ds);
        const auto fd = testing_oracles::central_diff_gradient(value, theta);
        const auto check = testing_oracles::grad_check(analytic, fd);
        REQUIRE(check.comp_mixed <= 1e-5);
        REQUIRE(check.norm_rel <= 1e-5);
      }
    }
  }
}

TEST_CASE("zero inputs kill first-layer weight gradients but not biases") {
  const auto spec = make_spec({2, 4, 2}, nn::Activation::Relu);
  auto layers = nn::unflatten(spec, nn::init_params(spec, 9));
  layers[0].b = VectorXd::Constant(4, 0.5);  // positive biases keep units alive
  layers[1].b = VectorXd::Zero(2);
  const VectorXd theta = nn::flatten(spec, layers);

  nn::SyntheticDataset ds;
  ds.classes = 2;
  ds.features = Eigen::MatrixXd::Zero(4, 2);
  ds.labels = {0, 1, 0, 1};

  const VectorXd g = nn::backward(spec, theta, ds);
  const auto glayers = nn::unflatten(spec, g);
  CHECK(glayers[0].w.cwiseAbs().maxCoeff() == 0.0);
  CHECK(glayers[0].b.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("accuracy of random nets on balanced data hovers around one half") {
  const auto spec = make_spec({2, 8, 2});
  const auto ds = nn::make_blobs(200, 2, 4242);
  double acc_sum = 0.0;
  const int runs = 100;
  for (int s = 0; s < runs; ++s) acc_sum += nn::accuracy(spec, nn::init_params(spec, 1000 + s), ds);
  const double mean = acc_sum / runs;
  CHECK(mean > 0.4);
  CHECK(mean < 0.6);
}

TEST_CASE("accuracy rejects an empty dataset") {
  const auto spec = make_spec({2, 4, 2});
  nn::SyntheticDataset empty;
  empty.features.resize(0, 2);
  CHECK_THROWS_AS(nn::accuracy(spec, nn::init_params(spec, 1), empty), std::invalid_argument);
}

TEST_CASE("blob datasets are balanced and reproducible") {
  const auto a = nn::make_blobs(101, 2, 77);
  const auto b = nn::make_blobs(101, 2, 77);
  REQUIRE(a.features == b.features);
  REQUIRE(a.labels == b.labels);

  int counts[2] = {0, 0};
  for (int label : a.labels) counts[label] += 1;
  CHECK(std::abs(counts[0] - counts[1]) <= 1);

  const auto c = nn::make_blobs(101, 2, 78);
  CHECK(a.features != c.features);

  const auto spirals = nn::make_two_spirals(100, 5);
  CHECK(spirals.size() == 100);
  CHECK(spirals.classes == 2);
}

TEST_CASE("dataset CSV round-trip is exact") {
  const auto ds = nn::make_blobs(40, 2, 13);
  const auto path = std::filesystem::temp_directory_path() / "finder_ds_roundtrip.csv";
  nn::save_dataset_csv(ds, path.string());
  const auto back = nn::load_dataset_csv(path.string());
  REQUIRE(back.features == ds.features);
  REQUIRE(back.labels == ds.labels);
  REQUIRE(back.classes == ds.classes);
  std::filesystem::remove(path);
}

TEST_CASE("distinct batch tokens give distinct losses on real data") {
  const auto spec = make_spec({2, 16, 16, 2});
  const auto ds = nn::make_blobs(1000, 2, 3);
  const auto obj = nn::make_minibatch_objective(spec, ds, 100, 99);
  const VectorXd theta = nn::init_params(spec, 4);
  const auto [l0, g0] = obj->loss_and_grad(theta, 0);
  const auto [l1, g1] = obj->loss_and_grad(theta, 1);
  CHECK(l0 != l1);
  const auto [l0b, g0b] = obj->loss_and_grad(theta, 0);
  CHECK(l0 == l0b);
  CHECK(g0 == g0b);
}

TEST_CASE("noisy-mode training trends downward at light scale") {
  const auto spec = make_spec({2, 16, 16, 2});
  const auto ds = nn::make_blobs(400, 2, 21);
  double initial_median = 0.0, final_median = 0.0;
  std::vector<double> first, last;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto obj = nn::make_minibatch_objective(spec, ds, 100, finder::derive_seed(seed, 5));
    finder::HyperParams hp = finder::noisy_preset();
    hp.seed = seed;
    hp.max_epochs = 80;
    hp.eps_tol = 1e-12;
    const VectorXd x0 = nn::init_params(spec, finder::derive_seed(seed, 4));
    first.push_back(nn::forward(spec, x0, ds));
    const auto res = finder::run(x0, *obj, hp);
    last.push_back(nn::forward(spec, res.x_star, ds));
    for (const auto& row : res.trace) REQUIRE(std::isfinite(row.best_loss));
  }
  std::sort(first.begin(), first.end());
  std::sort(last.begin(), last.end());
  initial_median = first[1];
  final_median = last[1];
  CHECK(final_median < initial_median);
}
