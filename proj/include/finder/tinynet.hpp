#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "finder/objectives.hpp"
#include "finder/rng.hpp"

namespace finder::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { Relu, Tanh };

/// Fully-connected net description; hidden layers use the chosen activation,
/// the output layer is linear and trained with softmax cross-entropy.
struct MlpSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::Relu;

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("mlp needs >= 2 layers");
    for (int s : layer_sizes)
      if (s < 1) throw std::invalid_argument("layer sizes must be >= 1");
  }

  int num_weight_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  int classes() const { return layer_sizes.back(); }

  /// Flat parameter count: per layer a row-major (out x in) weight block
  /// followed by the bias vector.
  int param_count() const {
    int n = 0;
    for (int l = 0; l + 1 < static_cast<int>(layer_sizes.size()); ++l)
      n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    return n;
  }
};

namespace detail {

using WeightMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>;
using BiasMap = Eigen::Map<const VectorXd>;

inline void check_theta(const MlpSpec& spec, const VectorXd& theta) {
  if (theta.size() != spec.param_count())
    throw std::invalid_argument("parameter vector has length " + std::to_string(theta.size()) +
                                ", expected " + std::to_string(spec.param_count()));
}

inline WeightMap weights(const MlpSpec& spec, const VectorXd& theta, int layer, int& offset) {
  const int in = spec.layer_sizes[layer];
  const int out = spec.layer_sizes[layer + 1];
  WeightMap w(theta.data() + offset, out, in);
  offset += out * in;
  return w;
}

inline BiasMap biases(const MlpSpec& spec, const VectorXd& theta, int layer, int& offset) {
  const int out = spec.layer_sizes[layer + 1];
  BiasMap b(theta.data() + offset, out);
  offset += out;
  return b;
}

}  // namespace detail

/// Seeded small-scale classification data: row-per-sample features plus
/// integer labels in [0, K). Class counts are balanced within one sample.
struct SyntheticDataset {
  MatrixXd features;        // M x d
  std::vector<int> labels;  // length M
  int classes = 2;

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

/// Gaussian blobs with class centers spaced on a circle of the given radius.
inline SyntheticDataset make_blobs(int samples, int classes, std::uint64_t seed,
                                   double center_radius = 2.0, double spread = 0.6) {
  if (samples < 1 || classes < 2) throw std::invalid_argument("make_blobs: bad shape");
  SyntheticDataset ds;
  ds.classes = classes;
  ds.features.resize(samples, 2);
  ds.labels.resize(samples);
  SplitMix64 rng(derive_seed(seed, 31));
  for (int i = 0; i < samples; ++i) {
    const int c = i % classes;
    const double angle = 2.0 * std::numbers::pi * c / classes;
    ds.labels[i] = c;
    ds.features(i, 0) = center_radius * std::cos(angle) + spread * rng.normal();
    ds.features(i, 1) = center_radius * std::sin(angle) + spread * rng.normal();
  }
  return ds;
}

/// Two interleaved spirals, the harder 2-class benchmark.
inline SyntheticDataset make_two_spirals(int samples, std::uint64_t seed, double noise = 0.05) {
  if (samples < 2) throw std::invalid_argument("make_two_spirals: need >= 2 samples");
  SyntheticDataset ds;
  ds.classes = 2;
  ds.features.resize(samples, 2);
  ds.labels.resize(samples);
  SplitMix64 rng(derive_seed(seed, 37));
  for (int i = 0; i < samples; ++i) {
    const int c = i % 2;
    const double t = 0.25 + 3.0 * std::numbers::pi * (i / 2) / std::max(1, samples / 2);
    const double r = 0.1 * t;
    const double phase = c * std::numbers::pi;
    ds.labels[i] = c;
    ds.features(i, 0) = r * std::cos(t + phase) + noise * rng.normal();
    ds.features(i, 1) = r * std::sin(t + phase) + noise * rng.normal();
  }
  return ds;
}

inline std::vector<int> all_indices(const SyntheticDataset& ds) {
  std::vector<int> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

/// Mean softmax cross-entropy over the selected samples, with the matching
/// analytic gradient in the flat parameter vector. Single shared pass; the
/// gradient output is optional.
inline double loss_impl(const MlpSpec& spec, const VectorXd& theta, const MatrixXd& features,
                        const std::vector<int>& labels, const std::vector<int>& batch,
                        VectorXd* grad_out) {
  spec.validate();
  detail::check_theta(spec, theta);
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int b = static_cast<int>(batch.size());
  const int layers = spec.num_weight_layers();
  const int classes = spec.classes();

  MatrixXd a(spec.layer_sizes[0], b);
  for (int j = 0; j < b; ++j) {
    const int row = batch[j];
    if (row < 0 || row >= features.rows()) throw std::out_of_range("sample index out of range");
    const int y = labels[row];
    if (y < 0 || y >= classes) throw std::out_of_range("label out of range");
    a.col(j) = features.row(row).transpose();
  }

  std::vector<MatrixXd> acts;   // activations per layer, acts[0] = input
  std::vector<MatrixXd> pre;    // pre-activations of hidden layers
  acts.reserve(layers + 1);
  acts.push_back(a);
  int offset = 0;
  MatrixXd z;
  for (int l = 0; l < layers; ++l) {
    const auto w = detail::weights(spec, theta, l, offset);
    const auto bias = detail::biases(spec, theta, l, offset);
    z = (w * acts.back()).colwise() + bias;
    if (l + 1 < layers) {
      pre.push_back(z);
      if (spec.activation == Activation::Relu)
        acts.push_back(z.cwiseMax(0.0));
      else
        acts.push_back(z.array().tanh().matrix());
    }
  }
  const MatrixXd& logits = z;  // classes x b

  double loss = 0.0;
  MatrixXd dz(classes, b);
  for (int j = 0; j < b; ++j) {
    const int y = labels[batch[j]];
    const double zmax = logits.col(j).maxCoeff();
    const VectorXd shifted = logits.col(j).array() - zmax;
    const VectorXd ex = shifted.array().exp();
    const double sum = ex.sum();
    loss += std::log(sum) - shifted[y];
    if (grad_out) {
      dz.col(j) = ex / sum;
      dz(y, j) -= 1.0;
    }
  }
  loss /= b;
  if (!grad_out) return loss;

  dz /= static_cast<double>(b);
  grad_out->setZero(spec.param_count());
  // walk the layers backwards, writing gradient blocks in the flat layout
  std::vector<int> offsets(layers);
  offset = 0;
  for (int l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
  }
  MatrixXd delta = dz;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dw(
        grad_out->data() + offsets[l], out, in);
    Eigen::Map<VectorXd> db(grad_out->data() + offsets[l] + out * in, out);
    dw = delta * acts[l].transpose();
    db = delta.rowwise().sum();
    if (l > 0) {
      int woff = offsets[l];
      const auto w = detail::weights(spec, theta, l, woff);
      MatrixXd da = w.transpose() * delta;
      if (spec.activation == Activation::Relu)
        delta = da.cwiseProduct(
            pre[l - 1].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
      else
        delta = da.cwiseProduct(
            (1.0 - acts[l].array().square()).matrix());
    }
  }
  return loss;
}

inline double forward(const MlpSpec& spec, const VectorXd& theta, const MatrixXd& features,
                      const std::vector<int>& labels, const std::vector<int>& batch) {
  return loss_impl(spec, theta, features, labels, batch, nullptr);
}

inline double forward(const MlpSpec& spec, const VectorXd& theta, const SyntheticDataset& ds) {
  return forward(spec, theta, ds.features, ds.labels, all_indices(ds));
}

inline VectorXd backward(const MlpSpec& spec, const VectorXd& theta, const MatrixXd& features,
                         const std::vector<int>& labels, const std::vector<int>& batch) {
  VectorXd grad;
  loss_impl(spec, theta, features, labels, batch, &grad);
  return grad;
}

inline VectorXd backward(const MlpSpec& spec, const VectorXd& theta, const SyntheticDataset& ds) {
  return backward(spec, theta, ds.features, ds.labels, all_indices(ds));
}

/// Fraction of samples whose arg-max logit matches the label.
inline double accuracy(const MlpSpec& spec, const VectorXd& theta, const SyntheticDataset& ds) {
  spec.validate();
  detail::check_theta(spec, theta);
  if (ds.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const int layers = spec.num_weight_layers();
  MatrixXd a = ds.features.transpose();
  int offset = 0;
  for (int l = 0; l < layers; ++l) {
    const auto w = detail::weights(spec, theta, l, offset);
    const auto bias = detail::biases(spec, theta, l, offset);
    MatrixXd z = (w * a).colwise() + bias;
    if (l + 1 < layers)
      a = spec.activation == Activation::Relu ? z.cwiseMax(0.0)
                                              : MatrixXd(z.array().tanh().matrix());
    else
      a = z;
  }
  int correct = 0;
  for (int j = 0; j < ds.size(); ++j) {
    Eigen::Index argmax;
    a.col(j).maxCoeff(&argmax);
    if (static_cast<int>(argmax) == ds.labels[j]) ++correct;
  }
  return static_cast<double>(correct) / ds.size();
}

/// Structured view of one weight layer.
struct LayerParams {
  MatrixXd w;  // out x in
  VectorXd b;  // out
};

inline std::vector<LayerParams> unflatten(const MlpSpec& spec, const VectorXd& theta) {
  spec.validate();
  detail::check_theta(spec, theta);
  std::vector<LayerParams> layers(spec.num_weight_layers());
  int offset = 0;
  for (int l = 0; l < spec.num_weight_layers(); ++l) {
    layers[l].w = detail::weights(spec, theta, l, offset);
    layers[l].b = detail::biases(spec, theta, l, offset);
  }
  return layers;
}

inline VectorXd flatten(const MlpSpec& spec, const std::vector<LayerParams>& layers) {
  spec.validate();
  if (static_cast<int>(layers.size()) != spec.num_weight_layers())
    throw std::invalid_argument("flatten: wrong layer count");
  VectorXd theta(spec.param_count());
  int offset = 0;
  for (int l = 0; l < spec.num_weight_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    if (layers[l].w.rows() != out || layers[l].w.cols() != in || layers[l].b.size() != out)
      throw std::invalid_argument("flatten: layer shape mismatch");
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) theta[offset + r * in + c] = layers[l].w(r, c);
    offset += out * in;
    theta.segment(offset, out) = layers[l].b;
    offset += out;
  }
  return theta;
}

/// Glorot-uniform weights, zero biases, deterministic in the seed.
inline VectorXd init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  VectorXd theta = VectorXd::Zero(spec.param_count());
  SplitMix64 rng(derive_seed(seed, 41));
  int offset = 0;
  for (int l = 0; l < spec.num_weight_layers(); ++l) {
    const int in = spec.layer_sizes[l];
    const int out = spec.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    for (int k = 0; k < out * in; ++k) theta[offset + k] = limit * rng.uniform_sym();
    offset += out * in + out;
  }
  return theta;
}

/// Binds a net and dataset into the mini-batch objective contract.
inline std::unique_ptr<MinibatchObjective> make_minibatch_objective(
    const MlpSpec& spec, const SyntheticDataset& ds, int batch_size, std::uint64_t epoch_seed) {
  spec.validate();
  auto value_fn = [spec, &ds](const VectorXd& theta, const std::vector<int>& batch) {
    return forward(spec, theta, ds.features, ds.labels, batch);
  };
  auto grad_fn = [spec, &ds](const VectorXd& theta, const std::vector<int>& batch) {
    return backward(spec, theta, ds.features, ds.labels, batch);
  };
  return std::make_unique<MinibatchObjective>(spec.param_count(), ds.size(), batch_size,
                                              epoch_seed, value_fn, grad_fn);
}

/// CSV round-trip: feature columns then the integer label, one row per sample.
inline void save_dataset_csv(const SyntheticDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (int c = 0; c < ds.feature_dim(); ++c) out << "x" << c << ",";
  out << "label\n";
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    for (int c = 0; c < ds.feature_dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, c));
      out << buf << ",";
    }
    out << ds.labels[i] << "\n";
  }
}

inline SyntheticDataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  const auto cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  const int d = cols - 1;
  if (d < 1) throw std::runtime_error("malformed dataset header in " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<double> vals;
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != cols)
      throw std::runtime_error("malformed dataset row in " + path);
    labels.push_back(static_cast<int>(vals.back()));
    max_label = std::max(max_label, labels.back());
    vals.pop_back();
    rows.push_back(std::move(vals));
  }
  SyntheticDataset ds;
  ds.classes = max_label + 1;
  ds.labels = std::move(labels);
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < d; ++c) ds.features(static_cast<Eigen::Index>(i), c) = rows[i][c];
  return ds;
}

}  // namespace finder::nn
