#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "finder/baselines.hpp"
#include "finder/finder.hpp"
#include "finder/objectives.hpp"
#include "finder/tinynet.hpp"
#include "finder/trace.hpp"

namespace finder::harness {

enum class OptimizerKind { Finder, Adam, Gd };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Finder: return "finder";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::Gd: return "gd";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "finder") return OptimizerKind::Finder;
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "gd") return OptimizerKind::Gd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected finder|adam|gd)");
}

/// Fully resolved experiment description. Built from defaults, then a flat
/// JSON config file, then command-line overrides, in that order.
struct RunConfig {
  OptimizerKind optimizer = OptimizerKind::Finder;
  std::string objective = "sphere";  // benchmark name or "tinynet"
  int dim = 5;
  HyperParams hp;           // epochs / eps_tol / seed live here as well
  ZetaSchedule schedule;
  double lr = 1e-3;         // baseline learning rate
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 100;     // tinynet
  int dataset_size = 1000;  // tinynet
  int classes = 2;          // tinynet
  std::vector<int> hidden = {16, 16};  // tinynet hidden layer sizes
  bool wall_time = false;   // include measured wall_ms in the trace CSV
  std::string out_path;

  bool is_tinynet() const { return objective == "tinynet"; }

  void validate() const {
    if (!is_tinynet()) {
      if (dim < 1) throw std::invalid_argument("dim must be >= 1");
      (void)parse_benchmark(objective);
      if (objective == "rosenbrock" && dim < 2)
        throw std::invalid_argument("rosenbrock requires dim >= 2");
    } else {
      if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
      if (dataset_size < 1) throw std::invalid_argument("dataset_size must be >= 1");
      if (classes < 2) throw std::invalid_argument("classes must be >= 2");
      for (int h : hidden)
        if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
    }
    hp.validate();
    schedule.validate();
    if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid value for '" + key + "': '" + v + "' is not a number");
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid value for '" + key + "': '" + v + "' is not an integer");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("invalid value for '" + key + "': '" + v + "' is not a bool");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::istringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(static_cast<int>(to_long(key, cell)));
  if (out.empty()) throw std::invalid_argument("invalid value for '" + key + "': empty list");
  return out;
}

}  // namespace detail

/// Ordered key/value assignments; later entries win.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads a flat JSON object into key/value pairs. Nested values are rejected.
inline KeyValues load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config parse error in " + path + ": not a JSON object");
  KeyValues kv;
  for (const auto& [key, val] : j.items()) {
    if (val.is_string())
      kv.emplace_back(key, val.get<std::string>());
    else if (val.is_boolean())
      kv.emplace_back(key, val.get<bool>() ? "true" : "false");
    else if (val.is_number_integer())
      kv.emplace_back(key, std::to_string(val.get<long long>()));
    else if (val.is_number())
      kv.emplace_back(key, [&] {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.17g", val.get<double>());
        return std::string(buf);
      }());
    else
      throw std::runtime_error("config parse error in " + path + ": key '" + key +
                               "' has a non-scalar value");
  }
  return kv;
}

/// Applies assignments over the defaults and validates. When the objective is
/// tinynet and no explicit value overrides them, theta/gamma/zeta switch to
/// the noisy preset.
inline RunConfig make_config(const KeyValues& kv) {
  RunConfig cfg;
  bool dim_explicit = false;

  // Resolve the objective first so hyperparameter defaults can follow it.
  for (const auto& [k, v] : kv)
    if (k == "objective") cfg.objective = v;
  if (cfg.is_tinynet()) {
    const std::uint64_t seed = cfg.hp.seed;
    const double eps = cfg.hp.eps_tol;
    const long epochs = cfg.hp.max_epochs;
    cfg.hp = noisy_preset();
    cfg.hp.seed = seed;
    cfg.hp.eps_tol = eps;
    cfg.hp.max_epochs = epochs;
  } else {
    (void)parse_benchmark(cfg.objective);
  }

  for (const auto& [key, v] : kv) {
    if (key == "objective") continue;
    if (key == "optimizer") cfg.optimizer = parse_optimizer(v);
    else if (key == "dim") { cfg.dim = static_cast<int>(detail::to_long(key, v)); dim_explicit = true; }
    else if (key == "epochs") cfg.hp.max_epochs = detail::to_long(key, v);
    else if (key == "eps_tol") cfg.hp.eps_tol = detail::to_double(key, v);
    else if (key == "seed") cfg.hp.seed = static_cast<std::uint64_t>(detail::to_long(key, v));
    else if (key == "out") cfg.out_path = v;
    else if (key == "wall_time") cfg.wall_time = detail::to_bool(key, v);
    else if (key == "p") cfg.hp.particles = static_cast<int>(detail::to_long(key, v));
    else if (key == "theta") cfg.hp.theta = detail::to_double(key, v);
    else if (key == "gamma") cfg.hp.gamma = detail::to_double(key, v);
    else if (key == "c_s") cfg.hp.c_s = detail::to_double(key, v);
    else if (key == "c_alpha") cfg.hp.c_alpha = detail::to_double(key, v);
    else if (key == "zeta1") cfg.hp.zeta1 = detail::to_double(key, v);
    else if (key == "zeta2") cfg.hp.zeta2 = detail::to_double(key, v);
    else if (key == "delta_min") cfg.hp.delta_min = detail::to_double(key, v);
    else if (key == "alpha_fallback") cfg.hp.alpha_fallback = detail::to_double(key, v);
    else if (key == "alpha_cap") cfg.hp.alpha_cap = detail::to_double(key, v);
    else if (key == "cache_best_cost") cfg.hp.cache_best_cost = detail::to_bool(key, v);
    else if (key == "schedule_mode") {
      if (v == "constant") cfg.schedule.mode = ZetaSchedule::Mode::Constant;
      else if (v == "linear") cfg.schedule.mode = ZetaSchedule::Mode::Linear;
      else throw std::invalid_argument("invalid value for 'schedule_mode': expected constant|linear");
    }
    else if (key == "schedule_start") cfg.schedule.start = detail::to_double(key, v);
    else if (key == "schedule_end") cfg.schedule.end = detail::to_double(key, v);
    else if (key == "schedule_horizon") cfg.schedule.horizon_epochs = detail::to_long(key, v);
    else if (key == "lr") cfg.lr = detail::to_double(key, v);
    else if (key == "beta1") cfg.beta1 = detail::to_double(key, v);
    else if (key == "beta2") cfg.beta2 = detail::to_double(key, v);
    else if (key == "adam_eps") cfg.adam_eps = detail::to_double(key, v);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(detail::to_long(key, v));
    else if (key == "dataset_size") cfg.dataset_size = static_cast<int>(detail::to_long(key, v));
    else if (key == "classes") cfg.classes = static_cast<int>(detail::to_long(key, v));
    else if (key == "hidden") cfg.hidden = detail::to_int_list(key, v);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }

  if (cfg.is_tinynet() && dim_explicit)
    throw std::invalid_argument("dim is derived from the network for tinynet");
  cfg.validate();
  return cfg;
}

/// Seed of last resort from the environment, applied only when the
/// assignments carry no explicit seed.
inline void apply_env_seed(KeyValues& kv) {
  for (const auto& [k, v] : kv)
    if (k == "seed") return;
  if (const char* env = std::getenv("FINDER_OPT_SEED"); env && *env)
    kv.emplace_back("seed", env);
}

/// Objective plus everything needed to reproduce and score it.
struct ProblemInstance {
  std::unique_ptr<nn::SyntheticDataset> dataset;  // tinynet only
  std::optional<nn::MlpSpec> net;                 // tinynet only
  std::unique_ptr<Objective> objective;
  VectorXd x0;
  std::string x0_policy;
};

/// Builds the objective and the seeded initial point. Sphere starts from the
/// all-ones vector; other benchmarks from a uniform draw in [-2, 2]^N
/// derived from the seed; tinynet from Glorot-initialized parameters.
inline ProblemInstance make_problem(const RunConfig& cfg) {
  ProblemInstance prob;
  if (cfg.is_tinynet()) {
    prob.dataset = std::make_unique<nn::SyntheticDataset>(
        nn::make_blobs(cfg.dataset_size, cfg.classes, cfg.hp.seed));
    nn::MlpSpec spec;
    spec.layer_sizes.push_back(prob.dataset->feature_dim());
    for (int h : cfg.hidden) spec.layer_sizes.push_back(h);
    spec.layer_sizes.push_back(cfg.classes);
    spec.activation = nn::Activation::Relu;
    prob.net = spec;
    prob.objective = nn::make_minibatch_objective(spec, *prob.dataset, cfg.batch_size,
                                                  derive_seed(cfg.hp.seed, 5));
    prob.x0 = nn::init_params(spec, derive_seed(cfg.hp.seed, 4));
    prob.x0_policy = "glorot(seed)";
  } else {
    const BenchmarkId id = parse_benchmark(cfg.objective);
    prob.objective = std::make_unique<Benchmark>(id, cfg.dim);
    if (id == BenchmarkId::Sphere) {
      prob.x0 = VectorXd::Ones(cfg.dim);
      prob.x0_policy = "ones";
    } else {
      SplitMix64 rng(derive_seed(cfg.hp.seed, 1));
      prob.x0.resize(cfg.dim);
      for (int i = 0; i < cfg.dim; ++i) prob.x0[i] = rng.uniform(-2.0, 2.0);
      prob.x0_policy = "uniform[-2,2](seed)";
    }
  }
  return prob;
}

struct BenchOutcome {
  std::vector<TraceRow> rows;
  double final_loss = 0.0;
  bool reached_tol = false;
  std::int64_t forward_evals = 0;
  std::int64_t grad_evals = 0;
  std::int64_t wall_ms = 0;  // measured, independent of the CSV flag
  std::optional<double> train_accuracy;
  std::string x0_policy;
};

/// Executes one configured run and collects its trace.
inline BenchOutcome run_bench(const RunConfig& cfg) {
  cfg.validate();
  ProblemInstance prob = make_problem(cfg);
  BenchOutcome out;
  out.x0_policy = prob.x0_policy;

  if (cfg.optimizer == OptimizerKind::Finder) {
    const RunResult res = run(prob.x0, *prob.objective, cfg.hp, cfg.schedule);
    out.rows.reserve(res.trace.size());
    for (const auto& rep : res.trace)
      out.rows.push_back(TraceRow{rep.t, rep.best_loss, rep.alpha, rep.forward_evals,
                                  rep.grad_evals, cfg.wall_time ? rep.wall_ms : 0});
    out.final_loss = res.best_loss;
    out.reached_tol = res.reached_tol;
    out.forward_evals = res.forward_evals;
    out.grad_evals = res.grad_evals;
    out.wall_ms = res.wall_ms;
    if (prob.net) out.train_accuracy = nn::accuracy(*prob.net, res.x_star, *prob.dataset);
    return out;
  }

  // First-order baselines: one gradient and one re-evaluation per epoch.
  const auto start = std::chrono::steady_clock::now();
  Objective& obj = *prob.objective;
  VectorXd x = prob.x0;
  AdamState adam = AdamState::init(static_cast<int>(x.size()), cfg.lr);
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.adam_eps;

  std::int64_t fw = 0, gr = 0;
  obj.begin_epoch(0);
  double loss = obj.value(x);
  ++fw;
  long t = 0;
  while (loss > cfg.hp.eps_tol && t < cfg.hp.max_epochs) {
    obj.begin_epoch(t);
    const VectorXd g = obj.gradient(x);
    ++gr;
    x = cfg.optimizer == OptimizerKind::Adam ? adam_step(adam, x, g) : gd_step(x, g, cfg.lr);
    loss = obj.value(x);
    ++fw;
    ++t;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    out.rows.push_back(TraceRow{t, loss, 0.0, fw, gr, cfg.wall_time ? ms : 0});
  }
  out.final_loss = loss;
  out.reached_tol = loss <= cfg.hp.eps_tol;
  out.forward_evals = fw;
  out.grad_evals = gr;
  out.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  if (prob.net) out.train_accuracy = nn::accuracy(*prob.net, x, *prob.dataset);
  return out;
}

/// bench subcommand: run, persist the trace, print a summary.
/// Exit codes: 0 tolerance reached, 2 budget exhausted, 1 error.
inline int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const BenchOutcome res = run_bench(cfg);
    if (!cfg.out_path.empty()) write_trace_csv(cfg.out_path, res.rows);
    out << "optimizer=" << to_string(cfg.optimizer) << " objective=" << cfg.objective;
    if (!cfg.is_tinynet()) out << " dim=" << cfg.dim;
    out << " seed=" << cfg.hp.seed << " x0=" << res.x0_policy << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", res.final_loss);
    out << "final_loss=" << buf << " epochs=" << res.rows.size()
        << " forward_evals=" << res.forward_evals << " grad_evals=" << res.grad_evals
        << " wall_ms=" << res.wall_ms;
    if (res.train_accuracy) out << " train_accuracy=" << *res.train_accuracy;
    out << "\n";
    return res.reached_tol ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

struct GoldenResult {
  bool pass = false;
  std::vector<std::string> failures;
  VectorXd b;
  double alpha = 0.0;
  double xhat_max_abs = 0.0;
  double final_max_abs = 0.0;
  std::int64_t wall_ms = 0;
};

/// Reference walkthrough: one hand-unrolled iteration on the 5-D sphere from
/// the all-ones anchor with the default diffusion. Checks the gain diagonal,
/// the accepted step size, the updated ensemble and the selected anchor.
inline GoldenResult golden_check(const HyperParams& hp) {
  const auto start = std::chrono::steady_clock::now();
  GoldenResult res;
  const int n = 5;
  Benchmark sphere(BenchmarkId::Sphere, n);
  const auto value = [&](const VectorXd& v) { return sphere.value(v); };

  SplitMix64 rng(derive_seed(hp.seed, 2));
  const MatrixXd x = generate_ensemble(VectorXd::Ones(n), DiffusionDiag::uniform(n, 0.1),
                                       hp.particles, rng);
  MatrixXd g(n, hp.particles);
  VectorXd cost(hp.particles);
  for (int j = 0; j < hp.particles; ++j) {
    cost[j] = sphere.value(x.col(j));
    g.col(j) = sphere.gradient(x.col(j));
  }
  const SortedEnsemble sorted = sort_by_cost(x, g, cost);
  const DiagonalGain gain = diagonal_gain(sorted.x, sorted.g, hp.gamma);
  const MatrixXd delta = compute_increment(MatrixXd::Zero(n, hp.particles), gain.b_tilde,
                                           sorted.g, hp.theta);
  const ArmijoResult ls =
      armijo_search(sorted.x.col(0), sorted.g.col(0), delta.col(0), sorted.cost[0], value,
                    hp.c_alpha, hp.delta_min, hp.alpha_fallback, hp.alpha_cap);
  const MatrixXd xhat = update_ensemble(sorted.x, delta, ls.alpha);
  const Selection sel = retain_best_and_select(xhat, sorted.x.col(0), value, sorted.cost[0]);

  res.b = gain.b;
  res.alpha = ls.alpha;
  res.xhat_max_abs = xhat.cwiseAbs().maxCoeff();
  res.final_max_abs = sel.best.cwiseAbs().maxCoeff();

  if ((res.b.array() - 0.5).abs().maxCoeff() > 1e-9)
    res.failures.push_back("gain diagonal B is not 0.5 (max deviation " +
                           std::to_string((res.b.array() - 0.5).abs().maxCoeff()) + ")");
  if (res.alpha != 1.0)
    res.failures.push_back("line search returned " + std::to_string(res.alpha) + ", expected 1.0");
  if (res.xhat_max_abs > 1e-12)
    res.failures.push_back("updated ensemble is not the zero matrix (max |entry| " +
                           std::to_string(res.xhat_max_abs) + ")");
  if (res.final_max_abs > 1e-12)
    res.failures.push_back("selected anchor is not the origin (max |entry| " +
                           std::to_string(res.final_max_abs) + ")");
  res.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  if (res.wall_ms >= 1000)
    res.failures.push_back("walkthrough took " + std::to_string(res.wall_ms) + " ms, budget 1000");
  res.pass = res.failures.empty();
  return res;
}

/// golden subcommand. Exit 0 iff every walkthrough quantity matches.
inline int cmd_golden(const HyperParams& hp, std::ostream& out, std::ostream& err) {
  try {
    const GoldenResult res = golden_check(hp);
    if (res.pass) {
      out << "B=[0.5 ×5] alpha=1.0 final=0\n";
      return 0;
    }
    for (const auto& f : res.failures) err << "golden check failed: " << f << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

/// compare subcommand: runs each config sequentially, prints an aligned
/// table, optionally writes one merged CSV (optimizer label prepended).
inline int cmd_compare(const std::vector<RunConfig>& configs, const std::string& merged_out,
                       std::ostream& out, std::ostream& err) {
  try {
    if (configs.size() < 2)
      throw std::invalid_argument("compare needs at least 2 configurations");
    for (size_t i = 1; i < configs.size(); ++i) {
      if (configs[i].objective != configs[0].objective)
        throw std::invalid_argument("compare configurations must share the objective");
      if (!configs[i].is_tinynet() && configs[i].dim != configs[0].dim)
        throw std::invalid_argument("compare configurations must share dim");
    }

    std::vector<std::string> labels;
    for (size_t i = 0; i < configs.size(); ++i) {
      std::string label = to_string(configs[i].optimizer);
      int dup = 0;
      for (size_t k = 0; k < i; ++k)
        if (to_string(configs[k].optimizer) == to_string(configs[i].optimizer)) ++dup;
      if (dup > 0) label += "#" + std::to_string(dup + 1);
      labels.push_back(label);
    }

    std::vector<BenchOutcome> results;
    results.reserve(configs.size());
    for (const auto& cfg : configs) results.push_back(run_bench(cfg));

    out << std::left << std::setw(10) << "optimizer" << std::right << std::setw(14)
        << "final_loss" << std::setw(9) << "epochs" << std::setw(15) << "forward_evals"
        << std::setw(12) << "grad_evals" << std::setw(10) << "wall_ms" << "\n";
    for (size_t i = 0; i < results.size(); ++i) {
      char loss[32];
      std::snprintf(loss, sizeof loss, "%.6g", results[i].final_loss);
      out << std::left << std::setw(10) << labels[i] << std::right << std::setw(14) << loss
          << std::setw(9) << results[i].rows.size() << std::setw(15) << results[i].forward_evals
          << std::setw(12) << results[i].grad_evals << std::setw(10) << results[i].wall_ms
          << "\n";
    }

    if (!merged_out.empty()) {
      std::ofstream f(merged_out, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot open " + merged_out);
      f << "optimizer," << kTraceHeader << "\n";
      for (size_t i = 0; i < results.size(); ++i)
        for (const auto& row : results[i].rows)
          f << labels[i] << "," << format_trace_row(row) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace finder::harness
