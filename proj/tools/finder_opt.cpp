// Command-line experiment runner: bench executes one optimizer/objective
// pair and persists a trace CSV, golden replays the reference walkthrough,
// compare runs several configurations head to head.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "finder/harness.hpp"

namespace {

using finder::harness::KeyValues;

void append_set_pairs(const std::vector<std::string>& sets, KeyValues& kv) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
}

struct CommonFlags {
  std::string optimizer, objective, config_path, out_path;
  long dim = 0, epochs = 0;
  double eps_tol = 0.0;
  long long seed = 0;
  bool wall_time = false;
  std::vector<std::string> sets;

  CLI::Option* opt_optimizer = nullptr;
  CLI::Option* opt_objective = nullptr;
  CLI::Option* opt_dim = nullptr;
  CLI::Option* opt_epochs = nullptr;
  CLI::Option* opt_eps = nullptr;
  CLI::Option* opt_seed = nullptr;
  CLI::Option* opt_out = nullptr;
  CLI::Option* opt_wall = nullptr;

  void attach(CLI::App* cmd, bool with_config) {
    opt_optimizer = cmd->add_option("--optimizer", optimizer, "finder|adam|gd");
    opt_objective = cmd->add_option("--objective", objective,
                                    "sphere|griewank|ackley|rastrigin|rosenbrock|elliptic|tinynet");
    opt_dim = cmd->add_option("--dim", dim, "problem dimension");
    opt_epochs = cmd->add_option("--epochs", epochs, "epoch budget");
    opt_eps = cmd->add_option("--eps-tol", eps_tol, "target loss");
    opt_seed = cmd->add_option("--seed", seed, "run seed");
    opt_out = cmd->add_option("--out", out_path, "trace CSV path");
    opt_wall = cmd->add_flag("--wall-time", wall_time,
                             "record measured wall_ms in the trace CSV (traces are no longer "
                             "reproducible byte-for-byte)");
    if (with_config)
      cmd->add_option("--config", config_path, "flat JSON config file");
    cmd->add_option("--set", sets, "hyperparameter override key=value")->take_all();
  }

  // Flag assignments in override order: config file, named flags, --set.
  KeyValues collect() const {
    KeyValues kv;
    if (!config_path.empty()) kv = finder::harness::load_config_file(config_path);
    if (opt_optimizer->count()) kv.emplace_back("optimizer", optimizer);
    if (opt_objective->count()) kv.emplace_back("objective", objective);
    if (opt_dim->count()) kv.emplace_back("dim", std::to_string(dim));
    if (opt_epochs->count()) kv.emplace_back("epochs", std::to_string(epochs));
    if (opt_eps->count()) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "%.17g", eps_tol);
      kv.emplace_back("eps_tol", buf);
    }
    if (opt_seed->count()) kv.emplace_back("seed", std::to_string(seed));
    if (opt_out->count()) kv.emplace_back("out", out_path);
    if (opt_wall->count()) kv.emplace_back("wall_time", "true");
    append_set_pairs(sets, kv);
    finder::harness::apply_env_seed(kv);
    return kv;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finder-opt: stochastic quasi-Newton optimization harness"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "run one optimizer on one objective");
  CommonFlags bench_flags;
  bench_flags.attach(bench, true);

  auto* golden = app.add_subcommand("golden", "replay the 5-D sphere reference walkthrough");
  std::vector<std::string> golden_sets;
  long long golden_seed = 0;
  auto* golden_seed_opt = golden->add_option("--seed", golden_seed, "walkthrough seed");
  golden->add_option("--set", golden_sets, "hyperparameter override key=value")->take_all();

  auto* compare = app.add_subcommand("compare", "run several configurations head to head");
  CommonFlags compare_flags;
  std::vector<std::string> compare_configs;
  std::string compare_optimizers;
  compare->add_option("--config", compare_configs, "config file (repeat per run)")->take_all();
  compare->add_option("--optimizers", compare_optimizers,
                      "comma list building one run per optimizer from the shared flags");
  compare_flags.opt_objective = compare->add_option("--objective", compare_flags.objective, "shared objective");
  compare_flags.opt_dim = compare->add_option("--dim", compare_flags.dim, "shared dimension");
  compare_flags.opt_epochs = compare->add_option("--epochs", compare_flags.epochs, "shared budget");
  compare_flags.opt_eps = compare->add_option("--eps-tol", compare_flags.eps_tol, "shared target loss");
  compare_flags.opt_seed = compare->add_option("--seed", compare_flags.seed, "shared seed");
  compare_flags.opt_wall = compare->add_flag("--wall-time", compare_flags.wall_time, "record wall_ms");
  compare->add_option("--set", compare_flags.sets, "shared override key=value")->take_all();
  std::string compare_out;
  compare->add_option("--out", compare_out, "merged CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      const auto cfg = finder::harness::make_config(bench_flags.collect());
      return finder::harness::cmd_bench(cfg, std::cout, std::cerr);
    }

    if (*golden) {
      KeyValues kv;
      if (golden_seed_opt->count()) kv.emplace_back("seed", std::to_string(golden_seed));
      append_set_pairs(golden_sets, kv);
      finder::harness::apply_env_seed(kv);
      const auto cfg = finder::harness::make_config(kv);
      return finder::harness::cmd_golden(cfg.hp, std::cout, std::cerr);
    }

    if (*compare) {
      KeyValues shared;
      if (compare_flags.opt_objective->count())
        shared.emplace_back("objective", compare_flags.objective);
      if (compare_flags.opt_dim->count())
        shared.emplace_back("dim", std::to_string(compare_flags.dim));
      if (compare_flags.opt_epochs->count())
        shared.emplace_back("epochs", std::to_string(compare_flags.epochs));
      if (compare_flags.opt_eps->count()) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.17g", compare_flags.eps_tol);
        shared.emplace_back("eps_tol", buf);
      }
      if (compare_flags.opt_seed->count())
        shared.emplace_back("seed", std::to_string(compare_flags.seed));
      if (compare_flags.opt_wall->count()) shared.emplace_back("wall_time", "true");
      append_set_pairs(compare_flags.sets, shared);
      finder::harness::apply_env_seed(shared);

      std::vector<finder::harness::RunConfig> configs;
      for (const auto& path : compare_configs) {
        KeyValues kv = finder::harness::load_config_file(path);
        kv.insert(kv.end(), shared.begin(), shared.end());
        configs.push_back(finder::harness::make_config(kv));
      }
      if (!compare_optimizers.empty()) {
        std::istringstream ss(compare_optimizers);
        std::string name;
        while (std::getline(ss, name, ',')) {
          KeyValues kv = shared;
          kv.emplace_back("optimizer", name);
          configs.push_back(finder::harness::make_config(kv));
        }
      }
      return finder::harness::cmd_compare(configs, compare_out, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
