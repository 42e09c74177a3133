// kpsim experiment runner.
//
// Subcommands: run, sweep-k, route-compare, validate.
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "kpsim/experiment.hpp"

namespace {

kpsim::ExperimentConfig load_config(const std::string& config_path,
                                    const std::optional<std::string>& out_dir,
                                    const std::optional<std::uint64_t>& seed) {
  kpsim::ExperimentConfig config =
      config_path.empty() ? kpsim::ExperimentConfig::defaults()
                          : kpsim::ExperimentConfig::load(config_path);
  if (out_dir) config.out_dir = *out_dir;
  if (seed) config.seed = *seed;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale k-step training simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--config", config_path, "experiment config (json)");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--seed", seed, "seed override");
  app.add_flag("--quiet", quiet, "suppress progress output");

  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  auto* sweep_cmd =
      app.add_subcommand("sweep-k", "run the experiment for every sweep k");
  auto* route_cmd = app.add_subcommand(
      "route-compare", "planned vs host-routed transfer times");
  std::uint64_t route_bytes = 1 << 20;
  route_cmd->add_option("--bytes", route_bytes, "bytes per gpu pair");
  auto* validate_cmd =
      app.add_subcommand("validate", "check the config without running");

  CLI11_PARSE(app, argc, argv);

  std::ostream* log = quiet ? nullptr : &std::cerr;
  try {
    const kpsim::ExperimentConfig config =
        load_config(config_path, out_dir, seed);

    if (validate_cmd->parsed()) {
      const auto diags = config.validate();
      for (const auto& d : diags) std::cout << d << "\n";
      if (!diags.empty()) return 1;
      if (!quiet) std::cerr << "config ok\n";
      return 0;
    }
    const auto diags = config.validate();
    if (!diags.empty()) {
      for (const auto& d : diags) std::cerr << "config error: " << d << "\n";
      return 1;
    }

    if (run_cmd->parsed()) {
      const auto result = kpsim::run_experiment(config, log);
      std::cout << result.out_dir << "\n";
    } else if (sweep_cmd->parsed()) {
      const auto entries = kpsim::sweep_k(config, log);
      for (const auto& e : entries)
        std::cout << "k=" << e.k
                  << " total_ratio_vs_k1=" << e.total_ratio_vs_k1 << "\n";
    } else if (route_cmd->parsed()) {
      const double ratio = kpsim::route_compare(config, route_bytes, log);
      std::cout << ratio << "\n";
    }
    return 0;
  } catch (const kpsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
