#include "eafpca/parallel.hpp"
#include "eafpca/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace eafpca;

int main(int argc, char** argv) {
  CLI::App app{"Eigen-adjusted functional principal component analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> runs;
  std::optional<int> threads;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--runs", runs, "Monte Carlo runs (evaluate)");
  app.add_option("--threads", threads, "worker threads (0 = default)");
  app.add_option("--set", overrides, "override a configuration key (key=value)");

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const PipelineConfig&);
  };
  const Command commands[] = {
      {"simulate", "generate a simulated dataset and its truth", cmd_simulate},
      {"fit", "estimate mean, pooled covariance, eigenbasis and noise variance", cmd_fit},
      {"eigenmap", "estimate covariate-specific eigenvalues", cmd_eigenmap},
      {"cluster", "k-means clustering of an eigenvalue field", cmd_cluster},
      {"evaluate", "score estimates against simulation truth", cmd_evaluate},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg;
    if (!config_path.empty()) cfg = Config::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("cli.config", "--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (out) cfg.set("out", *out);
    if (runs) cfg.set("runs", std::to_string(*runs));
    if (threads) cfg.set("threads", std::to_string(*threads));
    const PipelineConfig pc = PipelineConfig::from(cfg);
    set_num_threads(pc.threads);
    for (const auto& c : commands)
      if (app.got_subcommand(c.name)) return c.run(pc);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
