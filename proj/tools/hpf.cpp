// Command-line front end: train, eval, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "hpf/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace hpf;
using namespace hpf::harness;

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

int cmd_train(const std::string& config, const std::optional<std::uint64_t>& seed, const std::string& algo,
              const std::string& env, const std::optional<long>& steps, std::string out) {
  KeyValues kv = read_key_values(config);
  if (seed) kv["seed"] = std::to_string(*seed);
  if (!algo.empty()) kv["algo"] = algo;
  if (!env.empty()) kv["env"] = env;
  if (steps) kv["max_steps"] = std::to_string(*steps);
  const RunConfig cfg = apply_overrides(RunConfig{}, kv);
  if (out.empty()) out = fmt::format("runs/{}-{}-s{}", cfg.algo, cfg.env, cfg.seed);
  const auto rows = run_training(cfg, out, true);
  if (!rows.empty()) fmt::print("final test return median {:.3f}\n", rows.back().test.median);
  fmt::print("run written to {}\n", out);
  return 0;
}

int cmd_eval(const fs::path& checkpoint, int episodes) {
  Trainer trainer(load_config(checkpoint / "config.txt"));
  trainer.load(checkpoint);
  const ReturnStats s = trainer.evaluate(episodes);
  fmt::print("episodes {}\nmedian {:.3f}\nq25 {:.3f}\nq75 {:.3f}\n", s.returns.size(), s.median, s.q25, s.q75);
  for (float r : s.returns) fmt::print("{:.3f}\n", r);
  return 0;
}

int cmd_report(const fs::path& run) {
  const RunConfig cfg = load_config(run / "config.txt");
  fmt::print("run {}: algo={} env={} seed={} steps={}\n\n", run.string(), cfg.algo, cfg.env, cfg.seed, cfg.max_steps);
  if (cfg.env == "matrix") {
    Trainer trainer(cfg);
    trainer.load(run / "checkpoint");
    fmt::print("{}\n", format_tables(trainer.payoff_tables()));
  }
  const auto rows = read_csv(run / "metrics.csv");
  if (rows.size() < 2) throw std::runtime_error("metrics.csv has no evaluation rows");
  fmt::print("learning curve (test return median [q25, q75])\n");
  fmt::print("{:>10} {:>10} {:>24}  {}\n", "step", "train", "test", cfg.is_hpf() ? "P(alpha)" : "");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() < 13) throw std::runtime_error("metrics.csv: short row");
    fmt::print("{:>10} {:>10.3f} {:>10.3f} [{:.3f}, {:.3f}]  {}\n", r[0], std::stod(r[2]), std::stod(r[3]), std::stod(r[4]),
               std::stod(r[5]), r[7]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous policy fusion for cooperative multi-agent RL"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train one run");
  std::string config, algo, env, out;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  train->add_option("--config", config, "Key = value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override seed");
  train->add_option("--algo", algo, "vdn, qmix, wqmix, qplex, hpf-wq or hpf-qv");
  train->add_option("--env", env, "matrix, pp or pp-small");
  train->add_option("--steps", steps, "Override max_steps");
  train->add_option("--out", out, "Output directory (default runs/<algo>-<env>-s<seed>)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint;
  int episodes = 16;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Summarise a run directory");
  std::string run;
  report->add_option("--run", run, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(config, seed, algo, env, steps, out);
    if (*eval) return cmd_eval(checkpoint, episodes);
    if (*report) return cmd_report(run);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
