#include "oeduu/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace oeduu;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericalError = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  std::string mode = "all";
};

ExperimentConfig load(const CommonArgs& args) {
  ExperimentConfig config = args.config_path.empty()
                                ? ExperimentConfig{}
                                : load_config_file(args.config_path);
  if (args.seed_set) config.run.master_seed = args.seed;
  if (args.workers > 0) config.run.workers = args.workers;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_mode = false) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--workers", args.workers, "worker thread count");
  if (with_mode) {
    cmd->add_option("--mode", args.mode, "oeduu | deterministic | all")
        ->check(CLI::IsMember({"oeduu", "deterministic", "all"}));
  }
}

int run_build_rom(const CommonArgs& args) {
  const ExperimentConfig config = load(args);
  const int workers = resolve_workers(config, 0);
  RomBundle bundle = build_rom(config, "saa", config.reduction.mu,
                               config.saa.n_samples, workers);
  const std::string manifest = save_rom(bundle, args.out_dir + "/rom");
  std::printf("rom: %zu samples, clusters %d, basis sizes [",
              bundle.models.size(), bundle.clustering.n_clusters);
  const auto sizes = bundle.basis_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    std::printf("%s%d", i ? ", " : "", sizes[i]);
  }
  std::printf("]\nwrote %s\n", manifest.c_str());
  return 0;
}

int run_optimize(const CommonArgs& args) {
  RomBundle bundle = load_rom(args.out_dir + "/rom");
  if (!args.config_path.empty()) {
    // optimization knobs may change between runs of the same archive;
    // the ROM-defining blocks must not
    const ExperimentConfig fresh = load(args);
    if (!rom_compatible(bundle.config, fresh)) {
      throw ConfigError(
          "config does not match the archived ROM (grid/prior/darcy/"
          "transport/sensors/reduction must agree); rebuild the ROM");
    }
    bundle.config = fresh;
  }
  if (args.workers > 0) bundle.config.run.workers = args.workers;
  const int workers = resolve_workers(bundle.config, 0);

  const std::vector<double> gammas =
      resolve_gammas(bundle.config, bundle, workers);
  const auto before = counters::snapshot();
  const auto designs = optimize_designs(
      bundle.config, bundle, args.mode != "deterministic", args.mode != "oeduu",
      gammas, workers);
  const auto after = counters::snapshot();
  write_designs_csv(args.out_dir + "/designs.csv", designs);
  write_stage_log(args.out_dir + "/stage_log.jsonl", designs);
  std::printf(
      "optimized %zu designs over %zu gammas; PDE solves during "
      "optimization: %llu\n",
      designs.size(), gammas.size(),
      static_cast<unsigned long long>(after.total() - before.total()));
  return 0;
}

int run_evaluate(const CommonArgs& args) {
  const ExperimentConfig config = load(args);
  const int workers = resolve_workers(config, 0);
  const auto designs = read_designs_csv(args.out_dir + "/designs.csv");
  RomBundle eval_bundle = build_rom(config, "eval", config.reduction.mu_eval,
                                    config.saa.n_eval, workers,
                                    /*keep_operators=*/false);
  const auto rows = evaluate_designs(eval_bundle, designs, workers);
  const auto comparison = compare_budgets(rows);
  write_evaluation_csv(args.out_dir + "/evaluation.csv", rows);
  write_comparison_csv(args.out_dir + "/comparison.csv", comparison);
  int wins = 0;
  for (const auto& c : comparison) {
    if (c.oeduu_mean <= c.deterministic_median) ++wins;
  }
  std::printf(
      "evaluated %zu designs on %d held-out samples; "
      "oeduu wins %d/%zu compared budgets\n",
      rows.size(), config.saa.n_eval, wins, comparison.size());
  return 0;
}

int run_validate(const CommonArgs& args) {
  const ExperimentConfig config = load(args);
  const int workers = resolve_workers(config, 0);
  RomBundle bundle = load_rom(args.out_dir + "/rom");
  const auto designs = read_designs_csv(args.out_dir + "/designs.csv");
  const auto rows = validate_designs(config, bundle, designs, workers);
  write_validation_csv(args.out_dir + "/validation.csv", rows);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.rel_gap);
  std::printf(
      "validated %zu designs on %d exact samples; worst relative "
      "objective gap %.3e\n",
      rows.size(), config.saa.n_validate, worst);
  return 0;
}

int run_everything(const CommonArgs& args) {
  const ExperimentConfig config = load(args);
  const RunReport report = run_all(config, args.out_dir);
  std::printf("build %.1fs, optimize %.1fs, evaluate %.1fs\n",
              report.seconds_build, report.seconds_optimize,
              report.seconds_evaluate);
  std::printf("zero PDE solves in optimization: %s\n",
              report.zero_pde_in_optimization ? "yes" : "NO");
  std::printf("oeduu wins %.0f%% of %zu compared budgets, mean advantage %g\n",
              100.0 * report.win_fraction, report.comparison.size(),
              report.mean_advantage);
  std::printf("outputs in %s\n", args.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"A-optimal sensor placement under model uncertainty"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* build = app.add_subcommand(
      "build-rom", "sample the uncertainty and build reduced models");
  add_common(build, args);
  CLI::App* optimize = app.add_subcommand(
      "optimize", "run the sparsifying design optimization on a ROM");
  add_common(optimize, args, /*with_mode=*/true);
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "score designs on held-out uncertainty samples");
  add_common(evaluate, args);
  CLI::App* validate = app.add_subcommand(
      "validate", "re-evaluate designs with exact PDE operators");
  add_common(validate, args);
  CLI::App* all = app.add_subcommand("run-all", "build, optimize, evaluate");
  add_common(all, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) return run_build_rom(args);
    if (optimize->parsed()) return run_optimize(args);
    if (evaluate->parsed()) return run_evaluate(args);
    if (validate->parsed()) return run_validate(args);
    if (all->parsed()) return run_everything(args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumericalError;
  }
  return 0;
}
