#pragma once

#include "oeduu/archive.hpp"
#include "oeduu/config.hpp"
#include "oeduu/counters.hpp"
#include "oeduu/objective.hpp"
#include "oeduu/sparsify.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace oeduu {

/// One optimized design. family is the SAA sample index a deterministic
/// design was fitted to, or -1 for the uncertainty-aware mode.
struct DesignRecord {
  std::string mode;  // "oeduu" | "deterministic"
  double gamma = 0.0;
  int family = -1;
  Eigen::VectorXd weights;  // binary
  int nnz = 0;
  double objective = 0.0;  ///< surrogate SAA objective at the design
  bool converged = false;
  int stages = 0;
  std::vector<StageRecord> history;
};

/// Held-out performance of one design: moments of -tr K over the
/// evaluation samples.
struct EvaluationRow {
  std::string mode;
  double gamma = 0.0;
  int family = -1;
  int nnz = 0;
  double mean = 0.0;
  double p2 = 0.0, p25 = 0.0, p75 = 0.0, p98 = 0.0;
};

/// Per-budget comparison of the uncertainty-aware design against the
/// median deterministic design of equal sensor count.
struct BudgetComparison {
  int budget = 0;
  double oeduu_mean = 0.0;
  double deterministic_median = 0.0;
  int deterministic_count = 0;
};

struct ValidationRow {
  std::string mode;
  double gamma = 0.0;
  int family = -1;
  int nnz = 0;
  double surrogate_objective = 0.0;
  double exact_objective = 0.0;
  double rel_gap = 0.0;
};

struct RunReport {
  std::vector<double> gammas;
  std::vector<DesignRecord> designs;
  std::vector<EvaluationRow> evaluation;
  std::vector<BudgetComparison> comparison;
  double win_fraction = 0.0;    ///< budgets where oeduu <= det median
  double mean_advantage = 0.0;  ///< avg det median - oeduu mean
  counters::Snapshot before_optimize, after_optimize;
  bool zero_pde_in_optimization = false;
  std::vector<int> basis_sizes;
  double seconds_build = 0.0, seconds_optimize = 0.0, seconds_evaluate = 0.0;
};

/// Samples the uncertainty, builds forward operators, reduces them and
/// precomputes Gramians. phase_tag selects the seed stream ("saa",
/// "eval"); mu the truncation tolerance.
RomBundle build_rom(const ExperimentConfig& config, const std::string& phase_tag,
                    double mu, int n_samples, int workers,
                    bool keep_operators = true);

/// The observation-space SAA problem over a subset of the bundle's
/// samples (empty subset = all).
SaaProblem make_saa_problem(const RomBundle& bundle,
                            const std::vector<int>& subset = {});

/// The gamma sweep: explicit values from the config, or log-spaced
/// defaults scaled by the per-sensor objective magnitude so the sensor
/// counts span the sparse range.
std::vector<double> resolve_gammas(const ExperimentConfig& config,
                                   const RomBundle& bundle, int workers);

/// Continuation for every gamma; deterministic mode repeats the sweep
/// for each of the first n_deterministic single-sample problems.
std::vector<DesignRecord> optimize_designs(const ExperimentConfig& config,
                                           const RomBundle& bundle,
                                           bool run_oeduu,
                                           bool run_deterministic,
                                           const std::vector<double>& gammas,
                                           int workers);

/// -tr K statistics of every design over the evaluation bundle.
std::vector<EvaluationRow> evaluate_designs(const RomBundle& eval_bundle,
                                            const std::vector<DesignRecord>& designs,
                                            int workers);

std::vector<BudgetComparison> compare_budgets(
    const std::vector<EvaluationRow>& rows);

/// Exact-operator re-evaluation of designs on n_validate samples.
std::vector<ValidationRow> validate_designs(
    const ExperimentConfig& config, const RomBundle& bundle,
    const std::vector<DesignRecord>& designs, int workers);

/// Full pipeline: build -> optimize -> evaluate, writing every artifact
/// under out_dir (rom/, designs.csv, evaluation.csv, comparison.csv,
/// stage_log.jsonl, manifest.json, timings.json).
RunReport run_all(const ExperimentConfig& config, const std::string& out_dir);

/// Linear-interpolation percentile of a sample (p in [0, 100]).
double percentile(std::vector<double> values, double p);

void write_designs_csv(const std::string& path,
                       const std::vector<DesignRecord>& designs);
std::vector<DesignRecord> read_designs_csv(const std::string& path);
void write_evaluation_csv(const std::string& path,
                          const std::vector<EvaluationRow>& rows);
void write_comparison_csv(const std::string& path,
                          const std::vector<BudgetComparison>& rows);
void write_stage_log(const std::string& path,
                     const std::vector<DesignRecord>& designs);
void write_validation_csv(const std::string& path,
                          const std::vector<ValidationRow>& rows);

int resolve_workers(const ExperimentConfig& config, int override_workers);

/// True when the blocks that define a ROM (grid, prior, darcy,
/// transport, sensors, reduction) agree, so designs optimized under
/// `candidate` can legitimately reuse an archive built under `archived`.
bool rom_compatible(const ExperimentConfig& archived,
                    const ExperimentConfig& candidate);

}  // namespace oeduu
