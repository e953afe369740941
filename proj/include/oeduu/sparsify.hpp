#pragma once

#include "oeduu/objective.hpp"

#include <Eigen/Core>

#include <functional>
#include <utility>
#include <vector>

namespace oeduu {

/// Penalty and continuation knobs. The stage-i smoothing width is
/// eps(i) = eps_base^i, decreasing to zero; stage 0 is the alpha-scaled
/// l1 penalty that seeds the continuation.
struct PenaltyConfig {
  double gamma = 0.0;       ///< penalty weight, >= 0
  double alpha = 0.1;       ///< design rescaling inside the penalty
  double eps_base = 2.0 / 3.0;
  double binary_tol = 1e-3; ///< closeness to {0,1} that ends continuation
  int max_stages = 40;

  double eps(int stage) const;
  void validate() const;
};

/// The smoothed counting penalty: linear ramp below eps/(2 alpha), a C1
/// Hermite cubic up to 2 eps/alpha, and exactly one beyond. Returns
/// (value, derivative in w). Nondecreasing, in [0, 1], and equal to the
/// support indicator of w once eps <= alpha*w/2.
std::pair<double, double> f_eps(double w, double eps, double alpha);

/// Sum of f_eps over the design (stage >= 1), or the alpha-scaled l1
/// penalty at stage 0. Returns value and gradient.
std::pair<double, Eigen::VectorXd> penalty(const Eigen::VectorXd& w,
                                           const PenaltyConfig& config,
                                           int stage);

/// Objective callback for the box solver: fills the gradient, returns
/// the value.
using BoxObjective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct InnerSolveOptions {
  int max_iterations = 500;
  double pg_tolerance = 1e-6;  ///< sup-norm of the projected gradient
  int memory = 10;             ///< L-BFGS history length
};

struct InnerResult {
  Eigen::VectorXd w;
  double value = 0.0;
  double pg_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool line_search_failed = false;
};

/// Projected L-BFGS over [0,1]^s: gradient-projection steps with
/// limited-memory curvature restricted to the free variables, Armijo
/// backtracking along the projected path. Iterates never leave the box.
InnerResult minimize_box(const BoxObjective& objective,
                         const Eigen::VectorXd& w0,
                         const InnerSolveOptions& options);

/// One continuation stage: minimizes objective + gamma * penalty(stage).
InnerResult solve_inner(const SaaProblem& problem, const Eigen::VectorXd& w0,
                        const PenaltyConfig& config, int stage,
                        const InnerSolveOptions& options, int workers = 1);

struct StageRecord {
  int stage = 0;
  double eps = 0.0;       ///< 0 marks the l1 stage
  double objective = 0.0; ///< SAA objective without the penalty
  double penalty_value = 0.0;
  int nnz = 0;            ///< weights above 1/2
  double pg_norm = 0.0;
  int iterations = 0;
};

struct ContinuationResult {
  Eigen::VectorXd w;            ///< exact {0,1} after final rounding
  Eigen::VectorXd l1_solution;  ///< the stage-0 (l1) minimizer, unrounded
  double objective = 0.0;       ///< SAA objective at the rounded design
  bool converged = false;
  int stages = 0;
  std::vector<StageRecord> history;
};

/// The l1-seeded continuation: stage 0 solves the l1-penalized problem
/// from w = 1/2, later stages shrink eps and warm start from the
/// previous solution until every weight sits within binary_tol of {0,1}
/// (or max_stages is hit, in which case the best iterate is rounded and
/// flagged). The returned design is exactly binary.
ContinuationResult continuation(const SaaProblem& problem,
                                const PenaltyConfig& config,
                                const InnerSolveOptions& options,
                                int workers = 1);

}  // namespace oeduu
