#pragma once

#include "oeduu/prior.hpp"
#include "oeduu/reduction.hpp"
#include "oeduu/transport.hpp"

#include <Eigen/Core>

#include <vector>

namespace oeduu {

/// Uncorrelated Gaussian observation noise of constant standard
/// deviation; only 1/sigma^2 enters the formulas.
struct NoiseModel {
  double sigma = 0.01;
};

/// Sample-average A-optimality problem in observation space. Everything
/// the objective and gradient need is the per-sample Gramian pair, so
/// evaluation is pure dense algebra; no PDE solves happen here.
struct SaaProblem {
  int n_sensors = 0;  ///< s
  int n_times = 0;    ///< r
  NoiseModel noise;
  std::vector<ObservationGramians> grams;

  int obs_dim() const { return n_sensors * n_times; }
  int size() const { return static_cast<int>(grams.size()); }
  void validate() const;
};

/// Expands sensor weights to the d = s*r diagonal in time-major layout:
/// entry j*s + l carries w_l.
Eigen::VectorXd expand_design(const Eigen::VectorXd& w, int n_times);

/// Evaluation route. Auto prefers the low-rank factors when present;
/// Dense always runs the d x d LU reference path.
enum class EvalRoute { Auto, Dense, LowRank };

/// S_i(w) = I + sigma^{-2} W G_i; invertible for all box designs.
Eigen::MatrixXd s_matrix(const SaaProblem& p, int i, const Eigen::VectorXd& w);

/// tr[sigma^{-2} S_i(w)^{-1} W H_i]: the trace reduction one sample
/// contributes. Dense route: one LU of S_i and d triangular solves.
double trace_update(const SaaProblem& p, int i, const Eigen::VectorXd& w,
                    EvalRoute route = EvalRoute::Auto);

/// The SAA objective: minus the averaged trace updates.
double objective_value(const SaaProblem& p, const Eigen::VectorXd& w,
                       EvalRoute route = EvalRoute::Auto, int workers = 1);

/// Analytic gradient; component k sums the r time-block diagonal
/// entries of S_i^{-1} E_k A_i H_i with A_i = I - G_i S_i^{-1} W^sigma,
/// reusing one factorization of S_i for all components.
Eigen::VectorXd objective_gradient(const SaaProblem& p,
                                   const Eigen::VectorXd& w,
                                   EvalRoute route = EvalRoute::Auto,
                                   int workers = 1);

/// Fused evaluation, cheaper than calling both separately.
double objective_value_and_gradient(const SaaProblem& p,
                                    const Eigen::VectorXd& w,
                                    Eigen::VectorXd& grad,
                                    EvalRoute route = EvalRoute::Auto,
                                    int workers = 1);

/// tr[cov] by n prior solve pairs (validation/reporting only).
double prior_trace(const PriorModel& prior);

/// MAP point through the observation-space identity:
/// mean + sigma^{-2} cov F^T S^{-1} W (data - F mean). Needs the exact
/// operator; everything reduces to prior solves and F applications.
Field posterior_map(const ForwardOperator& op, const PriorModel& prior,
                    const NoiseModel& noise, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& data);

/// diag of the posterior covariance (guarded to n <= 5000): prior
/// variances minus the rowwise contraction of the update term.
Field pointwise_variance(const ForwardOperator& op, const PriorModel& prior,
                         const NoiseModel& noise, const Eigen::VectorXd& w);

/// Exact observation Gramians of a forward operator (validation mode):
/// d adjoint applications, 2d prior solves and d forward applications.
ObservationGramians exact_gramians(const ForwardOperator& op,
                                   const PriorModel& prior);

}  // namespace oeduu
