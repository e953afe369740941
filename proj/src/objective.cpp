#include "oeduu/objective.hpp"

#include "oeduu/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace oeduu {

void SaaProblem::validate() const {
  if (n_sensors < 1 || n_times < 1) {
    throw std::invalid_argument("SaaProblem: bad dimensions");
  }
  if (!(noise.sigma > 0.0)) {
    throw std::invalid_argument("SaaProblem: sigma must be positive");
  }
  if (grams.empty()) throw std::invalid_argument("SaaProblem: no samples");
  for (const auto& g : grams) {
    if (g.first.rows() != obs_dim()) {
      throw std::invalid_argument("SaaProblem: Gramian dimension mismatch");
    }
  }
}

Eigen::VectorXd expand_design(const Eigen::VectorXd& w, int n_times) {
  Eigen::VectorXd full(w.size() * n_times);
  for (int j = 0; j < n_times; ++j) full.segment(j * w.size(), w.size()) = w;
  return full;
}

namespace {

void check_design(const SaaProblem& p, const Eigen::VectorXd& w) {
  if (w.size() != p.n_sensors) {
    throw std::invalid_argument("design dimension mismatch");
  }
}

bool use_lowrank(const SaaProblem& p, int i, EvalRoute route) {
  const auto& g = p.grams[i];
  if (route == EvalRoute::Dense) return false;
  if (!g.has_lowrank) {
    if (route == EvalRoute::LowRank) {
      throw std::invalid_argument("low-rank route requested without factors");
    }
    return false;
  }
  return true;
}

/// Shared per-sample work of the low-rank route, built on the Woodbury
/// form S^{-1} = I - sigma^{-2} W Q C^{-1} Gc Q^T with C = I + sigma^{-2} Gc Mw.
struct LowRankWork {
  const Eigen::MatrixXd* q = nullptr;
  const Eigen::MatrixXd* core_g = nullptr;
  const Eigen::MatrixXd* core_h = nullptr;
  Eigen::MatrixXd mw;        // Q^T W Q
  Eigen::PartialPivLU<Eigen::MatrixXd> c_lu;
  double inv_s2 = 0.0;

  LowRankWork(const ObservationGramians& g, const Eigen::VectorXd& w_full,
              double sigma) {
    q = g.factor.get();
    core_g = &g.core_first;
    core_h = &g.core_second;
    inv_s2 = 1.0 / (sigma * sigma);
    mw = q->transpose() * w_full.asDiagonal() * (*q);
    const int k = static_cast<int>(q->cols());
    Eigen::MatrixXd c =
        Eigen::MatrixXd::Identity(k, k) + inv_s2 * (*core_g) * mw;
    c_lu.compute(c);
  }

  double trace_update() const {
    // sigma^{-2} tr[(Mw - sigma^{-2} Mw C^{-1} Gc Mw) Hc]
    const Eigen::MatrixXd inner = mw - inv_s2 * mw * c_lu.solve((*core_g) * mw);
    return inv_s2 * (inner * (*core_h)).trace();
  }

  /// Diagonal of A H S^{-1} = Q [(I - s^{-2} Gc J Mw) Hc J] Q^T with
  /// J = I - sigma^{-2} Mw C^{-1} Gc (so Q^T S^{-1} = J Q^T).
  Eigen::VectorXd diag_update() const {
    const int k = static_cast<int>(q->cols());
    const Eigen::MatrixXd j =
        Eigen::MatrixXd::Identity(k, k) - inv_s2 * mw * c_lu.solve(*core_g);
    const Eigen::MatrixXd hj = (*core_h) * j;
    const Eigen::MatrixXd z = hj - inv_s2 * (*core_g) * (j * (mw * hj));
    return ((*q) * z).cwiseProduct(*q).rowwise().sum();
  }
};

/// Dense reference route: one LU with partial pivoting per sample.
struct DenseWork {
  const Eigen::MatrixXd* g = nullptr;
  const Eigen::MatrixXd* h = nullptr;
  Eigen::VectorXd w_full;
  Eigen::PartialPivLU<Eigen::MatrixXd> s_lu;
  double inv_s2 = 0.0;

  DenseWork(const ObservationGramians& grams, const Eigen::VectorXd& w_full_,
            double sigma)
      : g(&grams.first), h(&grams.second), w_full(w_full_) {
    inv_s2 = 1.0 / (sigma * sigma);
    const int d = static_cast<int>(g->rows());
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(d, d) +
                        inv_s2 * w_full.asDiagonal() * (*g);
    s_lu.compute(s);
  }

  double trace_update() const {
    return inv_s2 * s_lu.solve(w_full.asDiagonal() * (*h)).trace();
  }

  Eigen::VectorXd diag_update() const {
    const int d = static_cast<int>(g->rows());
    // A = I - G S^{-1} W^sigma, column scaling of the solve result.
    Eigen::MatrixXd sinv_w =
        s_lu.solve(Eigen::MatrixXd((inv_s2 * w_full).asDiagonal()));
    Eigen::MatrixXd a = -(*g) * sinv_w;
    a.diagonal().array() += 1.0;
    const Eigen::MatrixXd m = a * (*h);
    const Eigen::MatrixXd s_inv = s_lu.solve(Eigen::MatrixXd::Identity(d, d));
    return m.cwiseProduct(s_inv.transpose()).rowwise().sum();
  }
};

double sample_trace_update(const SaaProblem& p, int i,
                           const Eigen::VectorXd& w_full, EvalRoute route) {
  if (use_lowrank(p, i, route)) {
    return LowRankWork(p.grams[i], w_full, p.noise.sigma).trace_update();
  }
  return DenseWork(p.grams[i], w_full, p.noise.sigma).trace_update();
}

/// Gradient contribution of one sample: component l sums -sigma^{-2}
/// times the diagonal of A H S^{-1} over that sensor's r positions.
Eigen::VectorXd sample_gradient(const SaaProblem& p, int i,
                                const Eigen::VectorXd& w_full, EvalRoute route,
                                double* trace_out) {
  Eigen::VectorXd diag;
  double inv_s2 = 1.0 / (p.noise.sigma * p.noise.sigma);
  if (use_lowrank(p, i, route)) {
    LowRankWork work(p.grams[i], w_full, p.noise.sigma);
    if (trace_out) *trace_out = work.trace_update();
    diag = work.diag_update();
  } else {
    DenseWork work(p.grams[i], w_full, p.noise.sigma);
    if (trace_out) *trace_out = work.trace_update();
    diag = work.diag_update();
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.n_sensors);
  for (int j = 0; j < p.n_times; ++j) {
    grad -= inv_s2 * diag.segment(j * p.n_sensors, p.n_sensors);
  }
  return grad;
}

}  // namespace

Eigen::MatrixXd s_matrix(const SaaProblem& p, int i, const Eigen::VectorXd& w) {
  check_design(p, w);
  const Eigen::VectorXd w_full = expand_design(w, p.n_times);
  const double inv_s2 = 1.0 / (p.noise.sigma * p.noise.sigma);
  const int d = p.obs_dim();
  return Eigen::MatrixXd::Identity(d, d) +
         inv_s2 * w_full.asDiagonal() * p.grams[i].first;
}

double trace_update(const SaaProblem& p, int i, const Eigen::VectorXd& w,
                    EvalRoute route) {
  check_design(p, w);
  return sample_trace_update(p, i, expand_design(w, p.n_times), route);
}

double objective_value(const SaaProblem& p, const Eigen::VectorXd& w,
                       EvalRoute route, int workers) {
  check_design(p, w);
  const Eigen::VectorXd w_full = expand_design(w, p.n_times);
  std::vector<double> terms(p.size());
  parallel_for(p.size(), workers, [&](int i) {
    terms[i] = sample_trace_update(p, i, w_full, route);
  });
  double sum = 0.0;
  for (double t : terms) sum += t;  // index order keeps the value reproducible
  return -sum / p.size();
}

Eigen::VectorXd objective_gradient(const SaaProblem& p,
                                   const Eigen::VectorXd& w, EvalRoute route,
                                   int workers) {
  Eigen::VectorXd grad;
  objective_value_and_gradient(p, w, grad, route, workers);
  return grad;
}

double objective_value_and_gradient(const SaaProblem& p,
                                    const Eigen::VectorXd& w,
                                    Eigen::VectorXd& grad, EvalRoute route,
                                    int workers) {
  check_design(p, w);
  const Eigen::VectorXd w_full = expand_design(w, p.n_times);
  std::vector<double> traces(p.size());
  std::vector<Eigen::VectorXd> grads(p.size());
  parallel_for(p.size(), workers, [&](int i) {
    grads[i] = sample_gradient(p, i, w_full, route, &traces[i]);
  });
  double sum = 0.0;
  grad = Eigen::VectorXd::Zero(p.n_sensors);
  for (int i = 0; i < p.size(); ++i) {
    sum += traces[i];
    grad += grads[i];
  }
  grad /= p.size();
  return -sum / p.size();
}

double prior_trace(const PriorModel& prior) {
  const int n = prior.grid().num_nodes();
  double tr = 0.0;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    e[i] = 1.0;
    tr += prior.apply_cov(e)[i];
    e[i] = 0.0;
  }
  return tr;
}

ObservationGramians exact_gramians(const ForwardOperator& op,
                                   const PriorModel& prior) {
  const int d = op.obs_dim();
  Eigen::MatrixXd cov_ft(op.param_dim(), d);  // cov * F^T
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    e[j] = 1.0;
    cov_ft.col(j) = prior.apply_cov(op.apply_transpose(e));
    e[j] = 0.0;
  }
  Eigen::MatrixXd g(d, d);
  for (int j = 0; j < d; ++j) g.col(j) = op.apply(cov_ft.col(j));
  g = 0.5 * (g + g.transpose()).eval();
  // H = F cov^2 F^T = (cov F^T)^T (cov F^T) since cov is symmetric.
  Eigen::MatrixXd h = cov_ft.transpose() * cov_ft;
  h = 0.5 * (h + h.transpose()).eval();
  return ObservationGramians(std::move(g), std::move(h));
}

Field posterior_map(const ForwardOperator& op, const PriorModel& prior,
                    const NoiseModel& noise, const Eigen::VectorXd& w,
                    const Eigen::VectorXd& data) {
  if (w.size() != op.n_sensors()) {
    throw std::invalid_argument("posterior_map: design dimension mismatch");
  }
  if (data.size() != op.obs_dim()) {
    throw std::invalid_argument("posterior_map: data dimension mismatch");
  }
  const double inv_s2 = 1.0 / (noise.sigma * noise.sigma);
  const Eigen::VectorXd w_full = expand_design(w, op.config().n_obs_times());

  const ObservationGramians grams = exact_gramians(op, prior);
  const int d = op.obs_dim();
  const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(d, d) +
                            inv_s2 * w_full.asDiagonal() * grams.first;
  const Eigen::VectorXd misfit = data - op.apply(prior.mean());
  const Eigen::VectorXd t =
      Eigen::PartialPivLU<Eigen::MatrixXd>(s).solve(
          (w_full.array() * misfit.array()).matrix());
  return prior.mean() + inv_s2 * prior.apply_cov(op.apply_transpose(t));
}

Field pointwise_variance(const ForwardOperator& op, const PriorModel& prior,
                         const NoiseModel& noise, const Eigen::VectorXd& w) {
  const int n = op.param_dim();
  if (n > 5000) {
    throw std::length_error("pointwise_variance: guarded to n <= 5000");
  }
  if (w.size() != op.n_sensors()) {
    throw std::invalid_argument("pointwise_variance: design dimension mismatch");
  }
  const double inv_s2 = 1.0 / (noise.sigma * noise.sigma);
  const Eigen::VectorXd w_full = expand_design(w, op.config().n_obs_times());
  const int d = op.obs_dim();

  Eigen::MatrixXd cov_ft(n, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < d; ++j) {
    e[j] = 1.0;
    cov_ft.col(j) = prior.apply_cov(op.apply_transpose(e));
    e[j] = 0.0;
  }
  Eigen::MatrixXd g(d, d);
  for (int j = 0; j < d; ++j) g.col(j) = op.apply(cov_ft.col(j));

  Eigen::VectorXd prior_diag(n);
  Eigen::VectorXd en = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    en[i] = 1.0;
    prior_diag[i] = prior.apply_cov(en)[i];
    en[i] = 0.0;
  }

  const Eigen::MatrixXd s =
      Eigen::MatrixXd::Identity(d, d) + inv_s2 * w_full.asDiagonal() * g;
  const Eigen::MatrixXd update =
      Eigen::PartialPivLU<Eigen::MatrixXd>(s).solve(w_full.asDiagonal() *
                                                    cov_ft.transpose());
  Eigen::VectorXd var =
      prior_diag - inv_s2 * cov_ft.cwiseProduct(update.transpose()).rowwise().sum();
  return var.cwiseMax(0.0);
}

}  // namespace oeduu
