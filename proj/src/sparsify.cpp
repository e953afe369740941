#include "oeduu/sparsify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace oeduu {

double PenaltyConfig::eps(int stage) const {
  return std::pow(eps_base, stage);
}

void PenaltyConfig::validate() const {
  if (!(gamma >= 0.0)) throw std::invalid_argument("penalty: gamma must be >= 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("penalty: alpha must be positive");
  if (!(eps_base > 0.0 && eps_base < 1.0)) {
    throw std::invalid_argument("penalty: eps schedule must decrease to zero");
  }
  if (!(binary_tol > 0.0)) throw std::invalid_argument("penalty: bad binary_tol");
  if (max_stages < 1) throw std::invalid_argument("penalty: bad max_stages");
}

std::pair<double, double> f_eps(double w, double eps, double alpha) {
  if (!(eps > 0.0) || !(alpha > 0.0)) {
    throw std::invalid_argument("f_eps: eps and alpha must be positive");
  }
  const double knee = eps / (2.0 * alpha);
  const double plateau = 2.0 * eps / alpha;
  if (w < knee) {
    return {alpha * w / eps, alpha / eps};
  }
  if (w >= plateau) {
    return {1.0, 0.0};
  }
  // Hermite cubic in x = alpha*w over [eps/2, 2*eps]: value 1/2 and slope
  // 1/eps at the left knot, value 1 and slope 0 at the right knot.
  const double x0 = 0.5 * eps, x1 = 2.0 * eps;
  const double span = x1 - x0;
  const double t = (alpha * w - x0) / span;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  const double h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t);
  const double d00 = 6 * t * (t - 1);
  const double d10 = (1 - t) * (1 - 3 * t);
  const double value = h00 * 0.5 + h10 * span * (1.0 / eps) + h01 * 1.0;
  const double dvalue_dt = d00 * 0.5 + d10 * span * (1.0 / eps) - d00 * 1.0;
  return {value, alpha * dvalue_dt / span};
}

std::pair<double, Eigen::VectorXd> penalty(const Eigen::VectorXd& w,
                                           const PenaltyConfig& config,
                                           int stage) {
  if (stage < 0) throw std::invalid_argument("penalty: stage must be >= 0");
  Eigen::VectorXd grad(w.size());
  double value = 0.0;
  if (stage == 0) {
    value = config.alpha * w.sum();
    grad.setConstant(config.alpha);
    return {value, std::move(grad)};
  }
  const double eps = config.eps(stage);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const auto [v, d] = f_eps(w[i], eps, config.alpha);
    value += v;
    grad[i] = d;
  }
  return {value, std::move(grad)};
}

namespace {

Eigen::VectorXd clamp01(const Eigen::VectorXd& w) {
  return w.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd projected_gradient(const Eigen::VectorXd& w,
                                   const Eigen::VectorXd& g) {
  return w - clamp01(w - g);
}

}  // namespace

InnerResult minimize_box(const BoxObjective& objective,
                         const Eigen::VectorXd& w0,
                         const InnerSolveOptions& options) {
  const Eigen::Index n = w0.size();
  InnerResult result;
  Eigen::VectorXd w = clamp01(w0);
  Eigen::VectorXd g(n);
  double value = objective(w, g);
  result.evaluations = 1;

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y)

  auto active = [&](const Eigen::VectorXd& wi, const Eigen::VectorXd& gi,
                    Eigen::Index i) {
    return (wi[i] <= 1e-12 && gi[i] > 0.0) || (wi[i] >= 1.0 - 1e-12 && gi[i] < 0.0);
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    result.pg_norm = projected_gradient(w, g).cwiseAbs().maxCoeff();
    if (result.pg_norm <= options.pg_tolerance) break;

    // Two-loop recursion on the gradient restricted to free variables.
    Eigen::VectorXd q = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active(w, g, i)) q[i] = 0.0;
    }
    std::vector<double> alpha_coef(pairs.size());
    for (int j = static_cast<int>(pairs.size()) - 1; j >= 0; --j) {
      const auto& [s, y] = pairs[j];
      const double rho = 1.0 / y.dot(s);
      alpha_coef[j] = rho * s.dot(q);
      q -= alpha_coef[j] * y;
    }
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const auto& [s, y] = pairs[j];
      const double rho = 1.0 / y.dot(s);
      q += (alpha_coef[j] - rho * y.dot(q)) * s;
    }
    Eigen::VectorXd direction = -q;
    if (pairs.empty()) {
      // no curvature yet: bound the raw-gradient step to the box scale
      direction /= std::max(1.0, direction.cwiseAbs().maxCoeff());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (active(w, g, i)) direction[i] = 0.0;
    }
    if (g.dot(direction) >= 0.0) {
      pairs.clear();
      direction = -projected_gradient(w, g);
    }

    // Armijo backtracking along the projected path.
    const double c1 = 1e-4;
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd w_new, g_new(n);
    double value_new = 0.0;
    while (step > 1e-14) {
      w_new = clamp01(w + step * direction);
      const Eigen::VectorXd delta = w_new - w;
      if (delta.cwiseAbs().maxCoeff() == 0.0) break;
      value_new = objective(w_new, g_new);
      result.evaluations++;
      if (value_new <= value + c1 * g.dot(delta)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.line_search_failed = true;
      break;
    }

    const Eigen::VectorXd s = w_new - w;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      pairs.emplace_back(s, y);
      if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
    }
    w = std::move(w_new);
    g = g_new;
    value = value_new;
  }

  result.w = std::move(w);
  result.value = value;
  result.pg_norm = projected_gradient(result.w, g).cwiseAbs().maxCoeff();
  return result;
}

InnerResult solve_inner(const SaaProblem& problem, const Eigen::VectorXd& w0,
                        const PenaltyConfig& config, int stage,
                        const InnerSolveOptions& options, int workers) {
  config.validate();
  BoxObjective composite = [&](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    Eigen::VectorXd obj_grad;
    const double value =
        objective_value_and_gradient(problem, w, obj_grad, EvalRoute::Auto,
                                     workers);
    const auto [pen, pen_grad] = penalty(w, config, stage);
    g = obj_grad + config.gamma * pen_grad;
    return value + config.gamma * pen;
  };
  return minimize_box(composite, w0, options);
}

namespace {

bool is_binary(const Eigen::VectorXd& w, double tol) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (std::min(w[i], 1.0 - w[i]) > tol) return false;
  }
  return true;
}

}  // namespace

ContinuationResult continuation(const SaaProblem& problem,
                                const PenaltyConfig& config,
                                const InnerSolveOptions& options,
                                int workers) {
  config.validate();
  ContinuationResult result;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(problem.n_sensors, 0.5);

  for (int stage = 0; stage <= config.max_stages; ++stage) {
    const InnerResult inner = solve_inner(problem, w, config, stage, options,
                                          workers);
    w = inner.w;
    if (stage == 0) result.l1_solution = w;

    StageRecord rec;
    rec.stage = stage;
    rec.eps = stage == 0 ? 0.0 : config.eps(stage);
    rec.penalty_value = penalty(w, config, stage).first;
    rec.objective =
        inner.value - config.gamma * rec.penalty_value;
    rec.nnz = static_cast<int>((w.array() > 0.5).count());
    rec.pg_norm = inner.pg_norm;
    rec.iterations = inner.iterations;
    result.history.push_back(rec);
    result.stages = stage;

    if (stage > 0 && is_binary(w, config.binary_tol)) {
      result.converged = true;
      break;
    }
  }

  result.w = (w.array() > 0.5).cast<double>();
  result.objective = objective_value(problem, result.w, EvalRoute::Auto,
                                     workers);
  return result;
}

}  // namespace oeduu
