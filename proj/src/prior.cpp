#include "oeduu/prior.hpp"

#include "oeduu/counters.hpp"
#include "oeduu/rng.hpp"
#include "oeduu/stencils.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oeduu {

double PriorModel::robin_coefficient(double rho, double delta) {
  return (rho / 1.42) * std::sqrt(delta / rho);
}

PriorModel::PriorModel(const Grid& grid, double rho, double delta, Field mean)
    : grid_(grid), rho_(rho), delta_(delta), mean_(std::move(mean)) {
  if (!(rho > 0.0) || !(delta > 0.0) || !std::isfinite(rho) ||
      !std::isfinite(delta)) {
    throw std::invalid_argument("PriorModel: rho and delta must be positive");
  }
  if (mean_.size() != grid_.num_nodes()) {
    throw std::invalid_argument("PriorModel: mean length != node count");
  }
  beta_ = robin_coefficient(rho, delta);

  op_ = assemble_flux_stiffness(grid_, [rho](int, int) { return rho; });
  const Eigen::VectorXd volumes = cell_volume_fractions(grid_);
  const Eigen::VectorXd robin = boundary_weights(grid_);
  std::vector<Eigen::Triplet<double>> diag;
  diag.reserve(grid_.num_nodes());
  for (int i = 0; i < grid_.num_nodes(); ++i) {
    diag.emplace_back(i, i, delta * volumes[i] + beta_ * robin[i]);
  }
  Eigen::SparseMatrix<double> d(grid_.num_nodes(), grid_.num_nodes());
  d.setFromTriplets(diag.begin(), diag.end());
  op_ += d;
  op_.makeCompressed();

  // The edge-based assembly is symmetric entry-for-entry; verify exactly.
  Eigen::SparseMatrix<double> skew = Eigen::SparseMatrix<double>(op_.transpose()) - op_;
  if (skew.coeffs().size() > 0 && skew.coeffs().cwiseAbs().maxCoeff() != 0.0) {
    throw std::logic_error("PriorModel: operator assembly not symmetric");
  }

  solver_.compute(op_);
  if (solver_.info() != Eigen::Success) {
    throw std::runtime_error("PriorModel: factorization failed");
  }
}

void PriorModel::check_dim(const Eigen::VectorXd& v) const {
  if (v.size() != grid_.num_nodes()) {
    throw std::invalid_argument("PriorModel: dimension mismatch");
  }
}

Eigen::VectorXd PriorModel::solve(const Eigen::VectorXd& v) const {
  check_dim(v);
  counters::add_prior_solves(1);
  return solver_.solve(v);
}

Eigen::VectorXd PriorModel::apply_op(const Eigen::VectorXd& v) const {
  check_dim(v);
  return op_ * v;
}

Eigen::VectorXd PriorModel::apply_cov(const Eigen::VectorXd& v) const {
  return solve(solve(v));
}

Eigen::VectorXd PriorModel::apply_sqrt_cov(const Eigen::VectorXd& v) const {
  return solve(v);
}

Field PriorModel::sample(std::uint64_t seed) const {
  Rng rng(seed);
  return mean_ + solve(rng.gaussian_vector(grid_.num_nodes()));
}

}  // namespace oeduu
