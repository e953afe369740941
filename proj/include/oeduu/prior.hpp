#pragma once

#include "oeduu/grid.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cstdint>

namespace oeduu {

/// Gaussian random-field model N(mean, A^{-2}) with the Robin-augmented
/// elliptic precision-root operator A = -rho*Lap + delta*I. Used both as
/// the inversion prior and to sample log-permeability fields.
///
/// A is assembled symmetric by construction (flux stiffness + nodal
/// quadrature reaction + boundary trapezoid Robin term) and factorized
/// once; covariance, covariance square root and sampling all reduce to
/// solves with A. The discrete parameter space carries the Euclidean
/// inner product (unit mass matrix), so A^{-1} is an exact symmetric
/// square root of the covariance.
class PriorModel {
 public:
  PriorModel(const Grid& grid, double rho, double delta, Field mean);

  /// Robin weight from the variance-equilibration rule.
  static double robin_coefficient(double rho, double delta);

  const Grid& grid() const { return grid_; }
  double rho() const { return rho_; }
  double delta() const { return delta_; }
  double beta() const { return beta_; }
  const Field& mean() const { return mean_; }
  const Eigen::SparseMatrix<double>& op() const { return op_; }

  /// A^{-1} v (counted as one prior solve).
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  /// A v.
  Eigen::VectorXd apply_op(const Eigen::VectorXd& v) const;
  /// Covariance application A^{-2} v.
  Eigen::VectorXd apply_cov(const Eigen::VectorXd& v) const;
  /// Covariance square root A^{-1} v; symmetric, so sqrt * sqrt^T = cov.
  Eigen::VectorXd apply_sqrt_cov(const Eigen::VectorXd& v) const;

  /// mean + A^{-1} z with z iid standard normal; deterministic per seed.
  Field sample(std::uint64_t seed) const;

 private:
  void check_dim(const Eigen::VectorXd& v) const;

  Grid grid_;
  double rho_ = 0.0, delta_ = 0.0, beta_ = 0.0;
  Field mean_;
  Eigen::SparseMatrix<double> op_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver_;
};

}  // namespace oeduu
