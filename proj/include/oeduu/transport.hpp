#pragma once

#include "oeduu/darcy.hpp"
#include "oeduu/grid.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <array>
#include <memory>
#include <vector>

namespace oeduu {

/// Time discretization and observation schedule for the transport solve.
struct TransportConfig {
  double kappa = 1e-3;   ///< diffusion coefficient
  double t1 = 16.0;      ///< final time
  int n_steps = 250;     ///< implicit-Euler steps on (t0, t1]
  std::vector<double> obs_times{7.0, 9.0, 11.0, 13.0, 15.0};
  double obs_halfwidth = 0.5;  ///< time-averaging half window

  int n_obs_times() const { return static_cast<int>(obs_times.size()); }
  /// Checks the window layout against a concrete initial time.
  void validate(double t0) const;
};

/// Candidate sensor locations with their interpolation rows.
class SensorNetwork {
 public:
  static SensorNetwork lattice(const Grid& grid, int count_x, int count_y,
                               double margin_x, double margin_y);
  static SensorNetwork from_points(
      const Grid& grid, const std::vector<std::array<double, 2>>& points);

  int size() const { return static_cast<int>(locations_.size()); }
  const std::vector<std::array<double, 2>>& locations() const {
    return locations_;
  }
  /// s x n sparse matrix of bilinear interpolation rows.
  const Eigen::SparseMatrix<double>& interp() const { return interp_; }

 private:
  std::vector<std::array<double, 2>> locations_;
  Eigen::SparseMatrix<double> interp_;
};

/// Linear parameter-to-observable map for one uncertainty realization:
/// implicit-Euler advection-diffusion from T0 to T1 with first-order
/// upwinding, followed by time-averaged point observations.
///
/// Output layout is time-major: entry j*s + l is sensor l at observation
/// time j (0-based). apply_transpose is the exact transpose of apply:
/// the same step matrix is solved with its transpose in reverse order.
/// One sparse LU is factorized per operator and reused for every step
/// of both sweeps. Immutable after construction; applies are
/// concurrently callable.
class ForwardOperator {
 public:
  ForwardOperator(const Grid& grid, UncertainSample sample,
                  TransportConfig config,
                  std::shared_ptr<const SensorNetwork> sensors);

  int obs_dim() const { return sensors_->size() * config_.n_obs_times(); }
  int param_dim() const { return grid_.num_nodes(); }
  int n_sensors() const { return sensors_->size(); }
  const Grid& grid() const { return grid_; }
  const UncertainSample& sample() const { return sample_; }
  const TransportConfig& config() const { return config_; }
  const SensorNetwork& sensors() const { return *sensors_; }
  double dt() const { return dt_; }
  /// Per observation time: (step index, weight) pairs of the trapezoid
  /// average; weights sum to one.
  const std::vector<std::vector<std::pair<int, double>>>& time_weights()
      const {
    return time_weights_;
  }
  /// The implicit-Euler system matrix I + dt*(kappa*S + C).
  const Eigen::SparseMatrix<double>& step_matrix() const { return step_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& m) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& obs) const;

  /// Column-by-column densification, for test oracles only (n <= 2500).
  Eigen::MatrixXd assemble_dense() const;

 private:
  Grid grid_;
  UncertainSample sample_;
  TransportConfig config_;
  std::shared_ptr<const SensorNetwork> sensors_;
  double dt_ = 0.0;
  Eigen::SparseMatrix<double> step_;  // I + dt*(kappa*S + C)
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
  std::vector<std::vector<std::pair<int, double>>> time_weights_;
};

}  // namespace oeduu
