#include "oeduu/transport.hpp"

#include "oeduu/counters.hpp"
#include "oeduu/stencils.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oeduu {

void TransportConfig::validate(double t0) const {
  if (!(kappa > 0.0)) throw std::invalid_argument("transport: kappa must be positive");
  if (n_steps < 10) throw std::invalid_argument("transport: need n_steps >= 10");
  if (obs_times.empty()) throw std::invalid_argument("transport: no observation times");
  if (!std::is_sorted(obs_times.begin(), obs_times.end())) {
    throw std::invalid_argument("transport: obs_times must be increasing");
  }
  if (!(t0 < obs_times.front() - obs_halfwidth)) {
    throw std::invalid_argument("transport: first window must start after t0");
  }
  if (!(obs_times.back() + obs_halfwidth <= t1 + 1e-12)) {
    throw std::invalid_argument("transport: last window must end by t1");
  }
}

SensorNetwork SensorNetwork::from_points(
    const Grid& grid, const std::vector<std::array<double, 2>>& points) {
  if (points.empty()) throw std::invalid_argument("sensors: need at least one");
  SensorNetwork net;
  net.locations_ = points;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(points.size() * 4);
  for (std::size_t l = 0; l < points.size(); ++l) {
    const auto [x, y] = points[l];
    if (!(x > 0.0 && x < grid.extent_x && y > 0.0 && y < grid.extent_y)) {
      throw std::invalid_argument("sensors: locations must lie strictly inside the domain");
    }
    const InterpStencil st = interp_weights(grid, x, y);
    for (int c = 0; c < 4; ++c) {
      if (st.weights[c] != 0.0) {
        trips.emplace_back(static_cast<int>(l), st.nodes[c], st.weights[c]);
      }
    }
  }
  net.interp_.resize(static_cast<int>(points.size()), grid.num_nodes());
  net.interp_.setFromTriplets(trips.begin(), trips.end());
  return net;
}

SensorNetwork SensorNetwork::lattice(const Grid& grid, int count_x, int count_y,
                                     double margin_x, double margin_y) {
  if (count_x < 1 || count_y < 1) {
    throw std::invalid_argument("sensors: lattice counts must be positive");
  }
  std::vector<std::array<double, 2>> pts;
  pts.reserve(static_cast<std::size_t>(count_x) * count_y);
  const double wx = grid.extent_x - 2 * margin_x;
  const double wy = grid.extent_y - 2 * margin_y;
  if (!(wx > 0.0) || !(wy > 0.0)) {
    throw std::invalid_argument("sensors: margins leave no room");
  }
  for (int jy = 0; jy < count_y; ++jy) {
    for (int jx = 0; jx < count_x; ++jx) {
      const double x = count_x == 1 ? margin_x + 0.5 * wx
                                    : margin_x + wx * jx / (count_x - 1);
      const double y = count_y == 1 ? margin_y + 0.5 * wy
                                    : margin_y + wy * jy / (count_y - 1);
      pts.push_back({x, y});
    }
  }
  return from_points(grid, pts);
}

namespace {

/// Upwind advection in conservative flux form, normalized by the cell
/// volume. The left edge carries no flux (zero total flux there); on the
/// remaining boundary only outflow contributes, inflow carries zero
/// concentration. Off-diagonals are nonpositive, so the implicit-Euler
/// step matrix is an M-matrix.
Eigen::SparseMatrix<double> assemble_upwind_advection(const Grid& grid,
                                                      const Field& vx,
                                                      const Field& vy) {
  const double hx = grid.hx(), hy = grid.hy();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid.num_nodes()) * 6);

  // flux from i to j across an interior face with scaled width `c`
  auto add_face = [&](int i, int j, double vf, double c) {
    const double out = std::max(vf, 0.0), in = std::min(vf, 0.0);
    trips.emplace_back(i, i, c * out);
    trips.emplace_back(i, j, c * in);
    trips.emplace_back(j, i, -c * out);
    trips.emplace_back(j, j, -c * in);
  };

  for (int iy = 0; iy < grid.ny; ++iy) {
    const double fy = (iy == 0 || iy == grid.ny - 1) ? 0.5 : 1.0;
    for (int ix = 0; ix + 1 < grid.nx; ++ix) {
      const int i = grid.node(ix, iy), j = grid.node(ix + 1, iy);
      add_face(i, j, 0.5 * (vx[i] + vx[j]), fy / hx);
    }
  }
  for (int ix = 0; ix < grid.nx; ++ix) {
    const double fx = (ix == 0 || ix == grid.nx - 1) ? 0.5 : 1.0;
    for (int iy = 0; iy + 1 < grid.ny; ++iy) {
      const int i = grid.node(ix, iy), j = grid.node(ix, iy + 1);
      add_face(i, j, 0.5 * (vy[i] + vy[j]), fx / hy);
    }
  }

  // Boundary faces: outflow only. The left edge is skipped entirely.
  for (int iy = 0; iy < grid.ny; ++iy) {
    const double fy = (iy == 0 || iy == grid.ny - 1) ? 0.5 : 1.0;
    const int i = grid.node(grid.nx - 1, iy);
    trips.emplace_back(i, i, fy / hx * std::max(vx[i], 0.0));
  }
  for (int ix = 0; ix < grid.nx; ++ix) {
    const double fx = (ix == 0 || ix == grid.nx - 1) ? 0.5 : 1.0;
    const int ib = grid.node(ix, 0);
    const int it = grid.node(ix, grid.ny - 1);
    trips.emplace_back(ib, ib, fx / hy * std::max(-vy[ib], 0.0));
    trips.emplace_back(it, it, fx / hy * std::max(vy[it], 0.0));
  }

  Eigen::SparseMatrix<double> c(grid.num_nodes(), grid.num_nodes());
  c.setFromTriplets(trips.begin(), trips.end());
  return c;
}

}  // namespace

ForwardOperator::ForwardOperator(const Grid& grid, UncertainSample sample,
                                 TransportConfig config,
                                 std::shared_ptr<const SensorNetwork> sensors)
    : grid_(grid),
      sample_(std::move(sample)),
      config_(std::move(config)),
      sensors_(std::move(sensors)) {
  if (!sensors_ || sensors_->size() < 1) {
    throw std::invalid_argument("ForwardOperator: no sensors");
  }
  if (sensors_->interp().cols() != grid_.num_nodes() ||
      sample_.theta.size() != grid_.num_nodes()) {
    throw std::invalid_argument("ForwardOperator: grid mismatch");
  }
  config_.validate(sample_.t0);

  dt_ = (config_.t1 - sample_.t0) / config_.n_steps;
  const double kappa = config_.kappa;
  Eigen::SparseMatrix<double> spatial =
      assemble_flux_stiffness(grid_, [kappa](int, int) { return kappa; });
  spatial += assemble_upwind_advection(grid_, sample_.velocity_x,
                                       sample_.velocity_y);

  Eigen::SparseMatrix<double> eye(grid_.num_nodes(), grid_.num_nodes());
  eye.setIdentity();
  step_ = eye + dt_ * spatial;
  step_.makeCompressed();
  solver_.compute(step_);
  if (solver_.info() != Eigen::Success) {
    throw std::runtime_error("ForwardOperator: step factorization failed");
  }

  // Trapezoid weights of (1/2h) * integral over [tau-h, tau+h] of the
  // piecewise-linear-in-time solution; endpoint fractions are exact.
  time_weights_.resize(config_.obs_times.size());
  const double h = config_.obs_halfwidth;
  for (std::size_t j = 0; j < config_.obs_times.size(); ++j) {
    std::vector<double> w(config_.n_steps + 1, 0.0);
    const double lo = config_.obs_times[j] - h;
    const double hi = config_.obs_times[j] + h;
    for (int k = 1; k <= config_.n_steps; ++k) {
      const double ta = sample_.t0 + (k - 1) * dt_;
      const double tb = sample_.t0 + k * dt_;
      const double a = std::max(ta, lo), b = std::min(tb, hi);
      if (b <= a) continue;
      const double mid = 0.5 * (a + b);
      w[k - 1] += (b - a) * (tb - mid) / dt_;
      w[k] += (b - a) * (mid - ta) / dt_;
    }
    for (int k = 0; k <= config_.n_steps; ++k) {
      if (w[k] != 0.0) time_weights_[j].push_back({k, w[k] / (2 * h)});
    }
  }
}

Eigen::VectorXd ForwardOperator::apply(const Eigen::VectorXd& m) const {
  if (m.size() != grid_.num_nodes()) {
    throw std::invalid_argument("ForwardOperator::apply: dimension mismatch");
  }
  const int s = sensors_->size();
  const int r = config_.n_obs_times();
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(s * r);

  // Per-step weight lookup to touch each state exactly once.
  std::vector<std::vector<std::pair<int, double>>> by_step(config_.n_steps + 1);
  for (int j = 0; j < r; ++j) {
    for (const auto& [k, wt] : time_weights_[j]) by_step[k].push_back({j, wt});
  }

  Eigen::VectorXd u = m;
  auto record = [&](int k) {
    if (by_step[k].empty()) return;
    const Eigen::VectorXd sensed = sensors_->interp() * u;
    for (const auto& [j, wt] : by_step[k]) obs.segment(j * s, s) += wt * sensed;
  };
  record(0);
  for (int k = 1; k <= config_.n_steps; ++k) {
    u = solver_.solve(u);
    record(k);
  }
  counters::add_transport_apply(config_.n_steps);
  return obs;
}

Eigen::VectorXd ForwardOperator::apply_transpose(
    const Eigen::VectorXd& obs) const {
  const int s = sensors_->size();
  const int r = config_.n_obs_times();
  if (obs.size() != static_cast<Eigen::Index>(s) * r) {
    throw std::invalid_argument(
        "ForwardOperator::apply_transpose: dimension mismatch");
  }

  std::vector<std::vector<std::pair<int, double>>> by_step(config_.n_steps + 1);
  for (int j = 0; j < r; ++j) {
    for (const auto& [k, wt] : time_weights_[j]) by_step[k].push_back({j, wt});
  }
  auto inject = [&](int k, Eigen::VectorXd& z) {
    for (const auto& [j, wt] : by_step[k]) {
      z += wt * (sensors_->interp().transpose() * obs.segment(j * s, s));
    }
  };

  // SparseLU::transpose() is not const-qualified in Eigen 3.4, but the
  // transposed solve only reads the factorization.
  auto& lu = const_cast<Eigen::SparseLU<Eigen::SparseMatrix<double>>&>(solver_);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(grid_.num_nodes());
  for (int k = config_.n_steps; k >= 1; --k) {
    inject(k, z);
    z = lu.transpose().solve(z);
  }
  inject(0, z);
  counters::add_adjoint_apply(config_.n_steps);
  return z;
}

Eigen::MatrixXd ForwardOperator::assemble_dense() const {
  if (grid_.num_nodes() > 2500) {
    throw std::length_error("assemble_dense: guarded to n <= 2500");
  }
  Eigen::MatrixXd f(obs_dim(), param_dim());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(param_dim());
  for (int i = 0; i < param_dim(); ++i) {
    e[i] = 1.0;
    f.col(i) = apply(e);
    e[i] = 0.0;
  }
  return f;
}

}  // namespace oeduu
