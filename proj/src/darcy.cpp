#include "oeduu/darcy.hpp"

#include "oeduu/counters.hpp"
#include "oeduu/rng.hpp"
#include "oeduu/stencils.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oeduu {

Field solve_pressure(const Grid& grid, const Field& theta) {
  const int n = grid.num_nodes();
  if (theta.size() != n) {
    throw std::invalid_argument("solve_pressure: theta length != node count");
  }
  if (!theta.allFinite()) {
    throw std::invalid_argument("solve_pressure: theta must be finite");
  }

  // Harmonic face averaging of e^theta, standard for jumping coefficients.
  Eigen::VectorXd inv_k = (-theta).array().exp();
  auto face = [&](int i, int j) { return 2.0 / (inv_k[i] + inv_k[j]); };
  Eigen::SparseMatrix<double> stiff = assemble_flux_stiffness(grid, face);

  // Dirichlet elimination: unknowns are the nodes with 0 < ix < nx-1.
  const int nu = (grid.nx - 2) * grid.ny;
  std::vector<int> to_unknown(n, -1);
  Eigen::VectorXd p_full = Eigen::VectorXd::Zero(n);
  int u = 0;
  for (int iy = 0; iy < grid.ny; ++iy) {
    p_full[grid.node(grid.nx - 1, iy)] = 1.0;
    for (int ix = 1; ix + 1 < grid.nx; ++ix) {
      to_unknown[grid.node(ix, iy)] = u++;
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(nu) * 5);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
  for (int col = 0; col < stiff.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(stiff, col); it; ++it) {
      const int ui = to_unknown[it.row()];
      if (ui < 0) continue;
      const int uj = to_unknown[it.col()];
      if (uj >= 0) {
        trips.emplace_back(ui, uj, it.value());
      } else {
        rhs[ui] -= it.value() * p_full[it.col()];
      }
    }
  }
  Eigen::SparseMatrix<double> a(nu, nu);
  a.setFromTriplets(trips.begin(), trips.end());

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("solve_pressure: factorization failed");
  }
  Eigen::VectorXd p_u = solver.solve(rhs);
  counters::add_pressure_solves(1);

  const double resid = (a * p_u - rhs).cwiseAbs().maxCoeff();
  const double scale = rhs.cwiseAbs().maxCoeff() + 1.0;
  if (!(resid <= 1e-10 * scale)) {
    throw std::runtime_error("solve_pressure: residual too large");
  }

  for (int i = 0; i < n; ++i) {
    if (to_unknown[i] >= 0) p_full[i] = p_u[to_unknown[i]];
  }
  return p_full;
}

std::pair<Field, Field> velocity_from_pressure(const Grid& grid,
                                               const Field& theta,
                                               const Field& p) {
  const int n = grid.num_nodes();
  if (theta.size() != n || p.size() != n) {
    throw std::invalid_argument("velocity_from_pressure: field size mismatch");
  }
  const double hx = grid.hx(), hy = grid.hy();
  Field vx(n), vy(n);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const int i = grid.node(ix, iy);
      double dpdx;
      if (ix == 0) {
        dpdx = (p[grid.node(1, iy)] - p[i]) / hx;
      } else if (ix == grid.nx - 1) {
        dpdx = (p[i] - p[grid.node(ix - 1, iy)]) / hx;
      } else {
        dpdx = (p[grid.node(ix + 1, iy)] - p[grid.node(ix - 1, iy)]) / (2 * hx);
      }
      double dpdy;
      if (iy == 0 || iy == grid.ny - 1) {
        dpdy = 0.0;  // no-flux edge
      } else {
        dpdy = (p[grid.node(ix, iy + 1)] - p[grid.node(ix, iy - 1)]) / (2 * hy);
      }
      const double k = std::exp(theta[i]);
      vx[i] = -k * dpdx;
      vy[i] = -k * dpdy;
    }
  }
  return {std::move(vx), std::move(vy)};
}

UncertainSample draw_sample(const PriorModel& theta_prior,
                            std::pair<double, double> t0_range,
                            std::uint64_t seed) {
  if (!(t0_range.first <= t0_range.second)) {
    throw std::invalid_argument("draw_sample: empty t0 range");
  }
  UncertainSample s;
  s.seed = seed;
  s.theta = theta_prior.sample(derive_seed(seed, "theta"));
  s.pressure = solve_pressure(theta_prior.grid(), s.theta);
  auto v = velocity_from_pressure(theta_prior.grid(), s.theta, s.pressure);
  s.velocity_x = std::move(v.first);
  s.velocity_y = std::move(v.second);
  Rng rng(derive_seed(seed, "t0"));
  s.t0 = rng.uniform(t0_range.first, t0_range.second);
  return s;
}

}  // namespace oeduu
