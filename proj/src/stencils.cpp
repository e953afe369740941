#include "oeduu/stencils.hpp"

#include <vector>

namespace oeduu {

Eigen::SparseMatrix<double> assemble_flux_stiffness(
    const Grid& grid, const std::function<double(int, int)>& face_coeff) {
  const int nx = grid.nx, ny = grid.ny;
  const double hx = grid.hx(), hy = grid.hy();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid.num_nodes()) * 8);

  auto add_edge = [&](int i, int j, double t) {
    trips.emplace_back(i, i, t);
    trips.emplace_back(j, j, t);
    trips.emplace_back(i, j, -t);
    trips.emplace_back(j, i, -t);
  };

  for (int iy = 0; iy < ny; ++iy) {
    const double frac_y = (iy == 0 || iy == ny - 1) ? 0.5 : 1.0;
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const int i = grid.node(ix, iy), j = grid.node(ix + 1, iy);
      add_edge(i, j, face_coeff(i, j) * frac_y / (hx * hx));
    }
  }
  for (int ix = 0; ix < nx; ++ix) {
    const double frac_x = (ix == 0 || ix == nx - 1) ? 0.5 : 1.0;
    for (int iy = 0; iy + 1 < ny; ++iy) {
      const int i = grid.node(ix, iy), j = grid.node(ix, iy + 1);
      add_edge(i, j, face_coeff(i, j) * frac_x / (hy * hy));
    }
  }

  Eigen::SparseMatrix<double> s(grid.num_nodes(), grid.num_nodes());
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

Eigen::VectorXd cell_volume_fractions(const Grid& grid) {
  Eigen::VectorXd v(grid.num_nodes());
  for (int iy = 0; iy < grid.ny; ++iy) {
    const double fy = (iy == 0 || iy == grid.ny - 1) ? 0.5 : 1.0;
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double fx = (ix == 0 || ix == grid.nx - 1) ? 0.5 : 1.0;
      v[grid.node(ix, iy)] = fx * fy;
    }
  }
  return v;
}

Eigen::VectorXd boundary_weights(const Grid& grid) {
  const double hx = grid.hx(), hy = grid.hy();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(grid.num_nodes());
  // Each boundary segment contributes half its length to both endpoints.
  for (int ix = 0; ix + 1 < grid.nx; ++ix) {
    for (int iy : {0, grid.ny - 1}) {
      b[grid.node(ix, iy)] += 0.5 * hx;
      b[grid.node(ix + 1, iy)] += 0.5 * hx;
    }
  }
  for (int iy = 0; iy + 1 < grid.ny; ++iy) {
    for (int ix : {0, grid.nx - 1}) {
      b[grid.node(ix, iy)] += 0.5 * hy;
      b[grid.node(ix, iy + 1)] += 0.5 * hy;
    }
  }
  return b / (hx * hy);
}

}  // namespace oeduu
