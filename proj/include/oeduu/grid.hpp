#pragma once

#include <Eigen/Core>

#include <array>

namespace oeduu {

/// Nodal values on a Grid, x-fastest ordering: entry iy*nx + ix.
using Field = Eigen::VectorXd;

/// Uniform tensor-product grid on the rectangle [0, extent_x] x [0, extent_y].
struct Grid {
  int nx = 0;  ///< node count along x (>= 3)
  int ny = 0;  ///< node count along y (>= 3)
  double extent_x = 1.0;
  double extent_y = 1.0;

  Grid() = default;
  Grid(int nx_, int ny_, double extent_x_, double extent_y_);

  double hx() const { return extent_x / (nx - 1); }
  double hy() const { return extent_y / (ny - 1); }
  int num_nodes() const { return nx * ny; }
  int node(int ix, int iy) const { return iy * nx + ix; }
  bool on_boundary(int ix, int iy) const {
    return ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1;
  }
  bool contains(double x, double y) const;
  double node_x(int ix) const { return ix * hx(); }
  double node_y(int iy) const { return iy * hy(); }
};

/// Bilinear interpolation stencil: the four corners of the enclosing cell.
struct InterpStencil {
  std::array<int, 4> nodes;
  std::array<double, 4> weights;
};

/// Weights are nonnegative, sum to one, and reproduce affine functions
/// exactly. Throws std::domain_error for points outside the rectangle.
InterpStencil interp_weights(const Grid& grid, double x, double y);

}  // namespace oeduu
