#include "oeduu/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oeduu {

Grid::Grid(int nx_, int ny_, double extent_x_, double extent_y_)
    : nx(nx_), ny(ny_), extent_x(extent_x_), extent_y(extent_y_) {
  if (nx < 3 || ny < 3) {
    throw std::invalid_argument("Grid: need at least 3 nodes per axis");
  }
  if (!(extent_x > 0.0) || !(extent_y > 0.0) || !std::isfinite(extent_x) ||
      !std::isfinite(extent_y)) {
    throw std::invalid_argument("Grid: extents must be positive and finite");
  }
}

bool Grid::contains(double x, double y) const {
  return x >= 0.0 && x <= extent_x && y >= 0.0 && y <= extent_y;
}

InterpStencil interp_weights(const Grid& grid, double x, double y) {
  if (!grid.contains(x, y)) {
    throw std::domain_error("interp_weights: point outside the domain");
  }
  // Clamp so points on the far edges land in the last cell.
  const int cx = std::min(static_cast<int>(x / grid.hx()), grid.nx - 2);
  const int cy = std::min(static_cast<int>(y / grid.hy()), grid.ny - 2);
  const double tx = x / grid.hx() - cx;
  const double ty = y / grid.hy() - cy;

  InterpStencil s;
  s.nodes = {grid.node(cx, cy), grid.node(cx + 1, cy), grid.node(cx, cy + 1),
             grid.node(cx + 1, cy + 1)};
  s.weights = {(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty,
               tx * ty};
  return s;
}

}  // namespace oeduu
