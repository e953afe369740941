#pragma once

#include "oeduu/grid.hpp"

#include <Eigen/SparseCore>

#include <functional>

namespace oeduu {

/// Symmetric two-point-flux stiffness for -div(c grad .) with natural
/// (zero-flux) boundary handling. Edges carry dual-area fractions
/// {1, 1/2} and every row is normalized by the cell volume hx*hy, so
/// interior rows reduce to the classical 5-point stencil and boundary
/// rows match volume-fraction-scaled ghost-node elimination. The result
/// is symmetric positive semidefinite with constants in its kernel.
/// face_coeff(i, j) supplies the coefficient on the edge between nodes
/// i and j (node indices per Grid::node).
Eigen::SparseMatrix<double> assemble_flux_stiffness(
    const Grid& grid, const std::function<double(int, int)>& face_coeff);

/// Nodal quadrature fractions {1, 1/2, 1/4}: the share of the cell
/// volume hx*hy owned by each node.
Eigen::VectorXd cell_volume_fractions(const Grid& grid);

/// Boundary trapezoid weights normalized by hx*hy: nonzero only on
/// boundary nodes, realizing the Robin surface term of the prior.
Eigen::VectorXd boundary_weights(const Grid& grid);

}  // namespace oeduu
