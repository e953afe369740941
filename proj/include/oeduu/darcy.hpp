#pragma once

#include "oeduu/grid.hpp"
#include "oeduu/prior.hpp"

#include <cstdint>
#include <utility>

namespace oeduu {

/// One realization of the irreducible model uncertainty: a
/// log-permeability field, the Darcy velocity it induces, and a random
/// initial time.
struct UncertainSample {
  Field theta;       ///< log-permeability
  Field pressure;    ///< solved pressure, 0 on the left edge, 1 on the right
  Field velocity_x;  ///< Darcy velocity -e^theta dp/dx
  Field velocity_y;  ///< Darcy velocity -e^theta dp/dy
  double t0 = 0.0;   ///< initial time
  std::uint64_t seed = 0;
};

/// Pressure equation -div(e^theta grad p) = 0 with p = 0 on the left
/// boundary, p = 1 on the right, no-flux on top and bottom. Harmonic
/// face averaging of e^theta; SPD solve after Dirichlet elimination.
Field solve_pressure(const Grid& grid, const Field& theta);

/// v = -e^theta grad p. Centered differences in the interior, one-sided
/// at the left/right edges; the normal component on the no-flux top and
/// bottom edges is set from the boundary condition (exactly zero).
std::pair<Field, Field> velocity_from_pressure(const Grid& grid,
                                               const Field& theta,
                                               const Field& p);

/// Samples theta from its Gaussian field, solves for pressure and
/// velocity, and draws T0 uniformly. Pure function of (prior, range,
/// seed); arbitrarily parallel across seeds.
UncertainSample draw_sample(const PriorModel& theta_prior,
                            std::pair<double, double> t0_range,
                            std::uint64_t seed);

}  // namespace oeduu
