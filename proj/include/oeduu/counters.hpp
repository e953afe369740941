#pragma once

#include <cstdint>

namespace oeduu::counters {

/// Process-wide PDE work counters. The optimization phase must leave all
/// of them untouched; the pipeline snapshots them around each phase.
struct Snapshot {
  std::uint64_t prior_solves = 0;      ///< sparse solves with the prior operator
  std::uint64_t pressure_solves = 0;   ///< Darcy pressure solves
  std::uint64_t transport_applies = 0; ///< forward transport sweeps
  std::uint64_t adjoint_applies = 0;   ///< adjoint transport sweeps
  std::uint64_t transport_steps = 0;   ///< individual implicit-Euler solves

  std::uint64_t total() const {
    return prior_solves + pressure_solves + transport_applies +
           adjoint_applies + transport_steps;
  }
  bool operator==(const Snapshot&) const = default;
};

Snapshot snapshot();
void add_prior_solves(std::uint64_t n);
void add_pressure_solves(std::uint64_t n);
void add_transport_apply(std::uint64_t steps);
void add_adjoint_apply(std::uint64_t steps);

}  // namespace oeduu::counters
