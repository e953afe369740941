#include "oeduu/counters.hpp"

#include <atomic>

namespace oeduu::counters {

namespace {
std::atomic<std::uint64_t> g_prior{0};
std::atomic<std::uint64_t> g_pressure{0};
std::atomic<std::uint64_t> g_transport{0};
std::atomic<std::uint64_t> g_adjoint{0};
std::atomic<std::uint64_t> g_steps{0};
}  // namespace

Snapshot snapshot() {
  Snapshot s;
  s.prior_solves = g_prior.load(std::memory_order_relaxed);
  s.pressure_solves = g_pressure.load(std::memory_order_relaxed);
  s.transport_applies = g_transport.load(std::memory_order_relaxed);
  s.adjoint_applies = g_adjoint.load(std::memory_order_relaxed);
  s.transport_steps = g_steps.load(std::memory_order_relaxed);
  return s;
}

void add_prior_solves(std::uint64_t n) {
  g_prior.fetch_add(n, std::memory_order_relaxed);
}
void add_pressure_solves(std::uint64_t n) {
  g_pressure.fetch_add(n, std::memory_order_relaxed);
}
void add_transport_apply(std::uint64_t steps) {
  g_transport.fetch_add(1, std::memory_order_relaxed);
  g_steps.fetch_add(steps, std::memory_order_relaxed);
}
void add_adjoint_apply(std::uint64_t steps) {
  g_adjoint.fetch_add(1, std::memory_order_relaxed);
  g_steps.fetch_add(steps, std::memory_order_relaxed);
}

}  // namespace oeduu::counters
