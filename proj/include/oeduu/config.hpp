#pragma once

#include "oeduu/grid.hpp"
#include "oeduu/prior.hpp"
#include "oeduu/reduction.hpp"
#include "oeduu/sparsify.hpp"
#include "oeduu/transport.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace oeduu {

/// Raised for malformed configuration; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridConfig {
  int nx = 49, ny = 33;
  double extent_x = 1.5, extent_y = 1.0;
};

struct PriorConfig {
  double rho = 0.008, delta = 0.02;
  double mean = 0.0;
};

struct DarcyConfig {
  double rho = 0.02, delta = 0.5;
  double mean = -2.7;  ///< log-permeability mean; sets the velocity scale
  double t0_min = -1.0, t0_max = 1.0;
};

struct SensorConfig {
  int count_x = 10, count_y = 6;
  double margin_x = 0.12, margin_y = 0.12;
  std::vector<std::array<double, 2>> locations;  ///< overrides the lattice
};

struct ProbeConfig {
  std::vector<std::array<double, 2>> centers{{0.35, 0.3}, {0.8, 0.7}, {1.2, 0.4}};
  std::vector<double> widths{0.12, 0.18, 0.15};
  std::vector<double> amplitudes{1.0, 0.8, 1.2};
};

struct ReductionConfig {
  double mu = 2e-3;
  double mu_eval = 1e-4;  ///< tighter tolerance for held-out evaluation
  int sketch_width = 40;
  int clusters = 1;
  std::string core_mode = "two-pass";        // or "single-pass"
  std::string truncation_rule = "first-drop";  // or "strict-count"
  ProbeConfig probe;
};

struct PenaltyGridConfig {
  double alpha = 0.1;
  double eps_base = 2.0 / 3.0;
  double binary_tol = 1e-3;
  int max_stages = 40;
  std::vector<double> gamma_grid;
};

struct OptimizerConfig {
  int max_iterations = 500;
  double pg_tolerance = 1e-6;
  int memory = 10;
};

struct SaaConfig {
  int n_samples = 20;        ///< SAA sample count
  int n_eval = 50;           ///< held-out evaluation samples
  int n_deterministic = 20;  ///< deterministic design families
  int n_validate = 3;        ///< samples re-checked with exact operators
};

struct RunConfig {
  std::uint64_t master_seed = 20260810;
  int workers = 0;  ///< 0 = hardware concurrency
};

struct ExperimentConfig {
  GridConfig grid;
  PriorConfig prior;
  DarcyConfig darcy;
  TransportConfig transport{1e-3, 16.0, 120, {7.0, 9.0, 11.0, 13.0, 15.0}, 0.5};
  SensorConfig sensors;
  NoiseModel noise{0.01};
  ReductionConfig reduction;
  PenaltyGridConfig penalty;
  OptimizerConfig optimizer;
  SaaConfig saa;
  RunConfig run;

  Grid make_grid() const;
  std::shared_ptr<PriorModel> make_prior() const;
  std::shared_ptr<PriorModel> make_darcy_prior() const;
  std::shared_ptr<const SensorNetwork> make_sensors() const;
  Field make_probe_field() const;
  ReductionOptions make_reduction_options(double mu, int workers) const;
  PenaltyConfig make_penalty(double gamma) const;
  InnerSolveOptions make_inner_options() const;
  /// The default sweep when gamma_grid is empty: log-spaced so the
  /// resulting sensor counts span the interesting sparse range.
  std::vector<double> resolved_gamma_grid() const;

  void validate() const;
};

/// Strict parse: any unknown key is an error naming the offending path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& c);

}  // namespace oeduu
