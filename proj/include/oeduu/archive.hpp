#pragma once

#include "oeduu/config.hpp"
#include "oeduu/darcy.hpp"
#include "oeduu/reduction.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace oeduu {

/// Everything one reduction pass produces, in memory. Exact operators
/// are optional: optimization only needs the Gramians; validation
/// rebuilds operators from the recorded sample seeds.
struct RomBundle {
  ExperimentConfig config;
  std::string phase_tag;  ///< seed stream: "saa" or "eval"
  double mu = 0.0;
  std::uint64_t master_seed = 0;
  std::shared_ptr<PriorModel> prior;
  std::shared_ptr<const SensorNetwork> sensors;
  std::vector<std::uint64_t> sample_seeds;
  std::vector<double> t0s;
  Clustering clustering;
  std::vector<ReducedForward> models;
  std::vector<ObservationGramians> grams;
  std::vector<std::shared_ptr<const ForwardOperator>> operators;  ///< may be empty

  int n_sensors() const { return sensors->size(); }
  std::vector<int> basis_sizes() const;
};

/// Writes the bundle as CSV matrices plus a JSON manifest; sample fields
/// are exported alongside. Data-file checksums go into the manifest so
/// rerun determinism is auditable. Returns the manifest path.
std::string save_rom(const RomBundle& bundle, const std::string& dir,
                     bool export_sample_fields = true);

/// Reloads a bundle (without exact operators) and verifies checksums.
RomBundle load_rom(const std::string& dir);

/// Serializes one uncertainty realization to CSV fields + metadata.
void save_sample(const UncertainSample& sample, const Grid& grid,
                 const std::string& dir);

/// Combined checksum over the archive's data files.
std::uint64_t archive_checksum(const std::string& dir);

}  // namespace oeduu
