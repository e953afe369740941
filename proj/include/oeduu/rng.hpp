#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string_view>

namespace oeduu {

/// Derives an independent stream seed from (master, tag, index).
/// Phase tags ("saa", "eval", ...) keep sample populations disjoint by
/// construction; every derived seed is recorded in the run manifest.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index = 0);

/// Seeded RNG with an explicit Box-Muller gaussian.
/// std::normal_distribution is implementation-defined, so normals are
/// generated by hand to keep archives byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal.
  double gaussian();

  Eigen::VectorXd gaussian_vector(int n);
  /// Column-major fill, so the draw order is part of the format.
  Eigen::MatrixXd gaussian_matrix(int rows, int cols);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace oeduu
