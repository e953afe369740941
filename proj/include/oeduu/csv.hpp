#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

namespace oeduu {

/// CSV IO with round-trip-exact formatting (%.17g). All on-disk matrices
/// and fields in this project are plain CSV; manifests are JSON.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

/// Vectors are written one value per line.
void write_vector_csv(const std::string& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector_csv(const std::string& path);

std::string format_double(double x);

/// FNV-1a checksum of a file's bytes (archive determinism audits).
std::uint64_t file_checksum(const std::string& path);

}  // namespace oeduu
