#pragma once

#include "oeduu/prior.hpp"
#include "oeduu/transport.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace oeduu {

/// Generic linear map interface used by the sketching code, so synthetic
/// operators can exercise the same paths as PDE-backed ones.
struct LinearMap {
  int rows = 0, cols = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> adjoint;
};

/// The prior-preconditioned map F * cov^{1/2} of one forward operator.
LinearMap preconditioned_map(const ForwardOperator& op, const PriorModel& prior);

/// Random range probes of one map: Y = A*Omega (rows x width) and
/// Yhat = A^T*OmegaHat (cols x width). The Gaussian test matrices are
/// reproducible from the stored seeds.
struct SampleSketch {
  Eigen::MatrixXd range_probe;    // rows x width
  Eigen::MatrixXd corange_probe;  // cols x width
  std::uint64_t omega_seed = 0;
  std::uint64_t omega_hat_seed = 0;
  int width = 0;
};

SampleSketch sketch_map(const LinearMap& map, int width, std::uint64_t seed);

/// Where to cut the composite SVD given the tolerance mu.
/// FirstDrop keeps columns up to and including the first singular value
/// with sigma_j/sigma_1 <= mu; StrictCount keeps exactly the columns
/// above the threshold.
enum class TruncationRule { FirstDrop, StrictCount };

struct CrfResult {
  Eigen::MatrixXd basis_obs;    // d x k, orthonormal columns
  Eigen::MatrixXd basis_param;  // n x k, orthonormal columns
  Eigen::VectorXd sv_obs;       // singular values of the stacked range probes
  Eigen::VectorXd sv_param;
  int k = 0;
};

/// Composite randomized range finder: SVDs of the horizontally stacked
/// probes of all samples; both bases are truncated to the common k
/// (the larger of the two per-side cut indices).
CrfResult crf(const std::vector<SampleSketch>& sketches, double mu,
              TruncationRule rule = TruncationRule::FirstDrop);

/// Two-pass core: B = Q^T (A Qhat), costing k applications of the map.
Eigen::MatrixXd inner_matrix(const LinearMap& map,
                             const Eigen::MatrixXd& basis_obs,
                             const Eigen::MatrixXd& basis_param);

/// Single-pass core from the retained sketches alone: the joint least
/// squares of B*(Qhat^T Omega) = Q^T Y and B^T*(Q^T OmegaHat) = Qhat^T Yhat,
/// solved via the normal (Sylvester) equations. No further map
/// applications. Near-singular systems are ridge-regularized with a
/// warning.
Eigen::MatrixXd inner_matrix_single_pass(const SampleSketch& sketch,
                                         const Eigen::MatrixXd& basis_obs,
                                         const Eigen::MatrixXd& basis_param,
                                         int map_cols);

struct Clustering {
  std::vector<int> assignment;  // one id in [0, n_clusters) per sample
  Eigen::MatrixXd centroids;    // obs_dim x n_clusters
  int n_clusters = 1;
};

/// Lloyd k-means with k-means++ seeding on observation vectors; ties go
/// to the lowest cluster index and empty clusters are reseeded from the
/// farthest point, so the result is deterministic per seed.
Clustering cluster_observations(const std::vector<Eigen::VectorXd>& obs,
                                int n_clusters, std::uint64_t seed);

/// A shared per-cluster reduction basis plus the cached k x k prior
/// Gramian Qhat^T cov Qhat (the only remaining prior-solve cost).
struct ClusterBasis {
  Eigen::MatrixXd basis_obs;
  Eigen::MatrixXd basis_param;
  Eigen::VectorXd sv_obs;
  Eigen::VectorXd sv_param;
  Eigen::MatrixXd prior_gram;  // k x k, symmetric
  int cluster_id = 0;
};

/// Reduced surrogate of one prior-preconditioned forward map:
/// m -> Q * core * (Qhat^T m), tagged with its cluster.
struct ReducedForward {
  std::shared_ptr<const ClusterBasis> basis;
  Eigen::MatrixXd core;  // k x k
  int cluster_id = 0;
  std::uint64_t sample_seed = 0;
};

enum class CoreMode { TwoPass, SinglePass };

struct ReductionOptions {
  double mu = 2e-3;        ///< singular value truncation tolerance, in (0,1)
  int sketch_width = 40;   ///< columns per sample sketch
  int n_clusters = 1;
  CoreMode mode = CoreMode::TwoPass;
  TruncationRule rule = TruncationRule::FirstDrop;
  int workers = 1;
};

/// Full reduction pipeline: cluster on probe observations, run the range
/// finder per cluster, cache prior Gramians, and compute one core per
/// sample against its cluster basis.
std::vector<ReducedForward> build_reduced_models(
    const std::vector<std::shared_ptr<const ForwardOperator>>& samples,
    const PriorModel& prior, const ReductionOptions& options,
    const Field& probe_field, std::uint64_t seed,
    Clustering* clustering_out = nullptr);

/// Observation-space Gramians of one sample: G ~ F cov F^T and
/// H ~ F cov^2 F^T. Dense forms are always materialized; low-rank
/// factors (shared basis + k x k cores) are kept when available so the
/// objective can use the cheap evaluation route.
struct ObservationGramians {
  Eigen::MatrixXd first;   // G, d x d symmetric PSD
  Eigen::MatrixXd second;  // H, d x d symmetric PSD

  // Optional low-rank factorization: G = Q core_g Q^T, H = Q core_h Q^T.
  std::shared_ptr<const Eigen::MatrixXd> factor;  // d x k
  Eigen::MatrixXd core_first;
  Eigen::MatrixXd core_second;
  bool has_lowrank = false;

  ObservationGramians() = default;
  ObservationGramians(Eigen::MatrixXd g, Eigen::MatrixXd h);
};

/// Gramians from a reduced model and the k x k prior Gramian.
ObservationGramians gramians(const ReducedForward& model,
                             const Eigen::MatrixXd& qhat_prior_gram);
/// Convenience overload using the basis' cached prior Gramian.
ObservationGramians gramians(const ReducedForward& model);

/// Qhat^T cov Qhat with k prior solve pairs.
Eigen::MatrixXd prior_gramian(const Eigen::MatrixXd& basis_param,
                              const PriorModel& prior);

}  // namespace oeduu
