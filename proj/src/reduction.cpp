#include "oeduu/reduction.hpp"

#include "oeduu/parallel.hpp"
#include "oeduu/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cstdio>
#include <limits>
#include <stdexcept>

namespace oeduu {

LinearMap preconditioned_map(const ForwardOperator& op,
                             const PriorModel& prior) {
  LinearMap map;
  map.rows = op.obs_dim();
  map.cols = op.param_dim();
  map.forward = [&op, &prior](const Eigen::VectorXd& v) {
    return op.apply(prior.apply_sqrt_cov(v));
  };
  map.adjoint = [&op, &prior](const Eigen::VectorXd& v) {
    return prior.apply_sqrt_cov(op.apply_transpose(v));
  };
  return map;
}

SampleSketch sketch_map(const LinearMap& map, int width, std::uint64_t seed) {
  if (width < 1) throw std::invalid_argument("sketch_map: width must be >= 1");
  SampleSketch s;
  s.width = width;
  s.omega_seed = derive_seed(seed, "omega");
  s.omega_hat_seed = derive_seed(seed, "omega_hat");
  Eigen::MatrixXd omega = Rng(s.omega_seed).gaussian_matrix(map.cols, width);
  Eigen::MatrixXd omega_hat =
      Rng(s.omega_hat_seed).gaussian_matrix(map.rows, width);
  s.range_probe.resize(map.rows, width);
  s.corange_probe.resize(map.cols, width);
  for (int j = 0; j < width; ++j) {
    s.range_probe.col(j) = map.forward(omega.col(j));
    s.corange_probe.col(j) = map.adjoint(omega_hat.col(j));
  }
  return s;
}

namespace {

int cut_index(const Eigen::VectorXd& sv, double mu, TruncationRule rule) {
  if (sv.size() == 0) return 0;
  const double top = sv[0];
  if (top <= 0.0) return 0;
  for (int j = 0; j < sv.size(); ++j) {
    if (sv[j] / top <= mu) {
      return rule == TruncationRule::FirstDrop ? j + 1 : j;
    }
  }
  return static_cast<int>(sv.size());
}

}  // namespace

CrfResult crf(const std::vector<SampleSketch>& sketches, double mu,
              TruncationRule rule) {
  if (sketches.empty()) throw std::invalid_argument("crf: no sketches");
  if (!(mu > 0.0 && mu < 1.0)) {
    throw std::invalid_argument("crf: mu must lie in (0, 1)");
  }
  const Eigen::Index rows = sketches.front().range_probe.rows();
  const Eigen::Index cols = sketches.front().corange_probe.rows();
  Eigen::Index total = 0;
  for (const auto& s : sketches) total += s.width;

  Eigen::MatrixXd range_all(rows, total);
  Eigen::MatrixXd corange_all(cols, total);
  Eigen::Index at = 0;
  for (const auto& s : sketches) {
    if (s.range_probe.rows() != rows || s.corange_probe.rows() != cols) {
      throw std::invalid_argument("crf: inconsistent sketch dimensions");
    }
    range_all.middleCols(at, s.width) = s.range_probe;
    corange_all.middleCols(at, s.width) = s.corange_probe;
    at += s.width;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd_obs(range_all, Eigen::ComputeThinU);
  Eigen::BDCSVD<Eigen::MatrixXd> svd_param(corange_all, Eigen::ComputeThinU);

  CrfResult r;
  r.sv_obs = svd_obs.singularValues();
  r.sv_param = svd_param.singularValues();
  int k = std::max(cut_index(r.sv_obs, mu, rule),
                   cut_index(r.sv_param, mu, rule));
  k = std::min<int>({k, static_cast<int>(svd_obs.matrixU().cols()),
                     static_cast<int>(svd_param.matrixU().cols())});
  r.k = k;
  r.basis_obs = svd_obs.matrixU().leftCols(k);
  r.basis_param = svd_param.matrixU().leftCols(k);
  return r;
}

Eigen::MatrixXd inner_matrix(const LinearMap& map,
                             const Eigen::MatrixXd& basis_obs,
                             const Eigen::MatrixXd& basis_param) {
  const int k = static_cast<int>(basis_obs.cols());
  Eigen::MatrixXd mapped(map.rows, k);
  for (int j = 0; j < k; ++j) {
    mapped.col(j) = map.forward(basis_param.col(j));
  }
  return basis_obs.transpose() * mapped;
}

Eigen::MatrixXd inner_matrix_single_pass(const SampleSketch& sketch,
                                         const Eigen::MatrixXd& basis_obs,
                                         const Eigen::MatrixXd& basis_param,
                                         int map_cols) {
  const int k = static_cast<int>(basis_obs.cols());
  const int rows = static_cast<int>(basis_obs.rows());
  Eigen::MatrixXd omega =
      Rng(sketch.omega_seed).gaussian_matrix(map_cols, sketch.width);
  Eigen::MatrixXd omega_hat =
      Rng(sketch.omega_hat_seed).gaussian_matrix(rows, sketch.width);

  // Normal equations of the stacked least squares:
  //   P*B + B*R = rhs,  P = X2 X2^T,  R = X1 X1^T  (both k x k PSD),
  // solved in the joint eigenbasis.
  const Eigen::MatrixXd x1 = basis_param.transpose() * omega;    // k x w
  const Eigen::MatrixXd r1 = basis_obs.transpose() * sketch.range_probe;
  const Eigen::MatrixXd x2 = basis_obs.transpose() * omega_hat;  // k x w
  const Eigen::MatrixXd r2 = basis_param.transpose() * sketch.corange_probe;

  const Eigen::MatrixXd p = x2 * x2.transpose();
  const Eigen::MatrixXd r = x1 * x1.transpose();
  const Eigen::MatrixXd rhs = r1 * x1.transpose() + x2 * r2.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(p), er(r);
  const Eigen::VectorXd lp = ep.eigenvalues(), lr = er.eigenvalues();
  const double scale =
      (lp.size() ? lp.maxCoeff() : 0.0) + (lr.size() ? lr.maxCoeff() : 0.0);
  const double floor = 1e-12 * (scale > 0 ? scale : 1.0);

  Eigen::MatrixXd core =
      ep.eigenvectors().transpose() * rhs * er.eigenvectors();
  bool regularized = false;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double denom = lp[i] + lr[j];
      if (denom < floor) {
        denom = floor;
        regularized = true;
      }
      core(i, j) /= denom;
    }
  }
  if (regularized) {
    std::fprintf(stderr,
                 "warning: single-pass core system is rank deficient; "
                 "applied ridge regularization\n");
  }
  return ep.eigenvectors() * core * er.eigenvectors().transpose();
}

Clustering cluster_observations(const std::vector<Eigen::VectorXd>& obs,
                                int n_clusters, std::uint64_t seed) {
  const int n = static_cast<int>(obs.size());
  if (n == 0) throw std::invalid_argument("cluster: no observations");
  if (n_clusters < 1 || n_clusters > n) {
    throw std::invalid_argument("cluster: need 1 <= clusters <= samples");
  }
  const Eigen::Index dim = obs.front().size();

  Clustering result;
  result.n_clusters = n_clusters;
  result.assignment.assign(n, 0);
  result.centroids.resize(dim, n_clusters);
  if (n_clusters == 1) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
    for (const auto& o : obs) c += o;
    result.centroids.col(0) = c / n;
    return result;
  }

  // k-means++ seeding
  Rng rng(seed);
  std::vector<int> centers;
  centers.push_back(static_cast<int>(rng.uniform() * n) % n);
  Eigen::VectorXd dist2(n);
  for (int i = 0; i < n; ++i) {
    dist2[i] = (obs[i] - obs[centers[0]]).squaredNorm();
  }
  while (static_cast<int>(centers.size()) < n_clusters) {
    const double total = dist2.sum();
    int pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total, acc = 0.0;
      for (; pick < n - 1; ++pick) {
        acc += dist2[pick];
        if (acc >= target) break;
      }
    } else {
      pick = static_cast<int>(centers.size()) % n;
    }
    centers.push_back(pick);
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], (obs[i] - obs[pick]).squaredNorm());
    }
  }
  for (int c = 0; c < n_clusters; ++c) {
    result.centroids.col(c) = obs[centers[c]];
  }

  // Lloyd iterations; strict less keeps ties at the lowest index.
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (obs[i] - result.centroids.col(0)).squaredNorm();
      for (int c = 1; c < n_clusters; ++c) {
        const double d = (obs[i] - result.centroids.col(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best != result.assignment[i]) {
        result.assignment[i] = best;
        changed = true;
      }
    }

    std::vector<int> counts(n_clusters, 0);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dim, n_clusters);
    for (int i = 0; i < n; ++i) {
      counts[result.assignment[i]]++;
      sums.col(result.assignment[i]) += obs[i];
    }
    for (int c = 0; c < n_clusters; ++c) {
      if (counts[c] > 0) {
        result.centroids.col(c) = sums.col(c) / counts[c];
      } else {
        // reseed an empty cluster from the farthest point
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double d =
              (obs[i] - result.centroids.col(result.assignment[i]))
                  .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        result.centroids.col(c) = obs[far];
        result.assignment[far] = c;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return result;
}

std::vector<ReducedForward> build_reduced_models(
    const std::vector<std::shared_ptr<const ForwardOperator>>& samples,
    const PriorModel& prior, const ReductionOptions& options,
    const Field& probe_field, std::uint64_t seed, Clustering* clustering_out) {
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw std::invalid_argument("build_reduced_models: no samples");
  if (options.n_clusters > n) {
    throw std::invalid_argument(
        "build_reduced_models: more clusters than samples");
  }
  if (probe_field.size() != samples.front()->param_dim() ||
      probe_field.norm() == 0.0) {
    throw std::invalid_argument("build_reduced_models: bad probe field");
  }

  Clustering clustering;
  if (options.n_clusters > 1) {
    std::vector<Eigen::VectorXd> probe_obs(n);
    parallel_for(n, options.workers, [&](int i) {
      probe_obs[i] = samples[i]->apply(probe_field);
    });
    clustering = cluster_observations(probe_obs, options.n_clusters,
                                      derive_seed(seed, "kmeans"));
  } else {
    clustering.n_clusters = 1;
    clustering.assignment.assign(n, 0);
  }
  if (clustering_out) *clustering_out = clustering;

  std::vector<SampleSketch> sketches(n);
  parallel_for(n, options.workers, [&](int i) {
    sketches[i] =
        sketch_map(preconditioned_map(*samples[i], prior),
                   options.sketch_width, derive_seed(seed, "sketch", i));
  });

  std::vector<std::shared_ptr<const ClusterBasis>> bases(clustering.n_clusters);
  for (int c = 0; c < clustering.n_clusters; ++c) {
    std::vector<SampleSketch> members;
    for (int i = 0; i < n; ++i) {
      if (clustering.assignment[i] == c) members.push_back(sketches[i]);
    }
    CrfResult cr = crf(members, options.mu, options.rule);
    auto basis = std::make_shared<ClusterBasis>();
    basis->basis_obs = std::move(cr.basis_obs);
    basis->basis_param = std::move(cr.basis_param);
    basis->sv_obs = std::move(cr.sv_obs);
    basis->sv_param = std::move(cr.sv_param);
    basis->cluster_id = c;
    basis->prior_gram = prior_gramian(basis->basis_param, prior);
    bases[c] = std::move(basis);
  }

  std::vector<ReducedForward> models(n);
  parallel_for(n, options.workers, [&](int i) {
    const auto& basis = bases[clustering.assignment[i]];
    ReducedForward rf;
    rf.basis = basis;
    rf.cluster_id = clustering.assignment[i];
    rf.sample_seed = samples[i]->sample().seed;
    if (options.mode == CoreMode::TwoPass) {
      rf.core = inner_matrix(preconditioned_map(*samples[i], prior),
                             basis->basis_obs, basis->basis_param);
    } else {
      rf.core =
          inner_matrix_single_pass(sketches[i], basis->basis_obs,
                                   basis->basis_param, samples[i]->param_dim());
    }
    models[i] = std::move(rf);
  });
  return models;
}

Eigen::MatrixXd prior_gramian(const Eigen::MatrixXd& basis_param,
                              const PriorModel& prior) {
  const int k = static_cast<int>(basis_param.cols());
  Eigen::MatrixXd cov_cols(basis_param.rows(), k);
  for (int j = 0; j < k; ++j) {
    cov_cols.col(j) = prior.apply_cov(basis_param.col(j));
  }
  Eigen::MatrixXd g = basis_param.transpose() * cov_cols;
  return 0.5 * (g + g.transpose());
}

ObservationGramians::ObservationGramians(Eigen::MatrixXd g, Eigen::MatrixXd h)
    : first(std::move(g)), second(std::move(h)) {
  if (first.rows() != first.cols() || second.rows() != first.rows() ||
      second.cols() != first.rows()) {
    throw std::invalid_argument("ObservationGramians: dimension mismatch");
  }
}

ObservationGramians gramians(const ReducedForward& model,
                             const Eigen::MatrixXd& qhat_prior_gram) {
  const Eigen::MatrixXd& q = model.basis->basis_obs;
  const Eigen::MatrixXd& b = model.core;
  ObservationGramians g;
  g.core_first = b * b.transpose();
  g.core_first = 0.5 * (g.core_first + g.core_first.transpose()).eval();
  const Eigen::MatrixXd sym_gram =
      0.5 * (qhat_prior_gram + qhat_prior_gram.transpose());
  g.core_second = b * sym_gram * b.transpose();
  g.core_second = 0.5 * (g.core_second + g.core_second.transpose()).eval();
  g.first = q * g.core_first * q.transpose();
  g.first = 0.5 * (g.first + g.first.transpose()).eval();
  g.second = q * g.core_second * q.transpose();
  g.second = 0.5 * (g.second + g.second.transpose()).eval();
  g.factor =
      std::shared_ptr<const Eigen::MatrixXd>(model.basis, &model.basis->basis_obs);
  g.has_lowrank = true;
  return g;
}

ObservationGramians gramians(const ReducedForward& model) {
  return gramians(model, model.basis->prior_gram);
}

}  // namespace oeduu
