#include "oeduu/objective.hpp"
#include "oeduu/rng.hpp"

#include <Eigen/Dense>

#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>

using namespace oeduu;

namespace {

/// Random well-conditioned SPD matrix via an orthogonal similarity.
Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double lo = 0.5,
                           double hi = 2.0) {
  Rng rng(seed);
  const Eigen::MatrixXd gauss = rng.gaussian_matrix(n, n);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd eigs(n);
  for (int i = 0; i < n; ++i) eigs[i] = rng.uniform(lo, hi);
  return q * eigs.asDiagonal() * q.transpose();
}

/// Dense synthetic instance: Gramians from an explicit (F, cov) pair,
/// carried alongside for parameter-space oracles.
struct DenseInstance {
  Eigen::MatrixXd f;    // d x n
  Eigen::MatrixXd cov;  // n x n SPD
  SaaProblem problem;

  DenseInstance(int s, int r, int n, int n_samples, double sigma,
                std::uint64_t seed) {
    problem.n_sensors = s;
    problem.n_times = r;
    problem.noise.sigma = sigma;
    const int d = s * r;
    Rng rng(seed);
    for (int i = 0; i < n_samples; ++i) {
      Eigen::MatrixXd fi = rng.gaussian_matrix(d, n) / std::sqrt(double(n));
      Eigen::MatrixXd cov_i = random_spd(n, derive_seed(seed, "cov", i));
      Eigen::MatrixXd g = fi * cov_i * fi.transpose();
      Eigen::MatrixXd h = fi * cov_i * cov_i * fi.transpose();
      problem.grams.emplace_back(0.5 * (g + g.transpose()),
                                 0.5 * (h + h.transpose()));
      if (i == 0) {
        f = fi;
        cov = cov_i;
      }
    }
    problem.validate();
  }

  /// tr[(sigma^{-2} F^T W F + cov^{-1})^{-1}] by direct dense inversion.
  double posterior_trace_oracle(const Eigen::VectorXd& w) const {
    const double inv_s2 = 1.0 / (problem.noise.sigma * problem.noise.sigma);
    const Eigen::VectorXd w_full = expand_design(w, problem.n_times);
    const Eigen::MatrixXd info = inv_s2 * f.transpose() *
                                     w_full.asDiagonal() * f +
                                 cov.inverse();
    return info.inverse().trace();
  }
};

Eigen::VectorXd random_design(int s, Rng& rng) {
  Eigen::VectorXd w(s);
  for (int i = 0; i < s; ++i) w[i] = rng.uniform();
  return w;
}

}  // namespace

TEST_CASE("design expansion layout is time-major") {
  Eigen::VectorXd w(3);
  w << 0.1, 0.5, 0.9;
  const Eigen::VectorXd full = expand_design(w, 2);
  REQUIRE(full.size() == 6);
  CHECK(full[0] == 0.1);
  CHECK(full[2] == 0.9);
  CHECK(full[3] == 0.1);
  CHECK(full[5] == 0.9);
}

TEST_CASE("s_matrix basics") {
  DenseInstance inst(4, 2, 15, 2, 0.1, 31);
  const int d = inst.problem.obs_dim();

  SUBCASE("identity at w = 0") {
    const Eigen::MatrixXd s =
        s_matrix(inst.problem, 0, Eigen::VectorXd::Zero(4));
    CHECK((s - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("diagonal Gramian case") {
    SaaProblem p;
    p.n_sensors = 3;
    p.n_times = 1;
    p.noise.sigma = 0.5;
    Eigen::VectorXd gdiag(3);
    gdiag << 1.0, 2.0, 3.0;
    p.grams.emplace_back(Eigen::MatrixXd(gdiag.asDiagonal()),
                         Eigen::MatrixXd(gdiag.asDiagonal()));
    const Eigen::MatrixXd s = s_matrix(p, 0, Eigen::VectorXd::Ones(3));
    for (int i = 0; i < 3; ++i) {
      CHECK(s(i, i) == doctest::Approx(1.0 + gdiag[i] / 0.25));
    }
  }

  SUBCASE("det(S) >= 1 via the symmetric similarity") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd w = random_design(4, rng);
      const Eigen::MatrixXd s = s_matrix(inst.problem, 0, w);
      // oracle: S is similar to I + s^{-2} W^{1/2} G W^{1/2}, which is
      // symmetric with eigenvalues >= 1
      const double inv_s2 = 1.0 / (0.1 * 0.1);
      const Eigen::VectorXd w_full = expand_design(w, 2);
      const Eigen::VectorXd sqrt_w = w_full.cwiseSqrt();
      const Eigen::MatrixXd sym =
          Eigen::MatrixXd::Identity(d, d) +
          inv_s2 * sqrt_w.asDiagonal() * inst.problem.grams[0].first *
              sqrt_w.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
      const double det_oracle = es.eigenvalues().array().log().sum();
      const double det_s = std::log(std::abs(s.determinant()));
      CHECK(det_s == doctest::Approx(det_oracle).epsilon(1e-8));
      CHECK(std::exp(det_s) >= 1.0 - 1e-10);
    }
  }
}

TEST_CASE("trace_update") {
  DenseInstance inst(5, 2, 30, 3, 0.15, 41);
  Rng rng(6);

  SUBCASE("zero design contributes nothing") {
    CHECK(trace_update(inst.problem, 0, Eigen::VectorXd::Zero(5)) == 0.0);
  }

  SUBCASE("parameter-space dense oracle") {
    for (int t = 0; t < 10; ++t) {
      const Eigen::VectorXd w = random_design(5, rng);
      const double observed = trace_update(inst.problem, 0, w);
      const double expected =
          inst.cov.trace() - inst.posterior_trace_oracle(w);
      CHECK(observed == doctest::Approx(expected).epsilon(1e-10));
    }
  }

  SUBCASE("monotone in the design") {
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd w1 = random_design(5, rng);
      Eigen::VectorXd w2 = w1;
      for (int i = 0; i < 5; ++i) w2[i] += (1.0 - w2[i]) * rng.uniform();
      const double u1 = trace_update(inst.problem, 0, w1);
      const double u2 = trace_update(inst.problem, 0, w2);
      CHECK(u1 <= u2 + 1e-10 * std::abs(u2));
    }
  }

  SUBCASE("invariant under joint sensor permutation") {
    const Eigen::VectorXd w = random_design(5, rng);
    // permute sensors: reverse order
    std::vector<int> perm{4, 3, 2, 1, 0};
    Eigen::VectorXd wp(5);
    for (int i = 0; i < 5; ++i) wp[i] = w[perm[i]];
    const int d = inst.problem.obs_dim();
    Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < 2; ++j) {
      for (int l = 0; l < 5; ++l) pm(j * 5 + l, j * 5 + perm[l]) = 1.0;
    }
    SaaProblem permuted = inst.problem;
    permuted.grams.clear();
    permuted.grams.emplace_back(
        Eigen::MatrixXd(pm * inst.problem.grams[0].first * pm.transpose()),
        Eigen::MatrixXd(pm * inst.problem.grams[0].second * pm.transpose()));
    CHECK(trace_update(inst.problem, 0, w) ==
          doctest::Approx(trace_update(permuted, 0, wp)).epsilon(1e-12));
  }
}

TEST_CASE("objective value") {
  DenseInstance inst(4, 3, 25, 4, 0.1, 51);
  Rng rng(8);

  SUBCASE("zero design") {
    CHECK(objective_value(inst.problem, Eigen::VectorXd::Zero(4)) == 0.0);
  }

  SUBCASE("duplicated samples average to the single-sample value") {
    SaaProblem dup;
    dup.n_sensors = 4;
    dup.n_times = 3;
    dup.noise = inst.problem.noise;
    dup.grams = {inst.problem.grams[0], inst.problem.grams[0],
                 inst.problem.grams[0]};
    SaaProblem single = dup;
    single.grams = {inst.problem.grams[0]};
    const Eigen::VectorXd w = random_design(4, rng);
    CHECK(objective_value(dup, w) ==
          doctest::Approx(objective_value(single, w)).epsilon(1e-14));
  }

  SUBCASE("midpoint convexity on random pairs") {
    for (int t = 0; t < 100; ++t) {
      const Eigen::VectorXd w1 = random_design(4, rng);
      const Eigen::VectorXd w2 = random_design(4, rng);
      const double mid = objective_value(inst.problem, 0.5 * (w1 + w2));
      const double avg = 0.5 * (objective_value(inst.problem, w1) +
                                objective_value(inst.problem, w2));
      CHECK(mid <= avg + 1e-10 * std::abs(avg));
    }
  }

  SUBCASE("bounded below by -tr[cov]") {
    // single-sample problem where the carried (f, cov) pair is exact
    SaaProblem single = inst.problem;
    single.grams = {inst.problem.grams[0]};
    const double bound = -inst.cov.trace();
    CHECK(objective_value(single, Eigen::VectorXd::Ones(4)) >= bound - 1e-10);
  }

  SUBCASE("workers do not change the value") {
    const Eigen::VectorXd w = random_design(4, rng);
    CHECK(objective_value(inst.problem, w, EvalRoute::Auto, 1) ==
          objective_value(inst.problem, w, EvalRoute::Auto, 2));
  }
}

TEST_CASE("objective gradient") {
  DenseInstance inst(5, 2, 20, 3, 0.1, 61);
  Rng rng(13);

  SUBCASE("closed form at w = 0") {
    const Eigen::VectorXd g =
        objective_gradient(inst.problem, Eigen::VectorXd::Zero(5));
    const double inv_s2 = 1.0 / (0.1 * 0.1);
    for (int l = 0; l < 5; ++l) {
      double expected = 0.0;
      for (const auto& gram : inst.problem.grams) {
        for (int j = 0; j < 2; ++j) {
          expected -= inv_s2 * gram.second(j * 5 + l, j * 5 + l);
        }
      }
      expected /= inst.problem.size();
      CHECK(g[l] == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  SUBCASE("matches central finite differences") {
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd w(5);
      for (int i = 0; i < 5; ++i) w[i] = 0.2 + 0.6 * rng.uniform();
      const Eigen::VectorXd g = objective_gradient(inst.problem, w);
      const double step = 1e-5;
      Eigen::VectorXd fd(5);
      for (int i = 0; i < 5; ++i) {
        Eigen::VectorXd wp = w, wm = w;
        wp[i] += step;
        wm[i] -= step;
        fd[i] = (objective_value(inst.problem, wp) -
                 objective_value(inst.problem, wm)) /
                (2 * step);
      }
      CHECK((fd - g).norm() / g.norm() <= 1e-6);
    }
  }

  SUBCASE("gradient is nonpositive everywhere") {
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd w = random_design(5, rng);
      const Eigen::VectorXd g = objective_gradient(inst.problem, w);
      CHECK(g.maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("dense and low-rank routes agree") {
  // Build genuine low-rank Gramians through a synthetic basis.
  const int d = 12, k = 5;
  Rng rng(71);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.gaussian_matrix(d, k));
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  const Eigen::MatrixXd b = rng.gaussian_matrix(k, k);
  const Eigen::MatrixXd gram_k = random_spd(k, 3, 0.2, 1.5);

  auto basis = std::make_shared<ClusterBasis>();
  basis->basis_obs = q;
  basis->basis_param = Eigen::MatrixXd::Identity(20, k);
  basis->prior_gram = gram_k;
  ReducedForward rf;
  rf.basis = basis;
  rf.core = b;
  ObservationGramians grams = gramians(rf);
  REQUIRE(grams.has_lowrank);

  SaaProblem p;
  p.n_sensors = 4;
  p.n_times = 3;
  p.noise.sigma = 0.07;
  p.grams = {grams, grams};

  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd w = random_design(4, rng);
    const double dense = trace_update(p, 0, w, EvalRoute::Dense);
    const double lowrank = trace_update(p, 0, w, EvalRoute::LowRank);
    CHECK(lowrank == doctest::Approx(dense).epsilon(1e-10));

    const Eigen::VectorXd gd = objective_gradient(p, w, EvalRoute::Dense);
    const Eigen::VectorXd gl = objective_gradient(p, w, EvalRoute::LowRank);
    CHECK((gd - gl).norm() <= 1e-10 * (gd.norm() + 1e-30));
  }

  SUBCASE("low-rank route requires factors") {
    SaaProblem stripped = p;
    stripped.grams = {ObservationGramians(grams.first, grams.second)};
    CHECK_THROWS_AS(
        trace_update(stripped, 0, Eigen::VectorXd::Ones(4), EvalRoute::LowRank),
        std::invalid_argument);
  }
}

TEST_CASE("noise sweep keeps all structural properties") {
  for (double sigma : {1e-3, 1e-2, 1e-1}) {
    DenseInstance inst(3, 2, 15, 2, sigma, 81);
    Rng rng(9);
    const Eigen::VectorXd w = random_design(3, rng);
    const double tu = trace_update(inst.problem, 0, w);
    CHECK(tu >= 0.0);
    const double expected = inst.cov.trace() - inst.posterior_trace_oracle(w);
    CHECK(tu == doctest::Approx(expected).epsilon(1e-9));
  }
}
