#include "oeduu/grid.hpp"
#include "oeduu/prior.hpp"
#include "oeduu/rng.hpp"

#include <Eigen/Dense>

#include <doctest.h>

using namespace oeduu;

namespace {

Eigen::MatrixXd dense_op(const PriorModel& prior) {
  return Eigen::MatrixXd(prior.op());
}

Eigen::MatrixXd dense_cov(const PriorModel& prior) {
  const Eigen::MatrixXd a = dense_op(prior);
  const Eigen::MatrixXd ainv = a.inverse();
  return ainv * ainv;
}

}  // namespace

TEST_CASE("grid basics and interpolation") {
  Grid grid(5, 4, 1.5, 1.0);
  CHECK(grid.hx() == doctest::Approx(1.5 / 4));
  CHECK(grid.hy() == doctest::Approx(1.0 / 3));
  CHECK(grid.num_nodes() == 20);
  CHECK_THROWS_AS(Grid(2, 5, 1.0, 1.0), std::invalid_argument);

  SUBCASE("weight 1 exactly on a node") {
    const InterpStencil s = interp_weights(grid, grid.node_x(2), grid.node_y(1));
    double at_node = 0.0, total = 0.0;
    for (int c = 0; c < 4; ++c) {
      total += s.weights[c];
      if (s.nodes[c] == grid.node(2, 1)) at_node += s.weights[c];
    }
    CHECK(at_node == doctest::Approx(1.0));
    CHECK(total == doctest::Approx(1.0));
  }

  SUBCASE("four quarters at a cell center") {
    const InterpStencil s =
        interp_weights(grid, 0.5 * (grid.node_x(1) + grid.node_x(2)),
                       0.5 * (grid.node_y(1) + grid.node_y(2)));
    for (int c = 0; c < 4; ++c) CHECK(s.weights[c] == doctest::Approx(0.25));
  }

  SUBCASE("linear reproduction at random points") {
    Rng rng(42);
    auto linear = [](double x, double y) { return 0.7 + 1.3 * x - 2.1 * y; };
    Field f(grid.num_nodes());
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        f[grid.node(ix, iy)] = linear(grid.node_x(ix), grid.node_y(iy));
      }
    }
    for (int t = 0; t < 50; ++t) {
      const double x = rng.uniform(0.0, grid.extent_x);
      const double y = rng.uniform(0.0, grid.extent_y);
      const InterpStencil s = interp_weights(grid, x, y);
      double v = 0.0, total = 0.0;
      for (int c = 0; c < 4; ++c) {
        CHECK(s.weights[c] >= 0.0);
        total += s.weights[c];
        v += s.weights[c] * f[s.nodes[c]];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(v == doctest::Approx(linear(x, y)).epsilon(1e-14));
    }
  }

  SUBCASE("outside the domain") {
    CHECK_THROWS_AS(interp_weights(grid, -0.1, 0.5), std::domain_error);
    CHECK_THROWS_AS(interp_weights(grid, 0.5, 1.2), std::domain_error);
  }
}

TEST_CASE("robin coefficient matches the closed form") {
  // beta = (rho/1.42)*sqrt(delta/rho) at the reference parameters
  CHECK(PriorModel::robin_coefficient(0.008, 0.02) ==
        doctest::Approx(0.0089078243948405057).epsilon(1e-12));
}

TEST_CASE("prior operator structure") {
  Grid grid(9, 7, 1.5, 1.0);
  PriorModel prior(grid, 0.008, 0.02, Field::Zero(grid.num_nodes()));

  SUBCASE("exact symmetry") {
    const Eigen::MatrixXd a = dense_op(prior);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("positive definite on grids up to 20x20") {
    for (int n : {5, 12, 20}) {
      Grid g(n, n, 1.0, 1.0);
      PriorModel p(g, 0.05, 0.3, Field::Zero(g.num_nodes()));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_op(p));
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
  }

  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(PriorModel(grid, -1.0, 0.02, Field::Zero(grid.num_nodes())),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        PriorModel(grid, 0.008, std::nan(""), Field::Zero(grid.num_nodes())),
        std::invalid_argument);
  }
}

TEST_CASE("reaction-dominated identity away from the boundary") {
  // With beta = 0 the operator has no Robin term; we emulate the variant
  // by a tiny rho so the reaction term dominates.
  Grid grid(21, 21, 1.0, 1.0);
  const double rho = 1e-6, delta = 2.0, c = 0.7;
  PriorModel prior(grid, rho, delta, Field::Zero(grid.num_nodes()));
  const Field result =
      prior.solve(Field::Constant(grid.num_nodes(), delta * c));
  for (int iy = 3; iy < grid.ny - 3; ++iy) {
    for (int ix = 3; ix < grid.nx - 3; ++ix) {
      CHECK(result[grid.node(ix, iy)] == doctest::Approx(c).epsilon(1e-3));
    }
  }
}

TEST_CASE("covariance applications") {
  Grid grid(8, 6, 1.5, 1.0);
  PriorModel prior(grid, 0.008, 0.02, Field::Zero(grid.num_nodes()));
  const int n = grid.num_nodes();
  Rng rng(7);

  SUBCASE("zero maps to zero") {
    CHECK(prior.apply_cov(Eigen::VectorXd::Zero(n)).norm() == 0.0);
    CHECK(prior.apply_sqrt_cov(Eigen::VectorXd::Zero(n)).norm() == 0.0);
  }

  SUBCASE("apply_cov inverts A^2") {
    const Eigen::VectorXd u = rng.gaussian_vector(n);
    const Eigen::VectorXd v = prior.apply_op(prior.apply_op(u));
    const Eigen::VectorXd back = prior.apply_cov(v);
    CHECK((back - u).norm() / u.norm() <= 1e-10);
  }

  SUBCASE("round trip through the same factorization") {
    const Eigen::VectorXd v = rng.gaussian_vector(n);
    const Eigen::VectorXd round =
        prior.apply_op(prior.apply_op(prior.apply_cov(v)));
    CHECK((round - v).norm() / v.norm() <= 1e-10);
  }

  SUBCASE("sqrt twice equals cov") {
    const Eigen::VectorXd v = rng.gaussian_vector(n);
    const Eigen::VectorXd twice =
        prior.apply_sqrt_cov(prior.apply_sqrt_cov(v));
    const Eigen::VectorXd cov = prior.apply_cov(v);
    CHECK((twice - cov).norm() / cov.norm() <= 1e-12);
  }

  SUBCASE("self-adjointness") {
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd u = rng.gaussian_vector(n);
      const Eigen::VectorXd v = rng.gaussian_vector(n);
      const double lhs = prior.apply_cov(u).dot(v);
      const double rhs = u.dot(prior.apply_cov(v));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }

  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(prior.apply_cov(Eigen::VectorXd::Zero(n + 1)),
                    std::invalid_argument);
  }
}

TEST_CASE("covariance trace matches dense inversion on a 5x5 grid") {
  Grid grid(5, 5, 1.0, 1.0);
  PriorModel prior(grid, 0.05, 0.4, Field::Zero(grid.num_nodes()));
  const Eigen::MatrixXd cov = dense_cov(prior);
  double applied_trace = 0.0;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(grid.num_nodes());
  for (int i = 0; i < grid.num_nodes(); ++i) {
    e[i] = 1.0;
    applied_trace += prior.apply_cov(e)[i];
    e[i] = 0.0;
  }
  CHECK(applied_trace == doctest::Approx(cov.trace()).epsilon(1e-10));
}

TEST_CASE("sample_field (sqrt-cov sqrt-cov^T = cov verified densely on 4x4)") {
  Grid grid(4, 4, 1.0, 1.0);
  PriorModel prior(grid, 0.05, 0.4, Field::Zero(grid.num_nodes()));
  const Eigen::MatrixXd a = dense_op(prior);
  const Eigen::MatrixXd sqrt_cov = a.inverse();
  const Eigen::MatrixXd product = sqrt_cov * sqrt_cov.transpose();
  CHECK((product - dense_cov(prior)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("field sampling statistics") {
  Grid grid(4, 4, 1.0, 1.0);
  Field mean(grid.num_nodes());
  for (int i = 0; i < grid.num_nodes(); ++i) mean[i] = 0.3 * i;
  PriorModel prior(grid, 0.05, 0.4, mean);
  const int n = grid.num_nodes();

  SUBCASE("determinism") {
    CHECK(prior.sample(123) == prior.sample(123));
    CHECK(prior.sample(123) != prior.sample(124));
  }

  SUBCASE("sample mean within 3 standard errors") {
    const int draws = 10000;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < draws; ++t) acc += prior.sample(derive_seed(5, "mc", t));
    acc /= draws;
    const Eigen::MatrixXd cov = dense_cov(prior);
    for (int i = 0; i < n; ++i) {
      const double se = std::sqrt(cov(i, i) / draws);
      CHECK(std::abs(acc[i] - mean[i]) <= 3.0 * se);
    }
  }

  SUBCASE("sample covariance within 5 standard errors entrywise") {
    const int draws = 10000;
    Eigen::MatrixXd devs(n, draws);
    for (int t = 0; t < draws; ++t) {
      devs.col(t) = prior.sample(derive_seed(9, "cov", t)) - mean;
    }
    const Eigen::MatrixXd emp = devs * devs.transpose() / (draws - 1);
    const Eigen::MatrixXd cov = dense_cov(prior);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double se =
            std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / draws);
        CHECK(std::abs(emp(i, j) - cov(i, j)) <= 5.0 * se);
      }
    }
  }
}
