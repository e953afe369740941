#include "oeduu/objective.hpp"
#include "oeduu/rng.hpp"

#include <Eigen/Dense>

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace oeduu;

namespace {

struct Fixture {
  Grid grid{11, 9, 1.5, 1.0};
  std::shared_ptr<PriorModel> prior;
  std::shared_ptr<const SensorNetwork> sensors;
  TransportConfig config;
  std::shared_ptr<ForwardOperator> op;

  Fixture() {
    Field mean(grid.num_nodes());
    for (int i = 0; i < grid.num_nodes(); ++i) mean[i] = 0.1;
    prior = std::make_shared<PriorModel>(grid, 0.008, 0.02, mean);
    sensors = std::make_shared<SensorNetwork>(
        SensorNetwork::lattice(grid, 4, 3, 0.2, 0.2));
    config.kappa = 1e-3;
    config.n_steps = 30;
    auto theta_prior = std::make_shared<PriorModel>(
        grid, 0.02, 0.5, Field::Constant(grid.num_nodes(), -2.3));
    op = std::make_shared<ForwardOperator>(
        grid, draw_sample(*theta_prior, {-1.0, 1.0}, 17), config, sensors);
  }

  Field bump() const {
    Field f(grid.num_nodes());
    for (int iy = 0; iy < grid.ny; ++iy) {
      for (int ix = 0; ix < grid.nx; ++ix) {
        const double dx = grid.node_x(ix) - 0.9;
        const double dy = grid.node_y(iy) - 0.5;
        f[grid.node(ix, iy)] = std::exp(-(dx * dx + dy * dy) / 0.04);
      }
    }
    return f;
  }

  Eigen::MatrixXd dense_cov() const {
    const Eigen::MatrixXd a = Eigen::MatrixXd(prior->op());
    const Eigen::MatrixXd ai = a.inverse();
    return ai * ai;
  }
};

}  // namespace

TEST_CASE("posterior map") {
  Fixture fx;
  const int s = fx.sensors->size();

  SUBCASE("w = 0 returns the prior mean exactly") {
    const Eigen::VectorXd data = Eigen::VectorXd::Ones(fx.op->obs_dim());
    const Field map = posterior_map(*fx.op, *fx.prior, NoiseModel{0.01},
                                    Eigen::VectorXd::Zero(s), data);
    CHECK((map - fx.prior->mean()).cwiseAbs().maxCoeff() <= 1e-14);
  }

  SUBCASE("small-noise limit recovers more than the prior mean does") {
    const Field truth = fx.bump();
    const Eigen::VectorXd data = fx.op->apply(truth);
    const Field map = posterior_map(*fx.op, *fx.prior, NoiseModel{1e-6},
                                    Eigen::VectorXd::Ones(s), data);
    const double map_err = (map - truth).norm() / truth.norm();
    const double prior_err = (fx.prior->mean() - truth).norm() / truth.norm();
    CHECK(map_err < prior_err);
  }

  SUBCASE("stationarity of the quadratic posterior objective") {
    const Field truth = fx.bump();
    const NoiseModel noise{0.05};
    Rng rng(3);
    Eigen::VectorXd w(s);
    for (int i = 0; i < s; ++i) w[i] = 0.2 + 0.8 * rng.uniform();
    const Eigen::VectorXd data =
        fx.op->apply(truth) + 0.01 * rng.gaussian_vector(fx.op->obs_dim());
    const Field map = posterior_map(*fx.op, *fx.prior, noise, w, data);

    const double inv_s2 = 1.0 / (noise.sigma * noise.sigma);
    const Eigen::VectorXd w_full = expand_design(w, fx.config.n_obs_times());
    const Eigen::VectorXd misfit = fx.op->apply(map) - data;
    const Eigen::VectorXd grad =
        inv_s2 * fx.op->apply_transpose(
                     (w_full.array() * misfit.array()).matrix()) +
        fx.prior->apply_op(fx.prior->apply_op(map - fx.prior->mean()));
    const double scale =
        inv_s2 * fx.op->apply_transpose(w_full.asDiagonal() * data).norm() +
        1.0;
    CHECK(grad.norm() <= 1e-8 * scale);
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(
        posterior_map(*fx.op, *fx.prior, NoiseModel{0.01},
                      Eigen::VectorXd::Zero(s + 1),
                      Eigen::VectorXd::Zero(fx.op->obs_dim())),
        std::invalid_argument);
  }
}

TEST_CASE("pointwise variance") {
  Fixture fx;
  const int s = fx.sensors->size();
  const NoiseModel noise{0.02};

  SUBCASE("w = 0 equals the prior variance") {
    const Field var = pointwise_variance(*fx.op, *fx.prior, noise,
                                         Eigen::VectorXd::Zero(s));
    const Eigen::MatrixXd cov = fx.dense_cov();
    for (int i = 0; i < fx.grid.num_nodes(); ++i) {
      CHECK(var[i] == doctest::Approx(cov(i, i)).epsilon(1e-8));
    }
  }

  SUBCASE("dense oracle") {
    Rng rng(5);
    Eigen::VectorXd w(s);
    for (int i = 0; i < s; ++i) w[i] = rng.uniform();
    const Field var = pointwise_variance(*fx.op, *fx.prior, noise, w);

    const Eigen::MatrixXd f = fx.op->assemble_dense();
    const Eigen::MatrixXd cov = fx.dense_cov();
    const double inv_s2 = 1.0 / (noise.sigma * noise.sigma);
    const Eigen::VectorXd w_full = expand_design(w, fx.config.n_obs_times());
    const Eigen::MatrixXd info =
        inv_s2 * f.transpose() * w_full.asDiagonal() * f + cov.inverse();
    const Eigen::MatrixXd post = info.inverse();
    for (int i = 0; i < fx.grid.num_nodes(); ++i) {
      CHECK(var[i] == doctest::Approx(post(i, i)).epsilon(1e-8));
    }
  }

  SUBCASE("nested designs only shrink the variance") {
    Rng rng(6);
    Eigen::VectorXd w1 = Eigen::VectorXd::Zero(s);
    for (int i = 0; i < s / 2; ++i) w1[i] = 1.0;
    Eigen::VectorXd w2 = Eigen::VectorXd::Ones(s);
    const Field v1 = pointwise_variance(*fx.op, *fx.prior, noise, w1);
    const Field v2 = pointwise_variance(*fx.op, *fx.prior, noise, w2);
    const Field v0 = pointwise_variance(*fx.op, *fx.prior, noise,
                                        Eigen::VectorXd::Zero(s));
    for (int i = 0; i < fx.grid.num_nodes(); ++i) {
      CHECK(v1[i] <= v0[i] + 1e-12);
      CHECK(v2[i] <= v1[i] + 1e-12);
      CHECK(v2[i] >= 0.0);
    }
  }
}

TEST_CASE("prior trace matches the dense covariance") {
  Fixture fx;
  const double tr = prior_trace(*fx.prior);
  CHECK(tr == doctest::Approx(fx.dense_cov().trace()).epsilon(1e-10));
}
