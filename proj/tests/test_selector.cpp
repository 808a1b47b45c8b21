#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/LU>

#include "support.hpp"
#include "iss/errors.hpp"
#include "iss/selector/selector.hpp"

using namespace iss;
using namespace iss::selector;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct DensePosterior {
  VectorXd mean, variance;
};

/// Posterior by explicit inversion of the regularized kernel.
DensePosterior dense_posterior(const MatrixXd& z, const VectorXd& y, const MatrixXd& zt, const GpHyper<double>& h,
                               double jitter) {
  const auto n = z.rows();
  MatrixXd k(n, n), ks(zt.rows(), n);
  auto kern = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    double d2 = 0;
    for (Eigen::Index c = 0; c < a.size(); ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
    return h.signal_var * std::exp(-d2 / (2 * h.lengthscale * h.lengthscale));
  };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kern(z.row(i), z.row(j));
  for (Eigen::Index i = 0; i < zt.rows(); ++i)
    for (Eigen::Index j = 0; j < n; ++j) ks(i, j) = kern(zt.row(i), z.row(j));
  const MatrixXd inv = (k + (h.noise_var + jitter) * MatrixXd::Identity(n, n)).inverse();
  const double ybar = y.mean();
  DensePosterior p;
  p.mean = (ks * inv * (y.array() - ybar).matrix()).array() + ybar;
  p.variance.resize(zt.rows());
  for (Eigen::Index i = 0; i < zt.rows(); ++i)
    p.variance[i] = h.signal_var - (ks.row(i) * inv * ks.row(i).transpose())(0, 0);
  return p;
}

envs::Bounds box(VectorXd lo, VectorXd hi) { return envs::Bounds{std::move(lo), std::move(hi)}; }

} // namespace

TEST_CASE("rbf kernel matches its formula") {
  GpHyper<double> h;
  h.lengthscale = 0.7;
  h.signal_var = 2.5;
  MatrixXd a(2, 3), b(1, 3);
  a << 0, 0, 0, 1, -1, 0.5;
  b << 0.2, 0.1, -0.3;
  const MatrixXd k = rbf_kernel(a, b, h);
  CHECK(k(0, 0) == doctest::Approx(2.5 * std::exp(-(0.04 + 0.01 + 0.09) / (2 * 0.49))).epsilon(1e-15));
  CHECK(k(1, 0) == doctest::Approx(2.5 * std::exp(-(0.64 + 1.21 + 0.64) / (2 * 0.49))).epsilon(1e-15));
  CHECK(rbf_kernel(a, a, h).diagonal().isConstant(2.5));
}

TEST_CASE("gp posterior matches dense inversion") {
  std::mt19937_64 rng(17);
  GpHyper<double> h;
  h.lengthscale = 0.5;
  h.signal_var = 1.3;
  h.noise_var = 1e-2;
  for (int n = 1; n <= 5; ++n) {
    for (int d : {1, 2, 4}) {
      const MatrixXd z = iss::testing::random_matrix(n, d, rng);
      const VectorXd y = iss::testing::random_matrix(n, 1, rng, -3, 3);
      const MatrixXd zt = iss::testing::random_matrix(7, d, rng);
      const auto model = GpModel<double>::fit(z, y, h);
      const auto pred = model.predict(zt);
      const auto oracle = dense_posterior(z, y, zt, h, model.jitter_used());
      INFO("n=" << n << " d=" << d);
      CHECK((pred.mean - oracle.mean).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((pred.raw_variance - oracle.variance).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((pred.variance.array() >= 0).all());
    }
  }
}

TEST_CASE("two-point posterior in closed form") {
  GpHyper<double> h;
  h.lengthscale = 1.0;
  h.signal_var = 1.0;
  h.noise_var = 0.0;
  MatrixXd z(2, 1);
  z << 0.0, 1.0;
  VectorXd y(2);
  y << 1.0, 3.0;
  const auto model = GpModel<double>::fit(z, y, h);
  MatrixXd zt(1, 1);
  zt << 0.5;
  const double r = std::exp(-0.5), s = std::exp(-0.125), e = model.jitter_used();
  // Symmetric test point: centered targets (-1, 1) cancel.
  const auto p = model.predict(zt);
  CHECK(p.mean[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.raw_variance[0] == doctest::Approx(1.0 - 2 * s * s / (1.0 + e + r)).epsilon(1e-10));
}

TEST_CASE("near-noiseless gp interpolates its training points") {
  std::mt19937_64 rng(3);
  GpHyper<double> h;
  h.noise_var = 0.0;
  h.lengthscale = 0.4;
  const MatrixXd z = iss::testing::random_matrix(6, 2, rng);
  const VectorXd y = iss::testing::random_matrix(6, 1, rng);
  const auto model = GpModel<double>::fit(z, y, h);
  const auto p = model.predict(z);
  CHECK((p.mean - y).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(p.variance.maxCoeff() < 1e-5);
}

TEST_CASE("jitter escalates on duplicate inputs and fails past the cap") {
  GpHyper<double> h;
  h.noise_var = 0.0;
  h.jitter = 1e-12;
  MatrixXd z = MatrixXd::Zero(4, 2);
  VectorXd y(4);
  y << 1, 1, 1, 1;
  const auto model = GpModel<double>::fit(z, y, h);
  CHECK(model.jitter_used() >= 1e-12);
  CHECK(model.jitter_used() <= GpModel<double>::kMaxJitter);

  MatrixXd bad = z;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(GpModel<double>::fit(bad, y, h), NumericError);
  CHECK_THROWS_AS(GpModel<double>::fit(z, VectorXd::Ones(3), h), ShapeError);
  h.lengthscale = 0;
  CHECK_THROWS_AS(GpModel<double>::fit(z, y, h), DomainError);
}

TEST_CASE("two-branch rule") {
  VectorXd mean(4), var(4);
  mean << 0.1, 0.9, 0.9, 0.2;
  var << 0.3, 0.1, 0.5, 0.5;

  SUBCASE("variance above threshold picks the most uncertain, lowest index on ties") {
    const auto c = choose_index(mean, var, 0.4);
    CHECK(c.branch == Branch::variance);
    CHECK(c.index == 2);
  }
  SUBCASE("variance at the threshold is not above it") {
    const auto c = choose_index(mean, var, 0.5);
    CHECK(c.branch == Branch::mean);
    CHECK(c.index == 1);
  }
  SUBCASE("infinite threshold always exploits") {
    const auto c = choose_index(mean, var, std::numeric_limits<double>::infinity());
    CHECK(c.branch == Branch::mean);
  }
  SUBCASE("random property check") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 500; ++t) {
      const VectorXd m = iss::testing::random_matrix(9, 1, rng);
      const VectorXd v = iss::testing::random_matrix(9, 1, rng, 0, 1);
      const double thr = std::uniform_real_distribution<double>(0, 1)(rng);
      const auto c = choose_index(m, v, thr);
      if (v.maxCoeff() > thr) {
        CHECK(c.branch == Branch::variance);
        CHECK(v[c.index] == v.maxCoeff());
        for (Eigen::Index i = 0; i < c.index; ++i) CHECK(v[i] < v[c.index]);
      } else {
        CHECK(c.branch == Branch::mean);
        CHECK(m[c.index] == m.maxCoeff());
        for (Eigen::Index i = 0; i < c.index; ++i) CHECK(m[i] < m[c.index]);
      }
    }
  }
  CHECK_THROWS_AS(choose_index(VectorXd(), VectorXd(), 0.1), DomainError);
  CHECK_THROWS_AS(choose_index(mean, VectorXd::Zero(3), 0.1), ShapeError);
}

TEST_CASE("normalization round trip and clipping") {
  StateSelector sel(box(VectorXd::Constant(2, -2.0), (VectorXd(2) << 4.0, 1.0).finished()), SelectorConfig{}, 1);
  std::vector<envs::StateVector> states{{(VectorXd(2) << -2.0, 1.0).finished()},
                                        {(VectorXd(2) << 1.0, -0.5).finished()},
                                        {(VectorXd(2) << 0.3, 0.2).finished()}};
  const MatrixXd z = sel.normalize(states);
  CHECK(z(0, 0) == -1.0);
  CHECK(z(0, 1) == 1.0);
  CHECK(z(1, 0) == doctest::Approx(0.0));
  const auto back = sel.unnormalize(z);
  for (std::size_t i = 0; i < states.size(); ++i)
    CHECK((back[i].values - states[i].values).cwiseAbs().maxCoeff() < 1e-14);

  MatrixXd outside(1, 2);
  outside << 1.5, -3.0;
  const auto clipped = sel.unnormalize(outside).front();
  CHECK(clipped[0] == 4.0);
  CHECK(clipped[1] == -2.0);
  CHECK_THROWS_AS(sel.unnormalize(MatrixXd::Zero(1, 3)), ShapeError);
}

TEST_CASE("shifted candidates stay in the normalized box") {
  SelectorConfig cfg;
  cfg.pool_size = 40;
  cfg.shift_sigma = 0.8;
  cfg.resample_fraction = 0.25;
  StateSelector sel(box(VectorXd::Zero(3), VectorXd::Ones(3)), cfg, 2);
  CHECK((sel.pool().array().abs() <= 1.0).all());
  for (int i = 0; i < 20; ++i) {
    const MatrixXd z = sel.shift_candidates();
    CHECK(z.rows() == 40);
    CHECK((z.array().abs() <= 1.0).all());
  }

  cfg.shift_sigma = 0.0;
  StateSelector still(box(VectorXd::Zero(3), VectorXd::Ones(3)), cfg, 2);
  const MatrixXd changed = still.shift_candidates() - still.pool();
  int moved = 0;
  for (Eigen::Index r = 0; r < changed.rows(); ++r) moved += changed.row(r).cwiseAbs().maxCoeff() > 0;
  CHECK(moved == 10); // exactly round(0.25 * 40) rows redrawn
}

TEST_CASE("run_epoch follows the fit / select / advance cycle") {
  SelectorConfig cfg;
  cfg.pool_size = 16;
  const envs::Bounds b = box(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));

  SUBCASE("flat scores force the variance branch") {
    StateSelector sel(b, cfg, 4);
    const auto report = sel.run_epoch([](const auto& states, int) { return VectorXd::Constant(Eigen::Index(states.size()), 7.0); });
    CHECK_FALSE(report.standardized);
    CHECK(report.selection.branch == Branch::variance);
    CHECK(sel.epochs_run() == 1);
  }

  SUBCASE("scores are taken on the current pool and the pool advances") {
    StateSelector sel(b, cfg, 5);
    const MatrixXd before = sel.pool();
    MatrixXd scored;
    const auto report = sel.run_epoch([&](const auto& states, int epoch) {
      CHECK(epoch == 0);
      scored = sel.normalize(states);
      VectorXd y(Eigen::Index(states.size()));
      for (std::size_t i = 0; i < states.size(); ++i) y[Eigen::Index(i)] = states[i][0];
      return y;
    });
    CHECK((scored - before).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(report.standardized);
    CHECK_FALSE((sel.pool() - before).isZero());
    CHECK(report.score_max == doctest::Approx(before.col(0).maxCoeff()));
  }

  SUBCASE("a huge threshold exploits the best predicted state") {
    cfg.variance_threshold = std::numeric_limits<double>::infinity();
    cfg.shift_sigma = 0.0;
    cfg.resample_fraction = 0.0;
    StateSelector sel(b, cfg, 6);
    const auto report = sel.run_epoch([](const auto& states, int) {
      VectorXd y(Eigen::Index(states.size()));
      for (std::size_t i = 0; i < states.size(); ++i) y[Eigen::Index(i)] = -states[i].values.squaredNorm();
      return y;
    });
    CHECK(report.selection.branch == Branch::mean);
    // With no shift the candidates are the training points.
    Eigen::Index best;
    sel.pool().rowwise().squaredNorm().minCoeff(&best);
    CHECK(report.selection.index == best);
  }

  SUBCASE("identical seeds give identical selections") {
    auto score = [](const std::vector<envs::StateVector>& states, int epoch) {
      VectorXd y(Eigen::Index(states.size()));
      for (std::size_t i = 0; i < states.size(); ++i) y[Eigen::Index(i)] = std::sin(3 * states[i][0] + epoch) * states[i][1];
      return y;
    };
    StateSelector a(b, cfg, 9), c(b, cfg, 9);
    for (int e = 0; e < 5; ++e) {
      const auto ra = a.run_epoch(score), rc = c.run_epoch(score);
      CHECK(ra.selection.state == rc.selection.state);
      CHECK(ra.selection.branch == rc.selection.branch);
    }
  }

  SUBCASE("wrong score count") {
    StateSelector sel(b, cfg, 1);
    CHECK_THROWS_AS(sel.run_epoch([](const auto&, int) { return VectorXd::Zero(3); }), ShapeError);
  }
}

TEST_CASE("selector config validation") {
  SelectorConfig cfg;
  cfg.resample_fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = {};
  cfg.pool_size = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  CHECK_THROWS_AS(StateSelector(box(VectorXd::Zero(1), VectorXd::Zero(1)), SelectorConfig{}, 0), DomainError);
}
