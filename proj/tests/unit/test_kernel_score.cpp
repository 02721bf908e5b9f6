#include <cmath>
#include <numbers>

#include "doctest.h"
#include "tailscore/kernel_score.hpp"
#include "tailscore/oracle.hpp"

using namespace tailscore;

namespace {
const double kT = 1.0 / (2.0 * std::numbers::pi);
}

TEST_CASE("single-sample kernel values") {
  const Matrix one(1, 1, 0.0);
  const KdeScoreModel m(one, kT, 0.01);
  const double x0[1] = {0.0}, x1[1] = {1.0};
  CHECK(m.density(x0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.density(x1) == doctest::Approx(std::exp(-std::numbers::pi)).epsilon(1e-14));
  CHECK(m.grad_density(x0)[0] == 0.0);
  CHECK(m.grad_density(x1)[0] == doctest::Approx(-2.0 * std::numbers::pi * std::exp(-std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("threshold formula") {
  CHECK(default_threshold(10, 1, kT) == doctest::Approx(std::log(10.0) / 10.0).epsilon(1e-15));
  CHECK_THROWS(default_threshold(1, 1, 1.0));
  CHECK_THROWS(KdeScoreModel(Matrix(1, 1, 0.0), 1.0));
}

TEST_CASE("thresholded score branches") {
  const Matrix ten(10, 1, std::vector<double>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const KdeScoreModel m(ten, kT);
  CHECK(m.threshold_rho() == doctest::Approx(0.2302585093));
  // p̂(x) = exp(-π x²) = 0.5 sits above ρ
  const double xa[1] = {std::sqrt(std::log(2.0) / std::numbers::pi)};
  double s[1];
  const auto e = m.evaluate(xa, {}, s);
  CHECK(e.density == doctest::Approx(0.5));
  CHECK(e.above_threshold);
  CHECK(s[0] == doctest::Approx(-2.0 * std::numbers::pi * xa[0]));
  const double far[1] = {5.0};
  CHECK(m.score(far)[0] == 0.0);
  const double very_far[1] = {1e6};
  CHECK(m.score(very_far)[0] == 0.0);
  CHECK(m.density(very_far) == 0.0);
}

TEST_CASE("score is finite everywhere and nonzero only above the threshold") {
  Stream rng(5);
  const Matrix data = make_student_t(3.0, 1).sample(rng, 300);
  for (double t : {1e-4, 0.05, 2.0}) {
    const KdeScoreModel m(data, t);
    for (int i = 0; i <= 2000; ++i) {
      const double x[1] = {-1e3 + i};
      double s[1];
      const auto e = m.evaluate(x, {}, s);
      CHECK(std::isfinite(s[0]));
      if (s[0] != 0.0) CHECK(e.density >= m.threshold_rho());
    }
  }
}

TEST_CASE("two-dimensional gradient agrees with finite differences") {
  Stream rng(9);
  const KdeScoreModel m(make_gaussian(2).sample(rng, 100), 0.3);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> x{rng.normal(), rng.normal()};
    const auto g = m.grad_density(x);
    for (int j = 0; j < 2; ++j) {
      auto xp = x, xm = x;
      xp[j] += 1e-6;
      xm[j] -= 1e-6;
      const double fd = (m.density(xp) - m.density(xm)) / 2e-6;
      CHECK(std::abs(fd - g[j]) <= 1e-6 * std::max(std::abs(g[j]), 1e-2));
    }
  }
}

TEST_CASE("large-sample estimates near the oracle") {
  Stream rng(11);
  const Matrix data = make_gaussian(1).sample(rng, 10000);
  const KdeScoreModel m(data, 0.5);
  const double x[1] = {1.0};
  CHECK(std::abs(m.score(x)[0] + 1.0 / 1.5) < 0.05);
  const KdeScoreModel m1(data, 1.0);
  const double z[1] = {0.0};
  CHECK(std::abs(m1.density(z) - 1.0 / std::sqrt(4.0 * std::numbers::pi)) < 0.01);
}

TEST_CASE("order kernels") {
  for (int l = 1; l <= 6; ++l) {
    CAPTURE(l);
    const OrderKernel k(l);
    CHECK(std::abs(k.moment(0) - 1.0) < 1e-10);
    for (int j = 1; j <= l; ++j) CHECK(std::abs(k.moment(j)) < 1e-10);
    CHECK(k(1.0) == 0.0);
    CHECK(k(-1.5) == 0.0);
  }
  CHECK_THROWS(OrderKernel(0));
  CHECK_THROWS(OrderKernel(7));
}

TEST_CASE("decoupled estimator") {
  DecoupledScoreModel::Params p;
  p.beta = 1.0;
  p.bandwidth = 1.0;
  const DecoupledScoreModel one(Matrix(1, 1, 0.0), 0.0, p);
  const double z[1] = {0.0};
  CHECK(one.density(z) == doctest::Approx(OrderKernel(1)(0.0)));

  Stream rng(17);
  const std::size_t n = 10000;
  DecoupledScoreModel::Params q;
  q.beta = 3.0;
  const DecoupledScoreModel m(make_gaussian(1).sample(rng, n), 0.0, q);
  CHECK(m.bandwidth() == doctest::Approx(std::pow(double(n), -1.0 / 7.0)));
  CHECK(m.kernel().order() == 3);
  const double bias = bias_constant(m.kernel(), 1, 3.0, 1.0) * std::pow(m.bandwidth(), 3.0);
  const double se = std::sqrt(0.4 * 1.2 / (n * m.bandwidth()));
  CHECK(std::abs(m.density(z) - 0.3989422804) < 3.0 * (bias + se));

  const DecoupledScoreModel mt = m.at(0.2);
  const double far[1] = {40.0};
  CHECK(mt.score(far)[0] == 0.0);
  CHECK_THROWS_AS(DecoupledScoreModel(make_gaussian(3).sample(rng, 10), 0.1, q), CapabilityError);
}

TEST_CASE("smoothed kernel at t = 0 is the scaled kernel") {
  const OrderKernel k(2);
  for (double z : {-0.3, 0.0, 0.7}) {
    double v, dv;
    DecoupledScoreModel::smoothed_kernel_1d(k, 0.5, 0.0, z, v, dv);
    CHECK(v == doctest::Approx(k(z / 0.5) / 0.5));
  }
}

TEST_CASE("pointwise MSE report") {
  const DiffusedOracle o(make_gaussian(1));
  const Matrix x(1, 1, 0.0);
  const MseReport r = pointwise_mse_report(o, 1.0, 100, x, 1000, 3);
  CHECK(r.points[0].density_bound == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi) / (100.0 * std::sqrt(2.0 * std::numbers::pi))));
  CHECK(r.points[0].density_bound == doctest::Approx(0.001125).epsilon(1e-3));
  CHECK_FALSE(r.any_bound_violated);
  CHECK_FALSE(r.any_bias_flag);
  CHECK_THROWS(pointwise_mse_report(o, 1.0, 100, x, 99, 3));
}

TEST_CASE("concentration envelope") {
  const DiffusedOracle o(make_gaussian(1));
  Matrix cloud(50, 1);
  for (int i = 0; i < 50; ++i) cloud(i, 0) = -3.0 + 6.0 * i / 49.0;
  CHECK(concentration_constant(1.0) == doctest::Approx(16.0 / 3.0));
  CHECK(concentration_envelope_check(o, 1.0, 1000, 1.0, cloud, 500, 21).pass);
  CHECK(concentration_envelope_check(o, 1.0, 1000, 4.0, cloud, 500, 22).violations == 0);
  CHECK_THROWS(concentration_envelope_check(o, 1.0, 1000, 0.0, cloud, 500, 23));
}
