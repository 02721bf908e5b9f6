#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "tailscore/metrics.hpp"
#include "tailscore/reverse_sampler.hpp"

using namespace tailscore;

TEST_CASE("forward sampling") {
  const auto g = make_gaussian(1);
  Stream a(1), b(1);
  const Matrix x0 = forward_sample(g, 0.0, 100, a);
  const Matrix y0 = g.sample(b, 100);
  CHECK(x0.data() == y0.data());

  Stream rng(2);
  const std::size_t m = 1000000;
  const Matrix x = forward_sample(g, 3.0, m, rng);
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  // Var of the sample second moment of N(0,4) is 2·16/m
  CHECK(std::abs(s / m - 4.0) < 4.0 * std::sqrt(32.0 / m));
  CHECK_THROWS(forward_sample(g, 1.0, 0, rng));
}

TEST_CASE("theorem schedules") {
  const auto e = schedule_from_theorem(Regime::Exponential, 10000, 1, 2.0, 1.0, 100);
  CHECK(e.t0 == doctest::Approx(std::pow(10.0, -1.6)).epsilon(1e-12));
  CHECK(e.T == doctest::Approx(std::pow(10.0, 3.2)).epsilon(1e-12));
  const auto p = schedule_from_theorem(Regime::Polynomial, 10000, 1, 2.0, 2.0, 100);
  CHECK(p.t0 == doctest::Approx(std::pow(10.0, -56.0 / 39.0)).epsilon(1e-12));
  CHECK(p.t0 == doctest::Approx(0.0366).epsilon(1e-2));
  CHECK_THROWS(schedule_from_theorem(Regime::Exponential, 10000, 1, 2.0, 1.0, 0));
  CHECK_THROWS(schedule_from_theorem(Regime::Exponential, 1, 1, 2.0, 1.0, 10));
  CHECK(schedule_from_theorem(Regime::Exponential, 100, 1, 3.0, 1.0, 10).beta_outside_window);
}

TEST_CASE("step sizes sum to T - t0") {
  for (StepRule rule : {StepRule::Uniform, StepRule::GeometricTowardT0}) {
    DiffusionSchedule s;
    s.T = 37.0;
    s.t0 = 1e-4;
    s.steps = 777;
    s.step_rule = rule;
    const auto tau = s.times();
    REQUIRE(tau.size() == 778u);
    CHECK(tau.front() == 37.0);
    CHECK(tau.back() == 1e-4);
    double sum = 0.0;
    for (std::size_t k = 1; k < tau.size(); ++k) {
      CHECK(tau[k] < tau[k - 1]);
      sum += tau[k - 1] - tau[k];
    }
    CHECK(std::abs(sum - (s.T - s.t0)) < 1e-12);
  }
}

TEST_CASE("zero score gives Brownian endpoints") {
  ScoreSource zero{[](double, Point, std::span<double> out) { out[0] = 0.0; }, "zero", false};
  DiffusionSchedule s;
  s.T = 1.0;
  s.t0 = 1e-6;
  s.steps = 10;
  s.step_rule = StepRule::Uniform;
  s.seed = 4;
  const std::size_t m = 100000;
  const auto b = integrate_reverse(zero, s, m, 1);
  REQUIRE(b.endpoints.rows() == m);
  double v = 0.0;
  for (double x : b.endpoints.data()) v += x * x;
  CHECK(std::abs(v / m - 2.0) < 4.0 * std::sqrt(8.0 / m));
}

TEST_CASE("endpoints are deterministic and independent of the worker count") {
  const DiffusedOracle o(make_laplace(1));
  DiffusionSchedule s;
  s.T = 5.0;
  s.t0 = 0.01;
  s.steps = 50;
  s.seed = 99;
  const auto a = integrate_reverse(oracle_source(o), s, 500, 1, 1);
  const auto b = integrate_reverse(oracle_source(o), s, 500, 1, 4);
  CHECK(a.endpoints.data() == b.endpoints.data());
  s.seed = 100;
  const auto c = integrate_reverse(oracle_source(o), s, 500, 1, 1);
  CHECK(a.endpoints.data() != c.endpoints.data());
}

TEST_CASE("gaussian variance recursions") {
  DiffusionSchedule s;
  s.T = 10.0;
  s.t0 = 1e-3;
  s.steps = 2000;
  s.step_rule = StepRule::Uniform;
  // started from N(0, T) instead of N(0, 1 + T): v(t0) = 1 + t0 - ((1 + t0)/(1 + T))^2
  const double lag = (1.0 + s.t0) / (1.0 + s.T);
  CHECK(reverse_gaussian_variance(s, 1.0) == doctest::Approx(1.0 + s.t0 - lag * lag).epsilon(1e-10));
  const double e1 = em_gaussian_variance(s, 1.0) - reverse_gaussian_variance(s, 1.0);
  s.steps = 4000;
  const double e2 = em_gaussian_variance(s, 1.0) - reverse_gaussian_variance(s, 1.0);
  CHECK(e2 / e1 == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("oracle sampler matches the exact EM law") {
  const DiffusedOracle o(make_gaussian(1));
  DiffusionSchedule s;
  s.T = 10.0;
  s.t0 = 1e-3;
  s.steps = 200;
  s.step_rule = StepRule::Uniform;
  s.seed = 5;
  const std::size_t m = 50000;
  const auto b = integrate_reverse(oracle_source(o), s, m, 1);
  double v = 0.0;
  for (double x : b.endpoints.data()) v += x * x;
  const double want = em_gaussian_variance(s, 1.0);
  CHECK(std::abs(v / m - want) < 4.0 * want * std::sqrt(2.0 / m));
}

TEST_CASE("KDE-driven sampling improves with n") {
  const auto target = make_laplace(1);
  const DiffusedOracle o(target);
  DiffusionSchedule s;
  s.T = 10.0;
  s.t0 = 0.05;
  s.steps = 100;
  s.seed = 12;
  auto ks_for = [&](std::size_t n) {
    Stream rng(77, n);
    const KdeScoreModel model(target.sample(rng, n), 1.0);
    const auto b = integrate_reverse(kde_source(model), s, 10000, 1);
    // symmetric target: P(X < x) from the two-sided tail mass
    return ks_statistic(b.endpoints.data(), [&](double x) {
      const double tail = 0.5 * o.outside_mass(s.t0, -std::abs(x), std::abs(x));
      return x < 0.0 ? tail : 1.0 - tail;
    });
  };
  CHECK(ks_for(10000) < ks_for(100));
}

TEST_CASE("endpoint CSV") {
  DiffusionSchedule s;
  s.T = 1.0;
  s.t0 = 0.1;
  s.steps = 5;
  ScoreSource zero{[](double, Point, std::span<double> out) { out[0] = out[1] = 0.0; }, "zero", false};
  const auto b = integrate_reverse(zero, s, 3, 2);
  std::ostringstream os;
  write_endpoints_csv(b, os);
  const std::string text = os.str();
  CHECK(text.find("# T=1") != std::string::npos);
  CHECK(text.find("traj_id,dim_0,dim_1") != std::string::npos);
}
