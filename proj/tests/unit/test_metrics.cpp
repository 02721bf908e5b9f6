#include <cmath>
#include <numbers>

#include "doctest.h"
#include "tailscore/metrics.hpp"
#include "tailscore/quadrature.hpp"

using namespace tailscore;

namespace {

double normal_pdf(double x, double var) { return std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var); }

ScoreFn oracle_field(const DiffusedOracle& o) {
  return [&o](double t, Point x, std::span<double> out) { out[0] = o.score(t, x)[0]; };
}

}  // namespace

TEST_CASE("weighted MSE of the oracle is exactly zero") {
  for (const char* s : {"gaussian", "laplace", "student_t(nu=3)"}) {
    const DiffusedOracle o(make_builtin_target(s));
    Stream rng(1);
    const auto e = weighted_score_mse(oracle_field(o), o, 0.5, 2000, rng);
    CHECK(e.value == 0.0);
    CHECK(e.std_error == 0.0);
  }
}

TEST_CASE("zero estimator recovers the score second moment") {
  const DiffusedOracle o(make_gaussian(1));
  Stream rng(2);
  const auto e = weighted_score_mse([](double, Point, std::span<double> out) { out[0] = 0.0; }, o, 1.0, 20000, rng);
  CHECK(std::abs(e.value - 0.5) < 4.0 * e.std_error);
  CHECK(e.std_error > 0.0);
  CHECK_THROWS(weighted_score_mse([](double, Point, std::span<double> out) { out[0] = 0.0; }, o, 1.0, 999, rng));
}

TEST_CASE("KDE weighted MSE decreases with n") {
  const auto target = make_laplace(1);
  const DiffusedOracle o(target);
  Stream er(3);
  const EvalSet eval = make_eval_set(o, 0.5, 5000, er);
  auto mse = [&](std::size_t n) {
    Stream rng(4);
    const KdeScoreModel m(target.sample(rng, n), 0.5);
    return weighted_score_mse(m.as_field(), eval).value;
  };
  const double a = mse(10000), b = mse(100000);
  CHECK(a > 0.0);
  CHECK(b < a);
}

TEST_CASE("integrated score error") {
  const DiffusedOracle o(make_gaussian(1));
  Stream rng(5);
  CHECK(integrated_score_error(oracle_field(o), o, 0.01, 1.0, 8, 1000, rng).value == 0.0);
  auto zero = [](double, Point, std::span<double> out) { out[0] = 0.0; };
  // ∫ 1/(1+t) dt over [t0, T]
  Stream r2(6);
  const auto ie = integrated_score_error(zero, o, 0.01, 1.0, 32, 20000, r2);
  CHECK(std::abs(ie.value - std::log(2.0 / 1.01)) < 0.02);
  Stream r3(6), r4(6);
  const double wide = integrated_score_error(zero, o, 0.0025, 1.0, 16, 5000, r3).value;
  const double narrow = integrated_score_error(zero, o, 0.01, 1.0, 16, 5000, r4).value;
  CHECK(wide > narrow);
  CHECK_THROWS(integrated_score_error(zero, o, 1.0, 0.5, 16, 5000, r4));
  CHECK_THROWS(integrated_score_error(zero, o, 0.1, 1.0, 7, 5000, r4));
}

TEST_CASE("integrated error is stable under grid refinement") {
  const auto target = make_laplace(1);
  const DiffusedOracle o(target);
  Stream rng(8);
  const KdeScoreModel m(target.sample(rng, 2000), 1.0);
  Stream a(9), b(9);
  const double coarse = integrated_score_error(m.as_field(), o, 0.05, 2.0, 16, 20000, a).value;
  const double fine = integrated_score_error(m.as_field(), o, 0.05, 2.0, 32, 20000, b).value;
  CHECK(std::abs(fine - coarse) < 0.05 * fine);
}

TEST_CASE("one-dimensional TV") {
  auto n1 = [](double x) { return normal_pdf(x, 1.0); };
  auto n2 = [](double x) { return normal_pdf(x, 2.0); };
  CHECK(tv_1d(n1, n1, INFINITY).value == 0.0);
  // densities cross at ±c with c² = 2 ln 2, TV = 2(Φ(c) − Φ(c/√2))
  const double c = std::sqrt(2.0 * std::log(2.0));
  const double want = 2.0 * (quad::normal_cdf(c) - quad::normal_cdf(c / std::sqrt(2.0)));
  CHECK(std::abs(tv_1d(n1, n2, INFINITY).value - want) < 1e-9);
  CHECK(want == doctest::Approx(0.16606).epsilon(1e-4));
  CHECK(std::abs(tv_1d(n1, n2, INFINITY).value - tv_1d(n2, n1, INFINITY).value) < 1e-12);

  const DiffusedOracle lap(make_laplace(1)), st(make_student_t(3.0, 1)), g(make_gaussian(1));
  auto pdf = [](const DiffusedOracle& o) {
    return [&o](double x) {
      const double p[1] = {x};
      return o.density(0.2, p);
    };
  };
  const double ab = tv_1d(pdf(lap), pdf(st), INFINITY).value, bc = tv_1d(pdf(st), pdf(g), INFINITY).value,
               ac = tv_1d(pdf(lap), pdf(g), INFINITY).value;
  CHECK(ac <= ab + bc + 1e-9);

  const double t0 = 0.01;
  auto p0 = [](double x) { return normal_pdf(x, 1.0); };
  auto pt = [&](double x) {
    const double p[1] = {x};
    return g.density(t0, p);
  };
  auto exact = [&](double x) { return normal_pdf(x, 1.0 + t0); };
  CHECK(tv_1d(p0, pt, INFINITY).value == doctest::Approx(tv_1d(p0, exact, INFINITY).value).epsilon(1e-8));
}

TEST_CASE("empirical TV") {
  Stream rng(10);
  const auto g = make_gaussian(1);
  const Matrix both = g.sample(rng, 20000);
  Matrix a(10000, 1), b(10000, 1);
  for (std::size_t i = 0; i < 10000; ++i) {
    a(i, 0) = both(i, 0);
    b(i, 0) = both(i + 10000, 0);
  }
  const auto same = tv_empirical(a, b, HistogramMethod{});
  CHECK(same.value <= same.noise_floor + 3.0 * same.error);

  const std::size_t m = 100000;
  Matrix x = g.sample(rng, m), y = g.sample(rng, m);
  for (double& v : y.data()) v += 3.0;
  const auto shifted = tv_empirical(x, y, HistogramMethod{}, 1, 20);
  CHECK(std::abs(shifted.value - (2.0 * quad::normal_cdf(1.5) - 1.0)) < 0.02);

  const auto g2 = make_gaussian(2);
  Matrix p = g2.sample(rng, m), q = g2.sample(rng, m);
  for (double& v : q.data()) v *= std::sqrt(2.0);
  // radial form: |x|²/σ² is chi-square(2); densities cross at r² = 4 ln 2
  const double r2 = 4.0 * std::log(2.0);
  const double want = std::exp(-r2 / 4.0) - std::exp(-r2 / 2.0);
  CHECK(std::abs(tv_empirical(p, q, HistogramMethod{}, 1, 20).value - want) < 0.03);

  CHECK_THROWS(tv_empirical(Matrix(10, 1), Matrix(2000, 1), HistogramMethod{}));
  CHECK_THROWS(tv_empirical(Matrix(2000, 1), Matrix(2000, 2), HistogramMethod{}));
  const auto knn = tv_empirical(x, y, KnnClassifierMethod{}, 1, 10);
  CHECK(knn.value > 0.5);
}

TEST_CASE("fit_rate") {
  const auto f = fit_rate({{10, 1, 0.01}, {100, 0.1, 0.001}, {1000, 0.01, 1e-4}, {10000, 0.001, 1e-5}}, Axis::LogN);
  CHECK(f.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK_THROWS(fit_rate({{10, 1, 0.1}}, Axis::LogN));
  CHECK_THROWS(fit_rate({{10, 1, 0.1}, {20, 0, 0.1}, {30, 1, 0.1}, {40, 1, 0.1}}, Axis::LogN));

  int covered = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Stream rng(1000 + trial);
    std::vector<RatePoint> pts;
    for (double x : {10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0}) {
      const double e = 0.05 * rng.normal();
      pts.push_back({x, 3.0 * std::pow(x, -0.75) * (1.0 + e), 0.05 * 3.0 * std::pow(x, -0.75)});
    }
    const auto r = fit_rate(pts, Axis::LogN);
    CHECK(r.r_squared >= 0.0);
    CHECK(r.r_squared <= 1.0);
    if (std::abs(r.slope + 0.75) <= r.slope_halfwidth) ++covered;
  }
  CHECK(covered >= 90);
}

TEST_CASE("KS helpers") {
  CHECK(ks_critical_value(100, 0.05) == doctest::Approx(0.1358).epsilon(1e-3));
  CHECK(ks_statistic({0.5}, [](double x) { return x; }) == doctest::Approx(0.5));
}

TEST_CASE("early-stopping curve") {
  const DiffusedOracle g(make_gaussian(1));
  std::vector<double> t0;
  for (int k = 0; k < 7; ++k) t0.push_back(1e-3 * std::pow(100.0, k / 6.0));
  const auto c = early_stopping_bias_curve(g, t0, 2.0);
  CHECK(std::abs(c.fit.slope - 1.0) < 0.15);
  for (std::size_t k = 1; k < c.points.size(); ++k) CHECK(c.points[k].tv > c.points[k - 1].tv);
  CHECK(c.predicted_smoothing == 1.0);
  CHECK_THROWS(early_stopping_bias_curve(g, {0.5, 1.5}, 2.0));

  const DiffusedOracle st(make_student_t(3.0, 1));
  const auto s = early_stopping_bias_curve(st, t0, 2.0);
  CHECK(s.predicted_polynomial == doctest::Approx(2.0 * 3.0 / (1.0 + 6.0 + 4.0)));
}

TEST_CASE("initialization gap") {
  const DiffusedOracle g(make_gaussian(1));
  const auto r = initialization_gap(g, {25.0, 100.0});
  CHECK(r.first_moment == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-8));
  CHECK(r.points[1].bound == doctest::Approx(0.03989).epsilon(1e-3));
  CHECK(r.points[0].bound == doctest::Approx(2.0 * r.points[1].bound));
  CHECK_FALSE(r.any_violation);
  const auto l = initialization_gap(DiffusedOracle(make_laplace(1)), {25.0});
  CHECK(l.points[0].bound == doctest::Approx(0.1));
  CHECK(l.points[0].tv < 0.1);
  const auto p = initialization_gap(DiffusedOracle(make_builtin_target("pareto_mixture(gamma=0.5)")), {4.0, 16.0});
  CHECK(p.lemma_checked);
  CHECK_FALSE(p.any_violation);
}

TEST_CASE("region diagnostics") {
  CHECK(solve_c_alpha(1.0) > 2.0);
  const DiffusedOracle st(make_student_t(3.0, 1));
  // below n ≈ 1e5 the level c_α ρ_n exceeds max p_1 and the bulk set is empty
  CHECK_THROWS(region_diagnostics(st, 1.0, {1000, 2000, 3000, 4000}));
  const auto r = region_diagnostics(st, 1.0, {1000000, 10000000, 100000000, 1000000000});
  CHECK(std::abs(r.g1_fit.slope + 0.25) < 0.1);
  CHECK(r.rows.back().g2_mass < r.rows.front().g2_mass);
  CHECK(r.one_sided);
}
