#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "tailscore/oracle.hpp"
#include "tailscore/quadrature.hpp"
#include "tailscore/targets.hpp"

using namespace tailscore;

namespace {

double integrate_pdf(const TargetDistribution& t) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> br{-inf, -1.0, 0.0, 1.0, inf};
  return quad::adaptive(
             [&](double x) {
               const double p[1] = {x};
               return t.pdf(p);
             },
             std::span<const double>(br), 1e-11)
      .value;
}

}  // namespace

TEST_CASE("student_t maps nu to a polynomial tail index") {
  const auto t = make_builtin_target("student_t(nu=3)");
  CHECK(t.tail.kind == TailKind::Polynomial);
  CHECK(t.tail.gamma == doctest::Approx(2.0));
  CHECK(regime_of(t) == Regime::Polynomial);
  // (1 + x^2/3)^{-2} against (1 + x^2)^{-(1+gamma+d)/2}
  CHECK((1.0 + t.tail.gamma + 1.0) / 2.0 == doctest::Approx(2.0));
}

TEST_CASE("gaussian and laplace basics") {
  const auto g = make_builtin_target("gaussian");
  CHECK(g.tail.kind == TailKind::SubGaussian);
  const double x[1] = {1.7};
  CHECK(g.score0(x)[0] == doctest::Approx(-1.7));

  const auto l = make_builtin_target("laplace");
  CHECK(l.tail.kind == TailKind::StretchedExponential);
  CHECK(l.tail.gamma == doctest::Approx(1.0));
  const double z[1] = {0.0};
  CHECK(l.pdf(z) == doctest::Approx(0.5));
  CHECK(integrate_pdf(l) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("every one-dimensional builtin integrates to one") {
  for (const char* s : {"gaussian", "laplace", "student_t(nu=3)", "student_t(nu=5)", "generalized_gaussian(gamma=3)",
                        "generalized_gaussian(gamma=0.5)", "pareto_mixture(gamma=2)",
                        "gaussian_mixture(weights=[0.3,0.7],means=[-1,2],scales=[0.5,1])"}) {
    CAPTURE(s);
    CHECK(integrate_pdf(make_builtin_target(s)) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("bad target specs are rejected") {
  CHECK_THROWS(make_builtin_target("cauchy"));
  CHECK_THROWS(make_builtin_target("student_t(nu=1)"));
  CHECK_THROWS(make_builtin_target("student_t(nu=0.5)"));
  CHECK_THROWS(make_builtin_target("student_t"));
  CHECK_THROWS(make_builtin_target("gaussian(d=0)"));
  CHECK_THROWS(BuiltinSpec::parse("laplace(d=1"));
}

TEST_CASE("sampling is deterministic per stream") {
  const auto t = make_builtin_target("student_t(nu=3)");
  Stream a(7, 1, 2), b(7, 1, 2), c(7, 1, 3);
  const Matrix x = t.sample(a, 50), y = t.sample(b, 50), z = t.sample(c, 50);
  CHECK(x.data() == y.data());
  CHECK(x.data() != z.data());
}

TEST_CASE("oracle density examples") {
  const DiffusedOracle g(make_gaussian(1));
  const double x2[1] = {2.0};
  CHECK(g.density(1.0, x2) == doctest::Approx(std::exp(-1.0) / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(g.score(1.0, x2)[0] == doctest::Approx(-1.0).epsilon(1e-12));

  const DiffusedOracle l(make_laplace(1));
  const double z[1] = {0.0};
  // p_t(0) = e^{t/2} Φ(-√t) = 1/2 - O(√t) because of the kink at 0
  for (double t : {1e-8, 1e-4, 0.5})
    CHECK(l.density(t, z) == doctest::Approx(std::exp(t / 2) * quad::normal_cdf(-std::sqrt(t))).epsilon(1e-10));
  CHECK(std::abs(l.density(1e-12, z) - 0.5) < 1e-5);
}

TEST_CASE("quadrature oracle matches the closed-form gaussian") {
  const DiffusedOracle closed(make_gaussian(1), OracleMode::ClosedForm);
  const DiffusedOracle quadr(make_gaussian(1), OracleMode::Quadrature);
  for (double t : {0.01, 0.5, 3.0})
    for (double x : {-4.0, -1.0, 0.3, 2.5}) {
      const double p[1] = {x};
      CHECK(quadr.density(t, p) == doctest::Approx(closed.density(t, p)).epsilon(1e-9));
      CHECK(quadr.score(t, p)[0] == doctest::Approx(closed.score(t, p)[0]).epsilon(1e-7));
    }
}

TEST_CASE("student_t density against a Monte Carlo average") {
  const auto target = make_student_t(3.0, 1);
  const DiffusedOracle o(target);
  const double t = 0.5;
  Stream rng(31);
  const std::size_t m = 2000000;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double y[1];
    target.sample(rng, y);
    const double k = std::exp(-y[0] * y[0] / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
    s1 += k;
    s2 += k * k;
  }
  const double mean = s1 / m, se = std::sqrt((s2 / m - mean * mean) / (m - 1));
  const double z[1] = {0.0};
  CHECK(std::abs(o.density(t, z) - mean) < 4.0 * se);
}

TEST_CASE("oracle score symmetry and finite differences") {
  for (const char* s : {"gaussian", "laplace", "student_t(nu=3)", "generalized_gaussian(gamma=3)"}) {
    CAPTURE(s);
    const DiffusedOracle o(make_builtin_target(s));
    const double z[1] = {0.0};
    CHECK(std::abs(o.score(0.3, z)[0]) < 1e-8);
  }
  const DiffusedOracle l(make_laplace(1));
  const double t = 0.1, x = 3.0, h = 1e-5;
  const double xp[1] = {x + h}, xm[1] = {x - h}, xc[1] = {x};
  const double fd = (std::log(l.density(t, xp)) - std::log(l.density(t, xm))) / (2.0 * h);
  CHECK(l.score(t, xc)[0] == doctest::Approx(fd).epsilon(1e-4));

  const DiffusedOracle st(make_student_t(3.0, 1));
  for (int i = 0; i < 50; ++i) {
    const double y = -5.0 + 10.0 * (i + 0.5) / 50.0;
    const double a[1] = {y + h}, b[1] = {y - h}, c[1] = {y};
    const double g = (st.density(0.5, a) - st.density(0.5, b)) / (2.0 * h);
    CHECK(st.grad(0.5, c)[0] == doctest::Approx(g).epsilon(1e-4));
  }
}

TEST_CASE("Tweedie identity on a cloud") {
  for (const char* s : {"gaussian", "laplace", "student_t(nu=3)", "generalized_gaussian(gamma=3)"}) {
    CAPTURE(s);
    const DiffusedOracle o(make_builtin_target(s));
    for (int i = 0; i < 20; ++i) {
      const double x[1] = {-4.0 + 8.0 * (i + 0.5) / 20.0};
      const double a = o.score(0.5, x)[0], b = o.tweedie_score(0.5, x)[0];
      CHECK(std::abs(a - b) <= 1e-6 * std::max(std::abs(a), 1e-3));
    }
  }
}

TEST_CASE("score moments shrink along the flow and obey d/t") {
  for (const char* s : {"gaussian", "laplace", "student_t(nu=5)"}) {
    CAPTURE(s);
    const DiffusedOracle o(make_builtin_target(s));
    const double m0 = o.score_second_moment(0.0);
    for (double t : {0.1, 0.5, 1.0, 2.0}) CHECK(o.score_second_moment(t) <= m0 + 1e-6);
    for (double t : {0.1, 1.0}) CHECK(o.score_second_moment(t) <= 1.0 / t);
  }
  const DiffusedOracle g(make_gaussian(1));
  CHECK(g.score_second_moment(1.0) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("tail envelopes hold") {
  const DiffusedOracle st(make_student_t(3.0, 1));
  CHECK_FALSE(tail_envelope_check(st, 1.0, {2, 5, 10, 20}).violation);
  const DiffusedOracle l(make_laplace(1));
  CHECK_FALSE(tail_envelope_check(l, 0.5, {2, 5, 10}).violation);
  CHECK_THROWS(tail_envelope_check(l, 0.5, {0.5}));
  CHECK_THROWS(tail_envelope_check(DiffusedOracle(make_gaussian(1)), 0.5, {2.0}));
}

TEST_CASE("quadrature oracle refuses d > 2") {
  CHECK_THROWS_AS(DiffusedOracle(make_laplace(3)).density(1.0, std::vector<double>{0, 0, 0}), CapabilityError);
  const DiffusedOracle g3(make_gaussian(3));
  const std::vector<double> x{0.5, 0.0, -0.5};
  CHECK(g3.score(1.0, x)[0] == doctest::Approx(-0.25));
}
