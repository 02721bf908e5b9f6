#include <cmath>

#include "doctest.h"
#include "tailscore/minimax_lab.hpp"

using namespace tailscore;

namespace {

PerturbedFamily small_family(double epsilon, Regime regime = Regime::Polynomial) {
  PerturbedFamily::Spec s;
  s.regime = regime;
  s.gamma = regime == Regime::Polynomial ? 2.0 : 1.0;
  s.t = 0.1;
  s.epsilon = epsilon;
  s.R = 5.0;
  s.max_cells = 6;
  return PerturbedFamily(s);
}

}  // namespace

TEST_CASE("bump profile") {
  CHECK(BumpFunction::psi(0.0) == 0.0);
  CHECK(BumpFunction::psi(0.5) == 0.0);
  CHECK(BumpFunction::psi(-0.7) == 0.0);
  CHECK(BumpFunction::psi1(0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(BumpFunction::psi(0.2) == doctest::Approx(-BumpFunction::psi(-0.2)));
  const double h = 1e-6;
  for (double u : {-0.4, -0.1, 0.25, 0.45}) {
    CHECK(BumpFunction::psi1(u) == doctest::Approx((BumpFunction::psi(u + h) - BumpFunction::psi(u - h)) / (2 * h)).epsilon(1e-6));
    CHECK(BumpFunction::psi2(u) == doctest::Approx((BumpFunction::psi1(u + h) - BumpFunction::psi1(u - h)) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("greedy packing") {
  const auto c8 = gv_packing(8, 0.25);
  CHECK(c8.size() >= 4);
  for (std::size_t i = 0; i < c8.size(); ++i)
    for (std::size_t j = i + 1; j < c8.size(); ++j) CHECK(hamming(c8[i], c8[j]) >= 2);
  const auto c2 = gv_packing(2, 0.5);
  REQUIRE(c2.size() == 2);
  CHECK(c2[0] == Signs{0, 0});
  CHECK(c2[1] == Signs{1, 1});
  CHECK_THROWS(gv_packing(8, 0.9));
  CHECK_THROWS(gv_packing(25, 0.25));
  for (std::size_t m = 8; m <= 24; m += 4) CHECK(gv_packing(m, 0.25).size() >= 2);
}

TEST_CASE("hypotheses are densities") {
  const auto f = small_family(1e-4);
  for (const Signs& b : gv_packing(f.cells(), 0.25)) {
    double mass = 0.0;
    const double dx = 1e-3;
    for (double x = -60.0; x < 60.0; x += dx) {
      const double v = f.q(b, x);
      CHECK(v >= 0.0);
      mass += v * dx;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("information radii") {
  const auto f = small_family(1e-4);
  const Signs zero(f.cells(), 0), one(f.cells(), 1);
  CHECK(chi2_radius(f, zero) == 0.0);
  CHECK(kl_radius(f, zero) == 0.0);
  Signs single(f.cells(), 0);
  single[0] = 1;
  const double chi2 = chi2_radius(f, single), kl = kl_radius(f, single);
  CHECK(kl >= 0.0);
  CHECK(kl <= chi2);
  CHECK(kl / chi2 == doctest::Approx(0.5).epsilon(0.05));
  CHECK(chi2_radius(f, one) == doctest::Approx(f.cells() * chi2).epsilon(0.1));

  const double c1 = chi2_radius(small_family(1e-4), one), c2 = chi2_radius(small_family(2e-4), one),
               c4 = chi2_radius(small_family(4e-4), one);
  CHECK(c2 / c1 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(c4 / c1 == doctest::Approx(16.0).epsilon(0.05));
}

TEST_CASE("score separation") {
  const auto f = small_family(1e-4);
  const std::size_t m = f.cells();
  Signs a(m, 0), b(m, 0), c(m, 0);
  b[0] = 1;
  c[0] = c[3] = 1;
  CHECK(score_separation(f, b, b) == 0.0);
  CHECK(score_separation(f, a, b) == doctest::Approx(score_separation(f, b, a)).epsilon(1e-12));
  CHECK(score_separation(f, a, c) / score_separation(f, a, b) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("coupled parameters satisfy every constraint") {
  for (Regime r : {Regime::Polynomial, Regime::Exponential}) {
    const double gamma = r == Regime::Polynomial ? 2.0 : 1.0;
    const auto p = coupled_parameters(r, 10000, 0.1, 1, gamma, 2.0);
    CAPTURE(to_string(r));
    CHECK(p.h < p.R);
    CHECK(p.epsilon > 0.0);
    CHECK(p.c <= p.c_max);
    CHECK(p.constraints.positivity_ratio <= 0.5);
    CHECK(p.constraints.all());
    CHECK(p.in_window);
    if (r == Regime::Exponential) {
      CHECK(p.window_lo < 0.1);
    }
  }
  const auto low = coupled_parameters(Regime::Exponential, 10000, 1e-5, 1, 1.0, 2.0);
  CHECK_FALSE(low.in_window);
  CHECK_FALSE(low.flag.empty());
  CHECK_THROWS(coupled_parameters(Regime::Polynomial, 5, 0.1, 1, 2.0, 2.0));
  CHECK_THROWS_AS(coupled_parameters(Regime::Polynomial, 1000, 0.1, 2, 2.0, 2.0), CapabilityError);
}

TEST_CASE("Fano budget responds to epsilon") {
  const auto p = coupled_parameters(Regime::Polynomial, 10000, 0.1, 1, 2.0, 2.0);
  const PerturbedFamily fam = build_family(p);
  const auto packing = gv_packing(fam.cells(), 0.25);
  const auto rep = fano_budget_report(fam, packing, p.n);
  CHECK(rep.budget_ok);
  CHECK(rep.ratio <= 1.0);
  // KL is quadratic in ε
  PerturbedFamily::Spec s = fam.spec();
  s.epsilon *= 2.0;
  const auto twice = fano_budget_report(PerturbedFamily(s), packing, p.n);
  CHECK(twice.ratio / rep.ratio == doctest::Approx(4.0).epsilon(1e-3));
  // and linear in n
  const auto n_over = std::size_t(std::ceil(1.01 * double(p.n) / rep.ratio));
  const auto over = fano_budget_report(fam, packing, n_over);
  CHECK(over.ratio > 1.0);
  CHECK_FALSE(over.budget_ok);
}

TEST_CASE("Sobolev budget") {
  CHECK(sobolev_budget(small_family(0.0), 2.0).seminorm == 0.0);
  const auto a = sobolev_budget(small_family(1e-4), 2.0), b = sobolev_budget(small_family(1e-3), 2.0);
  CHECK(b.seminorm / a.seminorm == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(a.route == "derivative");
  const auto fa = sobolev_budget(small_family(1e-4), 2.0, 1.0, true);
  CHECK(fa.route == "fourier");
  CHECK(fa.seminorm == doctest::Approx(a.seminorm).epsilon(1e-3));
  CHECK(sobolev_budget(small_family(1e-4), 1.5).route == "fourier");
  CHECK_THROWS_AS(sobolev_budget(small_family(1e-4), 2.5), CapabilityError);
  const auto p = coupled_parameters(Regime::Polynomial, 10000, 0.1, 1, 2.0, 2.0);
  CHECK(sobolev_budget(build_family(p), 2.0).ratio <= 1.0);
}

TEST_CASE("separation grows as t shrinks") {
  const auto sw = separation_t_sweep(Regime::Exponential, 1.0, 1e-4, 1.0, {0.05, 0.1, 0.2, 0.4});
  CHECK(std::abs(sw.fit.slope + 0.5) < 0.2);
  CHECK_THROWS(separation_t_sweep(Regime::Exponential, 1.0, 1e-4, 1.0, {0.05, 0.1}));
}
