#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tailscore::quad {

/// Gauss–Legendre nodes and weights on [-1, 1].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Cached rule with n nodes (n >= 1). Thread safe.
const Rule& gauss_legendre(unsigned n);

template <class F>
double panel(F&& f, double a, double b, const Rule& rule) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

/// Composite rule: every segment between consecutive breakpoints is cut into
/// `panels` equal panels.
template <class F>
double composite(F&& f, std::span<const double> breaks, unsigned panels, const Rule& rule) {
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    if (!(b > a)) continue;
    const double w = (b - a) / panels;
    for (unsigned k = 0; k < panels; ++k) acc += panel(f, a + k * w, a + (k + 1) * w, rule);
  }
  return acc;
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// One 31-point Kronrod panel with the embedded 15-point Gauss rule;
/// error = |K - G|, l1 = Kronrod estimate of ∫|f|.
template <class F>
Estimate kronrod_panel(F&& f, double a, double b, double* l1 = nullptr) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  using G = boost::math::quadrature::gauss<double, 15>;
  const auto& x = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const double f0 = f(mid);
  double k = wk[0] * f0, g = wg[0] * f0, k_abs = wk[0] * std::abs(f0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double fl = f(mid - half * x[i]), fr = f(mid + half * x[i]);
    k += wk[i] * (fl + fr);
    k_abs += wk[i] * (std::abs(fl) + std::abs(fr));
    if (i % 2 == 0) g += wg[i / 2] * (fl + fr);
  }
  if (l1) *l1 = k_abs * std::abs(half);
  return {k * half, std::abs((k - g) * half)};
}

/// Adaptive Gauss–Kronrod (15/31 point) on [a, b]; infinite limits allowed.
template <class F>
Estimate adaptive(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 18) {
  Estimate e;
  double l1 = 0.0;
  e.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol,
                                                                          &e.error, &l1);
  return e;
}

/// Adaptive integration over sorted breakpoints with one global error budget:
/// the interval with the largest Gauss–Kronrod error is bisected until the
/// summed error is below rel_tol times ∫|f|. Each breakpoint segment may be
/// halved at most max_depth times. An infinite end segment is mapped onto
/// [0, 1) by x = a ± u/(1-u).
template <class F>
Estimate adaptive(F&& f, std::span<const double> breaks, double rel_tol = 1e-12,
                  unsigned max_depth = 18) {
  enum class Map { None, Right, Left };
  struct Piece {
    double a, b, value, error, l1;
    unsigned depth;
    Map map;
    double anchor;
  };
  auto eval = [&](double a, double b, unsigned depth, Map map, double anchor) {
    Piece p{a, b, 0.0, 0.0, 0.0, depth, map, anchor};
    Estimate e;
    if (map == Map::None) {
      e = kronrod_panel(f, a, b, &p.l1);
    } else {
      const double sign = map == Map::Right ? 1.0 : -1.0;
      auto g = [&](double u) {
        const double v = 1.0 - u;
        const double y = f(anchor + sign * u / v) / (v * v);
        return std::isfinite(y) ? y : 0.0;
      };
      e = kronrod_panel(g, a, b, &p.l1);
    }
    p.value = e.value;
    p.error = e.error;
    return p;
  };
  std::vector<Piece> heap;
  auto by_error = [](const Piece& x, const Piece& y) { return x.error < y.error; };
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    if (!(b > a)) continue;
    if (std::isinf(a) && std::isinf(b)) {
      heap.push_back(eval(0.0, 1.0, 0, Map::Left, 0.0));
      heap.push_back(eval(0.0, 1.0, 0, Map::Right, 0.0));
    } else if (std::isinf(b)) {
      heap.push_back(eval(0.0, 1.0, 0, Map::Right, a));
    } else if (std::isinf(a)) {
      heap.push_back(eval(0.0, 1.0, 0, Map::Left, b));
    } else {
      heap.push_back(eval(a, b, 0, Map::None, 0.0));
    }
  }
  std::make_heap(heap.begin(), heap.end(), by_error);
  constexpr double kRound = 64.0 * 2.220446049250313e-16;
  std::vector<Piece> settled;
  double err = 0.0, l1 = 0.0;
  for (const auto& p : heap) {
    err += p.error;
    l1 += p.l1;
  }
  while (!heap.empty() && err > rel_tol * l1) {
    std::pop_heap(heap.begin(), heap.end(), by_error);
    const Piece worst = heap.back();
    heap.pop_back();
    if (worst.depth >= max_depth || worst.error <= kRound * worst.l1) {
      settled.push_back(worst);
      continue;
    }
    const double mid = 0.5 * (worst.a + worst.b);
    const Piece lo = eval(worst.a, mid, worst.depth + 1, worst.map, worst.anchor);
    const Piece hi = eval(mid, worst.b, worst.depth + 1, worst.map, worst.anchor);
    err += lo.error + hi.error - worst.error;
    l1 += lo.l1 + hi.l1 - worst.l1;
    for (const Piece& p : {lo, hi}) {
      heap.push_back(p);
      std::push_heap(heap.begin(), heap.end(), by_error);
    }
  }
  settled.insert(settled.end(), heap.begin(), heap.end());
  // fixed summation order
  std::sort(settled.begin(), settled.end(), [](const Piece& x, const Piece& y) {
    return std::tie(x.map, x.anchor, x.a) < std::tie(y.map, y.anchor, y.a);
  });
  Estimate total;
  for (const auto& p : settled) {
    total.value += p.value;
    total.error += p.error;
  }
  return total;
}

/// Sorts, clips to [lo, hi] and deduplicates candidate breakpoints; the result
/// always starts at lo and ends at hi.
std::vector<double> make_breaks(std::vector<double> points, double lo, double hi);

/// Upper tail of the standard normal, 1 - Phi(z).
double normal_sf(double z);
double normal_cdf(double z);

}  // namespace tailscore::quad
