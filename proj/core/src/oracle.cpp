#include "tailscore/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tailscore/quadrature.hpp"

namespace tailscore {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kRelTol = 1e-13;
constexpr double kWindow2d = 14.0;

std::string format_point(const std::vector<double>& x) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

double gauss_kernel_1d(double u, double t) {
  return std::exp(-0.5 * u * u / t) / std::sqrt(2.0 * std::numbers::pi * t);
}

}  // namespace

FarTailError::FarTailError(const std::vector<double>& point)
    : std::runtime_error("score oracle unreliable in far tail at x = " + format_point(point)), x(point) {}

DiffusedOracle::DiffusedOracle(TargetDistribution target)
    : DiffusedOracle(target, target.mixture ? OracleMode::ClosedForm : OracleMode::Quadrature) {}

DiffusedOracle::DiffusedOracle(TargetDistribution target, OracleMode mode)
    : target_(std::move(target)), mode_(mode) {
  if (mode_ == OracleMode::ClosedForm && !target_.mixture)
    throw CapabilityError("closed-form oracle needs a Gaussian-mixture target, got " + target_.name);
}

void DiffusedOracle::check(double t, Point x) const {
  if (!(t > 0.0)) throw std::invalid_argument("oracle: t must be positive");
  if (x.size() != static_cast<std::size_t>(target_.dim))
    throw std::invalid_argument("oracle: point dimension does not match target");
  if (mode_ == OracleMode::Quadrature && target_.dim > 2)
    throw CapabilityError("quadrature oracle unavailable for d > 2; use a closed-form (mixture) target");
}

std::vector<double> DiffusedOracle::breakpoints(double t, double x) const {
  const double st = std::sqrt(t);
  std::vector<double> pts{x, 0.0};
  for (double k : {1.0, 4.0, 12.0}) {
    pts.push_back(x - k * st);
    pts.push_back(x + k * st);
  }
  for (double k : target_.kinks) pts.push_back(k);
  for (double s = target_.scale; s < 1e6; s *= 4.0) {
    pts.push_back(-s);
    pts.push_back(s);
  }
  return quad::make_breaks(std::move(pts), x - kWindow * st, x + kWindow * st);
}

double DiffusedOracle::quad_density_1d(double t, double x) const {
  const auto br = breakpoints(t, x);
  auto f = [&](double y) {
    const double yy[1] = {y};
    return gauss_kernel_1d(x - y, t) * target_.pdf(yy);
  };
  return quad::adaptive(f, std::span<const double>(br), kRelTol).value;
}

double DiffusedOracle::quad_grad_1d(double t, double x) const {
  const auto br = breakpoints(t, x);
  auto f = [&](double y) {
    const double yy[1] = {y};
    return (y - x) / t * gauss_kernel_1d(x - y, t) * target_.pdf(yy);
  };
  return quad::adaptive(f, std::span<const double>(br), kRelTol).value;
}

namespace {

template <class W>
double nested_2d(const TargetDistribution& target, double t, Point x, W weight) {
  const double st = std::sqrt(t);
  auto axis_breaks = [&](double c) {
    std::vector<double> pts{c, c - st, c + st};
    for (double k : target.kinks) pts.push_back(k);
    return quad::make_breaks(std::move(pts), c - kWindow2d * st, c + kWindow2d * st);
  };
  const auto b0 = axis_breaks(x[0]);
  const auto b1 = axis_breaks(x[1]);
  auto outer = [&](double y0) {
    auto inner = [&](double y1) {
      const double y[2] = {y0, y1};
      return weight(y0, y1) * target.pdf(y);
    };
    return quad::adaptive(inner, std::span<const double>(b1), 1e-10, 12).value;
  };
  return quad::adaptive(outer, std::span<const double>(b0), 1e-9, 12).value;
}

}  // namespace

double DiffusedOracle::quad_density_2d(double t, Point x) const {
  return nested_2d(target_, t, x, [&](double y0, double y1) {
    return gauss_kernel_1d(x[0] - y0, t) * gauss_kernel_1d(x[1] - y1, t);
  });
}

std::vector<double> DiffusedOracle::quad_grad_2d(double t, Point x) const {
  std::vector<double> g(2);
  for (int i = 0; i < 2; ++i) {
    g[i] = nested_2d(target_, t, x, [&](double y0, double y1) {
      const double yi = i == 0 ? y0 : y1;
      return (yi - x[i]) / t * gauss_kernel_1d(x[0] - y0, t) * gauss_kernel_1d(x[1] - y1, t);
    });
  }
  return g;
}

double DiffusedOracle::mixture_eval(double t, Point x, std::span<double> grad_out, bool want_score) const {
  const GaussianMixture& mix = *target_.mixture;
  const int d = target_.dim;
  const std::size_t k = mix.weights.size();
  std::vector<double> lw(k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const double v = mix.scales[j] * mix.scales[j] + t;
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) r2 += (x[i] - mix.means(j, i)) * (x[i] - mix.means(j, i));
    lw[j] = std::log(mix.weights[j]) - 0.5 * r2 / v - 0.5 * d * std::log(2.0 * std::numbers::pi * v);
    top = std::max(top, lw[j]);
  }
  double z = 0.0;
  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const double w = std::exp(lw[j] - top);
    const double v = mix.scales[j] * mix.scales[j] + t;
    z += w;
    for (int i = 0; i < d; ++i) grad_out[i] += w * (mix.means(j, i) - x[i]) / v;
  }
  const double p = z * std::exp(top);
  const double f = want_score ? 1.0 / z : std::exp(top);
  for (double& g : grad_out) g *= f;
  return p;
}

double DiffusedOracle::density(double t, Point x) const {
  check(t, x);
  if (mode_ == OracleMode::ClosedForm) {
    std::vector<double> g(target_.dim);
    return mixture_eval(t, x, g, false);
  }
  return target_.dim == 1 ? quad_density_1d(t, x[0]) : quad_density_2d(t, x);
}

std::vector<double> DiffusedOracle::grad(double t, Point x) const {
  check(t, x);
  std::vector<double> g(target_.dim);
  if (mode_ == OracleMode::ClosedForm) {
    mixture_eval(t, x, g, false);
    return g;
  }
  if (target_.dim == 1) {
    g[0] = quad_grad_1d(t, x[0]);
    return g;
  }
  return quad_grad_2d(t, x);
}

double DiffusedOracle::density_and_score(double t, Point x, std::span<double> out) const {
  check(t, x);
  if (mode_ == OracleMode::ClosedForm) return mixture_eval(t, x, out, true);
  double p;
  if (target_.dim == 1) {
    p = quad_density_1d(t, x[0]);
    if (!(p > kTiny)) throw FarTailError({x.begin(), x.end()});
    out[0] = quad_grad_1d(t, x[0]) / p;
  } else {
    p = quad_density_2d(t, x);
    if (!(p > kTiny)) throw FarTailError({x.begin(), x.end()});
    const auto g = quad_grad_2d(t, x);
    for (int i = 0; i < 2; ++i) out[i] = g[i] / p;
  }
  return p;
}

std::vector<double> DiffusedOracle::score(double t, Point x) const {
  std::vector<double> s(target_.dim);
  density_and_score(t, x, s);
  return s;
}

std::vector<double> DiffusedOracle::tweedie_score(double t, Point x) const {
  check(t, x);
  if (target_.dim != 1) throw CapabilityError("tweedie_score: d = 1 only");
  if (!target_.analytic_score) throw CapabilityError("tweedie_score: target has no analytic score");
  const double st = std::sqrt(t), x0 = x[0];
  // Work in z = (y - x)/sqrt(t); panels resolve both the unit Gaussian and p0.
  std::vector<double> pts{0.0};
  for (double k : target_.kinks) pts.push_back((k - x0) / st);
  const auto br = quad::make_breaks(std::move(pts), -kWindow, kWindow);
  const double width = std::min(0.25, 0.25 * target_.scale / st);
  const quad::Rule& rule = quad::gauss_legendre(16);
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s + 1 < br.size(); ++s) {
    const double a = br[s], b = br[s + 1];
    const auto panels = static_cast<std::size_t>(std::min(200000.0, std::ceil((b - a) / width)));
    const double w = (b - a) / panels;
    for (std::size_t k = 0; k < panels; ++k) {
      const double lo = a + k * w, mid = lo + 0.5 * w;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = mid + 0.5 * w * rule.nodes[i];
        const double y[1] = {x0 + st * z};
        double s0[1];
        target_.analytic_score(y, s0);
        const double wgt = rule.weights[i] * 0.5 * w * std::exp(-0.5 * z * z) * target_.pdf(y);
        den += wgt;
        num += wgt * s0[0];
      }
    }
  }
  if (!(den > kTiny)) throw FarTailError({x0});
  return {num / den};
}

double DiffusedOracle::outside_mass(double t, double lo, double hi) const {
  if (target_.dim != 1) throw CapabilityError("outside_mass: d = 1 only");
  if (!(t > 0.0)) throw std::invalid_argument("outside_mass: t must be positive");
  const double st = std::sqrt(t);
  auto f = [&](double y) {
    const double yy[1] = {y};
    return target_.pdf(yy) * (quad::normal_cdf((lo - y) / st) + quad::normal_sf((hi - y) / st));
  };
  std::vector<double> pts{0.0, lo, hi};
  for (double k : {1.0, 4.0, 12.0, 38.0}) {
    for (double c : {lo, hi}) {
      pts.push_back(c - k * st);
      pts.push_back(c + k * st);
    }
  }
  for (double k : target_.kinks) pts.push_back(k);
  for (double s = target_.scale; s < 1e6; s *= 4.0) {
    pts.push_back(-s);
    pts.push_back(s);
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto br = quad::make_breaks(pts, -1e300, 1e300);
  br.front() = -inf;
  br.back() = inf;
  return quad::adaptive(f, std::span<const double>(br), 1e-12).value;
}

double DiffusedOracle::first_abs_moment() const {
  if (target_.dim != 1) throw CapabilityError("first_abs_moment: d = 1 only");
  if (target_.tail.kind == TailKind::Polynomial && target_.tail.gamma <= 0.0)
    return std::numeric_limits<double>::infinity();
  auto f = [&](double y) {
    const double yy[1] = {y};
    return std::abs(y) * target_.pdf(yy);
  };
  std::vector<double> pts{0.0};
  for (double k : target_.kinks) pts.push_back(k);
  for (double s = target_.scale; s < 1e4; s *= 4.0) {
    pts.push_back(-s);
    pts.push_back(s);
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto br = quad::make_breaks(pts, -1e300, 1e300);
  br.front() = -inf;
  br.back() = inf;
  return quad::adaptive(f, std::span<const double>(br), 1e-11).value;
}

double DiffusedOracle::score_second_moment(double t) const {
  if (target_.dim != 1) throw CapabilityError("score_second_moment: d = 1 only");
  if (t < 0.0) throw std::invalid_argument("score_second_moment: t must be nonnegative");
  auto f = [&](double x) -> double {
    const double xx[1] = {x};
    if (t == 0.0) {
      const double p = target_.pdf(xx);
      if (!(p > 0.0)) return 0.0;
      double s[1];
      target_.analytic_score(xx, s);
      return s[0] * s[0] * p;
    }
    double s[1];
    try {
      const double p = density_and_score(t, xx, s);
      return s[0] * s[0] * p;
    } catch (const FarTailError&) {
      return 0.0;
    }
  };
  std::vector<double> pts{0.0};
  for (double k : target_.kinks) pts.push_back(k);
  for (double s = target_.scale; s < 1e4; s *= 4.0) {
    pts.push_back(-s);
    pts.push_back(s);
  }
  const double inf = std::numeric_limits<double>::infinity();
  auto br = quad::make_breaks(pts, -1e300, 1e300);
  br.front() = -inf;
  br.back() = inf;
  return quad::adaptive(f, std::span<const double>(br), 1e-9, 12).value;
}

double polynomial_envelope_constant(double gamma, int d, double C0, double t) {
  const double e = 1.0 + gamma + d;
  const double pi = std::numbers::pi;
  const double tail = std::pow(2.0, e) * C0;
  if (t <= 1.0) {
    const double a = std::pow(2.0 * d * d / (pi * std::numbers::e * (1.0 + gamma)), 0.5 * d) *
                     std::pow(e / d, 0.5 * e);
    const double b = std::pow(2.0 * pi, -0.5 * d) * std::exp(-(3.0 + 4.0 * gamma + 4.0 * d) / 8.0) *
                     std::pow(4.0 * e, 0.5 * e);
    return std::max(a, b) + tail;
  }
  return std::pow(t, 0.5 * (1.0 + gamma)) * std::pow(2.0 * pi, -0.5 * d) * std::exp(-0.25 * e) *
             std::pow(4.0 * e, 0.5 * e) +
         tail;
}

EnvelopeReport tail_envelope_check(const DiffusedOracle& oracle, double t, const std::vector<double>& radii) {
  const TargetDistribution& target = oracle.target();
  const TailClass& tc = target.tail;
  if (tc.kind == TailKind::SubGaussian)
    throw std::invalid_argument("tail_envelope_check: no envelope defined for sub-Gaussian targets");
  if (radii.empty()) throw std::invalid_argument("tail_envelope_check: empty radius list");
  for (double r : radii)
    if (!(r > 1.0)) throw std::invalid_argument("tail_envelope_check: radii must exceed 1");
  const int d = target.dim;
  EnvelopeReport rep;
  rep.t = t;
  rep.radii = radii;
  if (tc.kind == TailKind::Polynomial) {
    rep.constant = polynomial_envelope_constant(tc.gamma, d, target.poly_C0, t);
  } else {
    rep.constant = std::pow(2.0 * std::numbers::pi * t, -0.5 * d) + tc.C1;
    rep.rate = std::min(1.0 / (8.0 * t), tc.c1 / std::pow(2.0, tc.gamma));
  }
  for (double r : radii) {
    std::vector<double> x(d, 0.0);
    x[0] = r;
    const double p = oracle.density(t, x);
    const double env = tc.kind == TailKind::Polynomial
                           ? rep.constant * std::pow(1.0 + r * r, -0.5 * (1.0 + tc.gamma + d))
                           : rep.constant * std::exp(-rep.rate * std::min(r * r, std::pow(r, tc.gamma)));
    rep.density.push_back(p);
    rep.envelope.push_back(env);
    rep.ratio.push_back(p / env);
    if (p > env) rep.violation = true;
  }
  return rep;
}

}  // namespace tailscore
