#include "tailscore/minimax_lab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tailscore/oracle.hpp"
#include "tailscore/quadrature.hpp"

namespace tailscore {

namespace {

constexpr double kMargin = 14.0;  // Gaussian window half-width in units of √t

double gauss(double z, double t) { return std::exp(-0.5 * z * z / t) / std::sqrt(2.0 * std::numbers::pi * t); }

// Appends GL nodes for [a, b] cut into panels no wider than width.
void append_panels(double a, double b, double width, const quad::Rule& rule, std::vector<double>& x,
                   std::vector<double>& w) {
  if (!(b > a)) return;
  const auto m = static_cast<std::size_t>(std::ceil((b - a) / width));
  const double pw = (b - a) / double(m);
  for (std::size_t p = 0; p < m; ++p) {
    const double mid = a + (double(p) + 0.5) * pw, half = 0.5 * pw;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      x.push_back(mid + half * rule.nodes[i]);
      w.push_back(half * rule.weights[i]);
    }
  }
}

void rule_over(std::vector<double> breaks, double width, unsigned order, std::vector<double>& x,
               std::vector<double>& w) {
  const auto& rule = quad::gauss_legendre(order);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) append_panels(breaks[s], breaks[s + 1], width, rule, x, w);
}

double integral_sq(double (*f)(double)) {
  auto g = [f](double u) { const double v = f(u); return v * v; };
  return quad::adaptive(g, -0.5, 0.0, 1e-14).value + quad::adaptive(g, 0.0, 0.5, 1e-14).value;
}

std::size_t ones(const Signs& b) { return std::size_t(std::count(b.begin(), b.end(), std::uint8_t{1})); }

void check_signs(const PerturbedFamily& f, const Signs& b) {
  if (b.size() != f.cells())
    throw std::invalid_argument("sign vector has " + std::to_string(b.size()) + " entries, family has " +
                                std::to_string(f.cells()) + " cells");
}

double kl_term(double r) {
  if (std::abs(r) < 1e-3) return r * r * (0.5 - r * (1.0 / 6.0 - r * (1.0 / 12.0 - r / 20.0)));
  return (1.0 + r) * std::log1p(r) - r;
}

// |ψ̂(k)|² on a fixed frequency grid, computed once.
struct FourierTable {
  std::vector<double> k, w, psi_hat2;
};

const FourierTable& fourier_table() {
  static const FourierTable table = [] {
    FourierTable ft;
    std::vector<double> u, uw;
    rule_over({0.0, 0.5}, 1.0 / 400.0, 8, u, uw);
    std::vector<double> pu(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) pu[j] = BumpFunction::psi(u[j]) * uw[j];
    rule_over({0.0, 1500.0}, 0.5, 8, ft.k, ft.w);
    ft.psi_hat2.resize(ft.k.size());
    for (std::size_t i = 0; i < ft.k.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < u.size(); ++j) s += pu[j] * std::sin(ft.k[i] * u[j]);
      ft.psi_hat2[i] = 4.0 * s * s;
    }
    return ft;
  }();
  return table;
}

}  // namespace

// ---------------------------------------------------------------- bump

double BumpFunction::psi(double u) {
  const double a = 1.0 - 4.0 * u * u;
  if (a <= 0.0) return 0.0;
  return u * std::exp(-1.0 / a);
}

double BumpFunction::psi1(double u) {
  const double a = 1.0 - 4.0 * u * u;
  if (a <= 0.0) return 0.0;
  const double e = std::exp(-1.0 / a);
  if (e == 0.0) return 0.0;
  return e * (1.0 - 8.0 * u * u / (a * a));
}

double BumpFunction::psi2(double u) {
  const double a = 1.0 - 4.0 * u * u;
  if (a <= 0.0) return 0.0;
  const double e = std::exp(-1.0 / a);
  if (e == 0.0) return 0.0;
  const double a2 = a * a;
  return e * (-8.0 * u / a2 * (1.0 - 8.0 * u * u / a2) - 16.0 * u * (1.0 + 4.0 * u * u) / (a2 * a));
}

double BumpFunction::profile(std::span<const double> u) {
  double r2 = 0.0;
  for (double v : u) r2 += v * v;
  const double a = 1.0 - 4.0 * r2;
  if (u.empty() || a <= 0.0) return 0.0;
  return u[0] * std::exp(-1.0 / a);
}

void BumpFunction::profile_grad(std::span<const double> u, std::span<double> out) {
  double r2 = 0.0;
  for (double v : u) r2 += v * v;
  const double a = 1.0 - 4.0 * r2;
  std::fill(out.begin(), out.end(), 0.0);
  if (u.empty() || a <= 0.0) return;
  const double e = std::exp(-1.0 / a);
  for (std::size_t j = 0; j < u.size(); ++j) out[j] = -8.0 * u[0] * u[j] * e / (a * a);
  out[0] += e;
}

double BumpFunction::sup_norm() {
  // ψ' = 0 where 4u² + 2√2 u - 1 = 0.
  const double u = (std::sqrt(24.0) - std::sqrt(8.0)) / 8.0;
  return psi(u);
}

double BumpFunction::hessian_bound() {
  static const double bound = [] {
    double best = 0.0;
    for (int i = 0; i <= 400000; ++i) best = std::max(best, std::abs(psi2(0.5 * i / 400000.0)));
    return best;
  }();
  return bound;
}

double BumpFunction::theory_lambda(int d) { return 8.0 * hessian_bound() * std::sqrt(double(d)) / grad_at_zero(); }

// ---------------------------------------------------------------- packing

std::size_t hamming(const Signs& a, const Signs& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

std::vector<Signs> gv_packing(std::size_t num_cells, double fraction, std::size_t max_codewords) {
  if (num_cells == 0 || num_cells > 24)
    throw std::invalid_argument("gv_packing: num_cells must lie in [1, 24], got " + std::to_string(num_cells));
  if (!(fraction > 0.0 && fraction <= 0.5))
    throw std::invalid_argument("gv_packing: infeasible distance fraction " + std::to_string(fraction) +
                                " (need 0 < fraction <= 1/2)");
  if (max_codewords < 2) throw std::invalid_argument("gv_packing: max_codewords must be at least 2");
  const auto dmin = static_cast<std::size_t>(std::floor(fraction * double(num_cells) + 1e-12)) + 1;
  if (dmin > num_cells) throw std::invalid_argument("gv_packing: distance exceeds code length");

  static std::mutex mu;
  static std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<Signs>> cache;
  const auto key = std::make_tuple(num_cells, dmin, max_codewords);
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  const std::uint32_t words = 1u << num_cells;
  std::vector<bool> covered(words, false);
  std::vector<std::uint32_t> code;
  // Marks every word within distance r of w.
  auto mark = [&](std::uint32_t w, std::size_t r) {
    auto rec = [&](auto& self, std::uint32_t cur, int start, std::size_t left) -> void {
      covered[cur] = true;
      if (left == 0) return;
      for (int i = start; i < int(num_cells); ++i) self(self, cur ^ (1u << i), i + 1, left - 1);
    };
    rec(rec, w, 0, r);
  };
  for (std::uint32_t w = 0; w < words && code.size() < max_codewords; ++w) {
    if (covered[w]) continue;
    code.push_back(w);
    mark(w, dmin - 1);
  }
  std::vector<Signs> out;
  for (auto w : code) {
    Signs s(num_cells);
    for (std::size_t i = 0; i < num_cells; ++i) s[i] = (w >> i) & 1u;
    out.push_back(std::move(s));
  }
  std::lock_guard lock(mu);
  cache.emplace(key, out);
  return out;
}

// ---------------------------------------------------------------- family

PerturbedFamily::PerturbedFamily(Spec spec) : spec_(spec) {
  if (!(spec_.t > 0.0)) throw std::invalid_argument("PerturbedFamily: t must be positive");
  if (!(spec_.gamma > 0.0)) throw std::invalid_argument("PerturbedFamily: gamma must be positive");
  if (!(spec_.epsilon >= 0.0)) throw std::invalid_argument("PerturbedFamily: epsilon must be non-negative");
  if (!(spec_.lambda > 0.0)) throw std::invalid_argument("PerturbedFamily: lambda must be positive");
  if (spec_.max_cells < 1) throw std::invalid_argument("PerturbedFamily: max_cells must be positive");
  const double g = spec_.gamma;
  const double s = std::sqrt(spec_.t);
  h_ = spec_.lambda * s;

  double base = 0.0, span = 1.0;
  if (spec_.regime == Regime::Polynomial) {
    if (!(spec_.R > 0.0)) throw std::invalid_argument("PerturbedFamily: R must be positive");
    norm_ = std::exp(std::lgamma(0.5 * (g + 2.0)) - std::lgamma(0.5 * (g + 1.0))) / std::sqrt(std::numbers::pi);
    base = spec_.R;
    span = spec_.R;
  } else {
    norm_ = 1.0 / (2.0 * std::tgamma(1.0 + 1.0 / g));
  }
  const auto count = static_cast<std::size_t>(std::floor(span / h_ + 1e-12));
  if (count == 0) {
    std::ostringstream os;
    os << "geometry violated: bump width h = " << h_ << " exceeds the grid extent " << span;
    throw std::invalid_argument(os.str());
  }
  truncated_ = count > spec_.max_cells;
  const std::size_t used = std::min(count, spec_.max_cells);
  // exponential grid sits in the middle of the unit cube
  if (spec_.regime == Regime::Exponential) base = 0.5 * (1.0 - double(used) * h_);
  for (std::size_t i = 0; i < used; ++i) centers_.push_back(base + (double(i) + 0.5) * h_);

  const double margin = kMargin * s;
  const double xlo = centers_.front() - 0.5 * h_ - margin, xhi = centers_.back() + 0.5 * h_ + margin;
  std::vector<double> br{xlo, xhi};
  for (double c : centers_) {
    br.push_back(c - 0.5 * h_);
    br.push_back(c + 0.5 * h_);
  }
  if (xlo < 0.0 && xhi > 0.0) br.push_back(0.0);
  rule_over(br, 0.25 * std::min(h_, s), 16, x_, w_);

  std::vector<double> ybr{xlo - margin, xhi + margin};
  if (xlo - margin < 0.0 && xhi + margin > 0.0) ybr.push_back(0.0);
  rule_over(ybr, 0.25 * s, 16, y_, yw_);
  qy_.resize(y_.size());
  for (std::size_t j = 0; j < y_.size(); ++j) qy_[j] = q0(y_[j]) * yw_[j];

  f0_.resize(x_.size());
  f0p_.resize(x_.size());
  for (std::size_t k = 0; k < x_.size(); ++k) f0_[k] = f0(x_[k], &f0p_[k]);

  const unsigned panels = std::max(4u, unsigned(std::ceil(4.0 * spec_.lambda)));
  rule_over({-0.5 * h_, 0.5 * h_}, h_ / panels, 32, by_, bw_);
  bpsi_.resize(by_.size());
  for (std::size_t j = 0; j < by_.size(); ++j) bpsi_[j] = BumpFunction::psi(by_[j] / h_) * bw_[j];

  const std::size_t N = centers_.size();
  lo_.resize(N);
  hi_.resize(N);
  g_.resize(N);
  gp_.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double a = centers_[i] - 0.5 * h_ - margin, b = centers_[i] + 0.5 * h_ + margin;
    lo_[i] = std::size_t(std::lower_bound(x_.begin(), x_.end(), a) - x_.begin());
    hi_[i] = std::size_t(std::upper_bound(x_.begin(), x_.end(), b) - x_.begin());
    for (std::size_t k = lo_[i]; k < hi_[i]; ++k) {
      double v, dv;
      smoothed_bump(x_[k] - centers_[i], v, dv);
      g_[i].push_back(v);
      gp_[i].push_back(dv);
    }
  }
}

double PerturbedFamily::q0(double x) const {
  if (spec_.regime == Regime::Polynomial) return norm_ * std::pow(1.0 + x * x, -0.5 * (spec_.gamma + 2.0));
  return norm_ * std::exp(-std::pow(std::abs(x), spec_.gamma));
}

double PerturbedFamily::q(const Signs& b, double x) const {
  check_signs(*this, b);
  double v = q0(x);
  for (std::size_t i = 0; i < centers_.size(); ++i)
    if (b[i]) v += spec_.epsilon * BumpFunction::psi((x - centers_[i]) / h_);
  return v;
}

double PerturbedFamily::base_inf() const {
  const double a = centers_.front() - 0.5 * h_, b = centers_.back() + 0.5 * h_;
  return std::min(q0(a), q0(b));
}

double PerturbedFamily::f0(double x, double* deriv) const {
  const double margin = kMargin * std::sqrt(spec_.t);
  if (x - margin < y_.front() - 1e-12 || x + margin > y_.back() + 1e-12) {
    // outside the precomputed range
    auto f = [&](double y) { return gauss(x - y, spec_.t) * q0(y); };
    const double br[] = {x - margin, x, x + margin};
    const double v = quad::adaptive(f, std::span<const double>(br), 1e-12).value;
    if (deriv) {
      auto fp = [&](double y) { return -(x - y) / spec_.t * gauss(x - y, spec_.t) * q0(y); };
      *deriv = quad::adaptive(fp, std::span<const double>(br), 1e-12).value;
    }
    return v;
  }
  const auto j0 = std::size_t(std::lower_bound(y_.begin(), y_.end(), x - margin) - y_.begin());
  const auto j1 = std::size_t(std::upper_bound(y_.begin(), y_.end(), x + margin) - y_.begin());
  double v = 0.0, dv = 0.0;
  for (std::size_t j = j0; j < j1; ++j) {
    const double z = x - y_[j];
    const double k = gauss(z, spec_.t) * qy_[j];
    v += k;
    dv -= z / spec_.t * k;
  }
  if (deriv) *deriv = dv;
  return v;
}

void PerturbedFamily::smoothed_bump(double u, double& value, double& deriv) const {
  value = deriv = 0.0;
  for (std::size_t j = 0; j < by_.size(); ++j) {
    const double z = u - by_[j];
    const double k = gauss(z, spec_.t) * bpsi_[j];
    value += k;
    deriv -= z / spec_.t * k;
  }
}

void PerturbedFamily::perturbation(const Signs& b, std::vector<double>& df, std::vector<double>& dg) const {
  check_signs(*this, b);
  df.assign(x_.size(), 0.0);
  dg.assign(x_.size(), 0.0);
  const double e = spec_.epsilon;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    if (!b[i]) continue;
    for (std::size_t k = lo_[i]; k < hi_[i]; ++k) {
      df[k] += e * g_[i][k - lo_[i]];
      dg[k] += e * gp_[i][k - lo_[i]];
    }
  }
}

// ---------------------------------------------------------------- radii

namespace {

struct Radii {
  double chi2 = 0.0, kl = 0.0;
};

Radii radii(const PerturbedFamily& f, const Signs& b) {
  std::vector<double> df, dg;
  f.perturbation(b, df, dg);
  Radii r;
  for (std::size_t k = 0; k < f.nodes(); ++k) {
    if (df[k] == 0.0) continue;
    const double p = f.f0_at(k);
    if (!(p > 1e-300)) {
      std::ostringstream os;
      os << "f0 underflows at x = " << f.node(k);
      throw std::range_error(os.str());
    }
    const double q = df[k] / p;
    if (!(1.0 + q > 0.0)) {
      std::ostringstream os;
      os << "perturbed density is not positive at x = " << f.node(k);
      throw std::domain_error(os.str());
    }
    r.chi2 += f.weight(k) * p * q * q;
    r.kl += f.weight(k) * p * kl_term(q);
  }
  if (r.kl < 0.0 || r.kl > r.chi2 * (1.0 + 1e-12) + 1e-300)
    throw std::logic_error("KL radius outside [0, chi2]");
  return r;
}

}  // namespace

double chi2_radius(const PerturbedFamily& family, const Signs& b) { return radii(family, b).chi2; }
double kl_radius(const PerturbedFamily& family, const Signs& b) { return radii(family, b).kl; }

double score_separation(const PerturbedFamily& family, const Signs& b, const Signs& bp) {
  check_signs(family, b);
  check_signs(family, bp);
  if (b == bp) return 0.0;
  std::vector<double> df1, dg1, df2, dg2;
  family.perturbation(b, df1, dg1);
  family.perturbation(bp, df2, dg2);
  double acc = 0.0;
  for (std::size_t k = 0; k < family.nodes(); ++k) {
    const double p = family.f0_at(k), pp = family.f0_deriv_at(k);
    const double num = pp * (df2[k] - df1[k]) + p * (dg1[k] - dg2[k]) + dg1[k] * df2[k] - dg2[k] * df1[k];
    if (num == 0.0) continue;
    const double den = (p + df1[k]) * (p + df2[k]);
    if (!(den > 0.0) || !(p > 1e-300)) {
      std::ostringstream os;
      os << "score separation: quadrature failed in the far tail at x = " << family.node(k);
      throw std::range_error(os.str());
    }
    const double ds = num / den;
    acc += family.weight(k) * p * ds * ds;
  }
  return acc;
}

double separation_scaling(const PerturbedFamily& family, std::size_t dh) {
  const double e = family.epsilon();
  double s = e * e * std::pow(family.t(), -0.5) * double(dh);
  if (family.spec().regime == Regime::Polynomial) s *= std::pow(family.R(), family.spec().gamma + 2.0);
  return s;
}

FanoReport fano_budget_report(const PerturbedFamily& family, const std::vector<Signs>& packing, std::size_t n) {
  if (packing.size() < 2) throw std::invalid_argument("fano_budget_report: packing needs at least two codewords");
  FanoReport rep;
  rep.n = n;
  rep.packing_size = packing.size();
  rep.log_packing = std::log(double(packing.size()));
  for (const auto& b : packing) {
    const Radii r = radii(family, b);
    if (r.kl > rep.max_kl) {
      rep.max_kl = r.kl;
      rep.chi2_at_max = r.chi2;
    }
  }
  rep.ratio = double(n) * rep.max_kl / rep.log_packing;
  rep.budget_ok = rep.ratio <= 1.0;

  const std::size_t K = family.nodes(), P = packing.size();
  std::vector<std::vector<double>> df(P), dg(P);
  for (std::size_t a = 0; a < P; ++a) family.perturbation(packing[a], df[a], dg[a]);
  rep.min_separation = std::numeric_limits<double>::infinity();
  rep.min_separation_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < P; ++a) {
    for (std::size_t c = a + 1; c < P; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double p = family.f0_at(k), pp = family.f0_deriv_at(k);
        const double num =
            pp * (df[c][k] - df[a][k]) + p * (dg[a][k] - dg[c][k]) + dg[a][k] * df[c][k] - dg[c][k] * df[a][k];
        if (num == 0.0) continue;
        const double ds = num / ((p + df[a][k]) * (p + df[c][k]));
        acc += family.weight(k) * p * ds * ds;
      }
      const std::size_t dh = hamming(packing[a], packing[c]);
      if (acc < rep.min_separation) {
        rep.min_separation = acc;
        rep.min_separation_hamming = dh;
      }
      rep.min_separation_ratio = std::min(rep.min_separation_ratio, acc / separation_scaling(family, dh));
    }
  }
  return rep;
}

// ---------------------------------------------------------------- Sobolev

SobolevReport sobolev_budget(const PerturbedFamily& family, double beta, double radius_L, bool fourier) {
  if (!(beta >= 0.0)) throw std::invalid_argument("sobolev_budget: beta must be non-negative");
  if (!(radius_L > 0.0)) throw std::invalid_argument("sobolev_budget: L must be positive");
  const bool integer = beta == std::floor(beta);
  if (!integer && beta > 2.0) throw CapabilityError("sobolev_budget: fractional beta above 2 is unsupported");

  std::vector<Signs> signs = family.signs;
  if (signs.empty()) signs.push_back(Signs(family.cells(), 1));
  const double e = family.epsilon(), h = family.h();
  SobolevReport rep;
  double worst = 0.0;
  if (integer && beta <= 2.0 && !fourier) {
    rep.route = "derivative";
    static const double I[3] = {integral_sq(BumpFunction::psi), integral_sq(BumpFunction::psi1),
                                integral_sq(BumpFunction::psi2)};
    const int m = int(beta);
    for (const auto& b : signs) {
      check_signs(family, b);
      worst = std::max(worst, e * e * double(ones(b)) * std::pow(h, 1.0 - 2.0 * m) * I[m]);
    }
  } else {
    rep.route = "fourier";
    const auto& ft = fourier_table();
    for (const auto& b : signs) {
      check_signs(family, b);
      // |S(k)|² = Σ_m A_m cos(k m) with A_m the number of ordered pairs at lag m
      std::vector<double> A(b.size(), 0.0);
      for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
          if (b[i] && b[j]) A[i > j ? i - j : j - i] += 1.0;
      double acc = 0.0;
      for (std::size_t q = 0; q < ft.k.size(); ++q) {
        const double k = ft.k[q];
        double s2 = A[0];
        for (std::size_t m = 1; m < A.size(); ++m)
          if (A[m] != 0.0) s2 += A[m] * std::cos(k * double(m));
        acc += ft.w[q] * std::pow(k, 2.0 * beta) * s2 * ft.psi_hat2[q];
      }
      worst = std::max(worst, e * e * std::pow(h, 1.0 - 2.0 * beta) * acc / std::numbers::pi);
    }
  }
  rep.seminorm = std::sqrt(worst);
  rep.ratio = rep.seminorm / radius_L;
  rep.violated = rep.ratio > 1.0;
  return rep;
}

// ---------------------------------------------------------------- constraints

namespace {

double base_mass(const PerturbedFamily& f) {
  auto q = [&](double x) { return f.q0(x); };
  std::vector<double> br{-std::numeric_limits<double>::infinity(), 0.0, std::numeric_limits<double>::infinity()};
  for (double s = 1.0; s < 1e6; s *= 4.0) {
    br.push_back(s);
    br.push_back(-s);
  }
  std::sort(br.begin(), br.end());
  return quad::adaptive(q, std::span<const double>(br), 1e-14).value;
}

double fano_ratio(const PerturbedFamily& f, std::size_t n) {
  if (f.signs.size() < 2) return std::numeric_limits<double>::infinity();
  double mk = 0.0;
  for (const auto& b : f.signs) mk = std::max(mk, radii(f, b).kl);
  return double(n) * mk / std::log(double(f.signs.size()));
}

}  // namespace

std::string ConstraintReport::failing() const {
  std::string s;
  auto add = [&](bool ok, const char* name) {
    if (ok) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(positivity, "positivity");
  add(mass, "mass");
  add(sobolev, "sobolev");
  add(geometry, "geometry");
  add(fano, "fano");
  return s;
}

ConstraintReport check_constraints(const PerturbedFamily& family, std::size_t n, double beta,
                                   const LabOptions& options) {
  ConstraintReport c;
  const double e = family.epsilon(), h = family.h();
  c.positivity_ratio = e * BumpFunction::sup_norm() / family.base_inf();

  std::vector<std::uint8_t> used(family.cells(), 0);
  for (const auto& b : family.signs) {
    check_signs(family, b);
    for (std::size_t i = 0; i < b.size(); ++i) used[i] |= b[i];
  }
  c.min_q = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.cells(); ++i) {
    const double ci = family.centers()[i];
    for (int k = -100; k <= 100; ++k) {
      const double x = ci + 0.5 * h * k / 100.0;
      double v = family.q0(x);
      if (used[i]) v += e * BumpFunction::psi((x - ci) / h);
      c.min_q = std::min(c.min_q, v);
    }
  }
  c.positivity = c.positivity_ratio <= 0.5 && c.min_q >= 0.0;

  static const double bump_integral =
      quad::adaptive(BumpFunction::psi, -0.5, 0.0, 1e-14).value + quad::adaptive(BumpFunction::psi, 0.0, 0.5, 1e-14).value;
  const double m0 = base_mass(family);
  c.mass_error = std::abs(m0 - 1.0);
  for (const auto& b : family.signs)
    c.mass_error = std::max(c.mass_error, std::abs(m0 + e * h * bump_integral * double(ones(b)) - 1.0));
  c.mass = c.mass_error <= 1e-8;

  c.sobolev_ratio = sobolev_budget(family, beta, options.sobolev_L).ratio;
  c.sobolev = c.sobolev_ratio <= 1.0;
  c.geometry = family.cells() >= 1 && h <= family.R();
  c.fano_ratio = fano_ratio(family, n);
  c.fano = c.fano_ratio <= 1.0;
  return c;
}

PerturbedFamily build_family(const CoupledParameters& p, const LabOptions& options) {
  PerturbedFamily::Spec s;
  s.regime = p.regime;
  s.gamma = p.gamma;
  s.t = p.t;
  s.epsilon = p.epsilon;
  s.R = p.R;
  s.lambda = options.lambda;
  s.max_cells = options.max_cells;
  PerturbedFamily f(s);
  f.signs = gv_packing(f.cells(), options.packing_fraction, options.max_codewords);
  return f;
}

CoupledParameters coupled_parameters(Regime regime, std::size_t n, double t, int d, double gamma, double beta,
                                     double delta, const LabOptions& options) {
  if (d != 1) throw CapabilityError("coupled_parameters: the lower-bound lab is one-dimensional");
  if (n < 10) throw std::invalid_argument("coupled_parameters: n must be at least 10");
  if (!(t > 0.0)) throw std::invalid_argument("coupled_parameters: t must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("coupled_parameters: gamma must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("coupled_parameters: beta must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("coupled_parameters: delta must lie in (0, 1)");
  if (!(options.safety > 0.0 && options.safety <= 1.0))
    throw std::invalid_argument("coupled_parameters: safety must lie in (0, 1]");

  CoupledParameters p;
  p.regime = regime;
  p.d = d;
  p.n = n;
  p.t = t;
  p.gamma = gamma;
  p.beta = beta;
  p.delta = delta;
  p.lambda = options.lambda;
  p.h = options.lambda * std::sqrt(t);
  const double dn = double(n), dd = double(d);
  if (regime == Regime::Polynomial) {
    p.window_lo = std::pow(dn, -2.0 * (dd + 2.0 * gamma + 2.0) /
                                   (dd * (dd + 2.0 * (gamma + 1.0)) + 2.0 * beta * (dd + gamma + 1.0)));
    p.window_hi = 1.0;
  } else {
    p.window_lo = std::pow(dn, -2.0 / (dd + 2.0 * beta));
    p.window_hi = std::numeric_limits<double>::infinity();
  }
  p.in_window = t >= p.window_lo && t <= p.window_hi;
  if (!p.in_window) {
    std::ostringstream os;
    os << "t = " << t << (t < p.window_lo ? " below" : " above") << " the admissible window [" << p.window_lo << ", "
       << p.window_hi << "]";
    p.flag = os.str();
  }
  if (regime == Regime::Exponential && p.h > 1.0) {
    std::ostringstream os;
    os << "geometry violated: bump width h = " << p.h << " exceeds the unit cube";
    throw std::invalid_argument(os.str());
  }

  const double rho = (1.0 - delta) / (dd + gamma + 1.0);
  auto set = [&](double c) {
    p.c = c;
    if (regime == Regime::Polynomial) {
      p.epsilon = c / (dn * std::pow(t, 0.5 * dd));
      p.R = std::pow(p.epsilon, -rho);
    } else {
      p.epsilon = c / (std::sqrt(dn) * std::pow(t, 0.25 * dd));
      p.R = 1.0;
    }
  };
  ConstraintReport last;
  auto feasible = [&](double c) {
    set(c);
    if (p.R < p.h) {
      last = ConstraintReport{};
      return false;
    }
    const PerturbedFamily f = build_family(p, options);
    last = check_constraints(f, n, beta, options);
    return last.all();
  };

  double lo = 1.0, hi;
  if (feasible(lo)) {
    hi = 2.0;
    while (feasible(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) throw std::runtime_error("coupled_parameters: constraints never bind");
    }
  } else {
    hi = lo;
    lo = 0.5;
    while (!feasible(lo)) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-12) {
        set(lo);
        if (p.R < p.h) throw std::invalid_argument("geometry violated: h exceeds R for every admissible c");
        throw std::runtime_error("coupled_parameters: no admissible constant c");
      }
    }
  }
  for (int it = 0; it < 16; ++it) {
    const double mid = std::sqrt(lo * hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  feasible(hi);
  p.binding = last.failing();
  p.c_max = lo;
  set(options.safety * lo);
  const PerturbedFamily f = build_family(p, options);
  p.grid_count = f.cells();
  p.grid_truncated = f.truncated();
  p.constraints = check_constraints(f, n, beta, options);
  return p;
}

SeparationSweep separation_t_sweep(Regime regime, double gamma, double epsilon, double R,
                                   const std::vector<double>& t_list, double lambda) {
  if (t_list.size() < 4) throw std::invalid_argument("separation_t_sweep: need at least 4 values of t");
  SeparationSweep sw;
  std::vector<RatePoint> pts;
  for (double t : t_list) {
    PerturbedFamily::Spec s;
    s.regime = regime;
    s.gamma = gamma;
    s.t = t;
    s.epsilon = epsilon;
    s.R = R;
    s.lambda = lambda;
    s.max_cells = 1;
    const PerturbedFamily f(s);
    const double sep = score_separation(f, Signs{1}, Signs{0});
    sw.t.push_back(t);
    sw.separation.push_back(sep);
    sw.ratio.push_back(sep / separation_scaling(f, 1));
    pts.push_back({t, sep, 0.0});
  }
  const double r0 = sw.ratio.front();
  for (double& r : sw.ratio) r /= r0;
  sw.min_ratio = *std::min_element(sw.ratio.begin(), sw.ratio.end());
  sw.fit = fit_rate(pts, Axis::LogT);
  return sw;
}

void write_constraints_csv(const std::vector<CoupledParameters>& rows, std::ostream& os) {
  os << "regime,n,t,gamma,beta,delta,lambda,c_max,c,epsilon,R,h,grid_count,truncated,in_window,"
        "positivity_ratio,min_q,mass_error,sobolev_ratio,fano_ratio,binding,all_ok\n";
  std::ostringstream line;
  line.precision(10);
  for (const auto& p : rows) {
    const auto& c = p.constraints;
    line.str("");
    line << to_string(p.regime) << ',' << p.n << ',' << p.t << ',' << p.gamma << ',' << p.beta << ',' << p.delta << ','
         << p.lambda << ',' << p.c_max << ',' << p.c << ',' << p.epsilon << ',' << p.R << ',' << p.h << ','
         << p.grid_count << ',' << p.grid_truncated << ',' << p.in_window << ',' << c.positivity_ratio << ','
         << c.min_q << ',' << c.mass_error << ',' << c.sobolev_ratio << ',' << c.fano_ratio << ',' << p.binding << ',' << c.all() << '\n';
    os << line.str();
  }
}

}  // namespace tailscore
