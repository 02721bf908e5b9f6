#include "tailscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "tailscore/parallel.hpp"
#include "tailscore/quadrature.hpp"

namespace tailscore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median_of_block_means(std::vector<double> v, std::size_t blocks) {
  if (v.size() < blocks) blocks = std::max<std::size_t>(1, v.size());
  std::vector<double> means;
  const std::size_t per = v.size() / blocks;
  for (std::size_t b = 0; b < blocks; ++b) {
    double s = 0.0;
    const std::size_t end = b + 1 == blocks ? v.size() : (b + 1) * per;
    for (std::size_t i = b * per; i < end; ++i) s += v[i];
    means.push_back(s / double(end - b * per));
  }
  std::sort(means.begin(), means.end());
  const std::size_t k = means.size();
  return k % 2 ? means[k / 2] : 0.5 * (means[k / 2 - 1] + means[k / 2]);
}

std::vector<double> oracle_breaks(const TargetDistribution& t) {
  std::vector<double> b = t.kinks;
  for (double s = t.scale; s < 1e5; s *= 4.0) {
    b.push_back(s);
    b.push_back(-s);
  }
  return b;
}

void require_d1(const DiffusedOracle& o, const char* what) {
  if (o.dim() != 1) throw CapabilityError(std::string(what) + ": d = 1 only");
}

}  // namespace

std::string to_string(Axis a) {
  switch (a) {
    case Axis::LogN: return "log_n";
    case Axis::LogT: return "log_t";
    case Axis::LogT0: return "log_t0";
    case Axis::LogRho: return "log_rho";
  }
  return "unknown";
}

EvalSet make_eval_set(const DiffusedOracle& oracle, double t, std::size_t eval_samples, Stream& rng, int threads) {
  if (eval_samples < 1000) throw std::invalid_argument("weighted_score_mse: eval_samples must be at least 1000");
  if (!(t > 0.0)) throw std::invalid_argument("weighted_score_mse: t must be positive");
  EvalSet e;
  e.t = t;
  e.points = forward_sample(oracle.target(), t, eval_samples, rng);
  e.true_score = Matrix(eval_samples, oracle.dim());
  parallel_for(eval_samples, [&](std::size_t j) {
    oracle.density_and_score(t, e.points.row(j), e.true_score.row(j));
  }, threads);
  return e;
}

WeightedMseEstimate weighted_score_mse(const ScoreFn& estimator, const EvalSet& eval, int threads) {
  const std::size_t M = eval.points.rows();
  const std::size_t d = eval.points.cols();
  std::vector<double> v(M);
  parallel_for(M, [&](std::size_t j) {
    std::vector<double> s(d);
    estimator(eval.t, eval.points.row(j), s);
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = s[i] - eval.true_score(j, i);
      acc += e * e;
    }
    if (!std::isfinite(acc)) throw std::logic_error("weighted_score_mse: non-finite summand");
    v[j] = acc;
  }, threads);
  double s1 = 0.0, s2 = 0.0;
  for (double x : v) {
    s1 += x;
    s2 += x * x;
  }
  WeightedMseEstimate out;
  out.eval_points = M;
  out.t = eval.t;
  out.value = s1 / double(M);
  out.std_error = std::sqrt(std::max(0.0, s2 / double(M) - out.value * out.value) / double(M - 1));
  out.median_of_means = median_of_block_means(std::move(v), 16);
  return out;
}

WeightedMseEstimate weighted_score_mse(const ScoreFn& estimator, const DiffusedOracle& oracle, double t,
                                       std::size_t eval_samples, Stream& rng, int threads) {
  return weighted_score_mse(estimator, make_eval_set(oracle, t, eval_samples, rng, threads), threads);
}

IntegratedError integrated_score_error(const ScoreFn& estimator, const DiffusedOracle& oracle, double t0, double T,
                                       std::size_t grid, std::size_t eval_samples, Stream& rng, int threads) {
  if (!(t0 > 0.0) || !(T > t0)) throw std::invalid_argument("integrated_score_error: need 0 < t0 < T");
  if (grid < 8) throw std::invalid_argument("integrated_score_error: grid size must be at least 8");
  IntegratedError out;
  const double u0 = std::log(t0), u1 = std::log(T), du = (u1 - u0) / double(grid - 1);
  double var = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    const double t = std::exp(u0 + du * double(k));
    out.t_grid.push_back(t);
    Stream sub = rng.substream(k);
    out.per_t.push_back(weighted_score_mse(estimator, oracle, t, eval_samples, sub, threads));
    // ∫ f dt = ∫ f(e^u) e^u du, trapezoid in u.
    const double w = (k == 0 || k + 1 == grid ? 0.5 : 1.0) * du * t;
    out.value += w * out.per_t.back().value;
    var += std::pow(w * out.per_t.back().std_error, 2);
  }
  out.std_error = std::sqrt(var);
  return out;
}

RateFit fit_rate(const std::vector<RatePoint>& points, Axis axis) {
  if (points.size() < 4) throw std::invalid_argument("fit_rate: need at least 4 points");
  bool all_se = true;
  for (const auto& p : points) {
    if (!(p.value > 0.0) || !(p.abscissa > 0.0)) throw std::invalid_argument("fit_rate: values must be positive");
    if (!(p.stderr_ > 0.0)) all_se = false;
  }
  const std::size_t n = points.size();
  std::vector<double> x(n), y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(points[i].abscissa);
    y[i] = std::log(points[i].value);
    const double rel = points[i].stderr_ / points[i].value;
    w[i] = all_se ? 1.0 / (rel * rel) : 1.0;
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
    syy += w[i] * (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: abscissae must not all coincide");
  RateFit f;
  f.axis = axis;
  f.points = points;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.residuals.push_back(r);
    ssr += w[i] * r * r;
  }
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  const double s2 = ssr / double(n - 2);
  const boost::math::students_t dist(double(n - 2));
  f.slope_halfwidth = boost::math::quantile(boost::math::complement(dist, 0.025)) * std::sqrt(s2 / sxx);
  return f;
}

EarlyStopCurve early_stopping_bias_curve(const DiffusedOracle& oracle, const std::vector<double>& t0_list, double beta,
                                         int threads) {
  require_d1(oracle, "early_stopping_bias_curve");
  if (t0_list.empty()) throw std::invalid_argument("early_stopping_bias_curve: empty t0 list");
  for (double t0 : t0_list)
    if (!(t0 > 0.0 && t0 < 1.0)) throw std::invalid_argument("early_stopping_bias_curve: t0 must lie in (0, 1)");
  const TargetDistribution& target = oracle.target();
  EarlyStopCurve c;
  c.points.resize(t0_list.size());
  parallel_for(t0_list.size(), [&](std::size_t i) {
    const double t0 = t0_list[i];
    auto br = oracle_breaks(target);
    for (double k : {1.0, 4.0, 12.0}) {
      br.push_back(k * std::sqrt(t0));
      br.push_back(-k * std::sqrt(t0));
    }
    const auto tv = tv_1d([&](double x) { const double xx[1] = {x}; return target.pdf(xx); },
                          [&](double x) { const double xx[1] = {x}; return oracle.density(t0, xx); }, kInf, br);
    c.points[i] = {t0, tv.value, 0.0, false};
  }, threads);
  std::vector<RatePoint> pts;
  for (const auto& p : c.points) pts.push_back({p.x, p.tv, 0.0});
  if (pts.size() >= 4) c.fit = fit_rate(pts, Axis::LogT0);
  const double g = target.tail.gamma;
  const int d = target.dim;
  c.predicted_smoothing = beta / 2.0;
  c.predicted_polynomial = beta * (g + 1.0) / (d + 2.0 * (g + 1.0) + 2.0 * beta);
  return c;
}

InitGapReport initialization_gap(const DiffusedOracle& oracle, const std::vector<double>& T_list, int threads) {
  require_d1(oracle, "initialization_gap");
  InitGapReport rep;
  rep.first_moment = oracle.first_abs_moment();
  rep.lemma_checked = std::isfinite(rep.first_moment);
  if (!rep.lemma_checked) rep.notice = "first moment is infinite; lemma check skipped";
  rep.points.resize(T_list.size());
  parallel_for(T_list.size(), [&](std::size_t i) {
    const double T = T_list[i];
    if (!(T > 0.0)) throw std::invalid_argument("initialization_gap: T must be positive");
    auto br = oracle_breaks(oracle.target());
    for (double k : {1.0, 4.0, 12.0}) {
      br.push_back(k * std::sqrt(T));
      br.push_back(-k * std::sqrt(T));
    }
    const auto tv = tv_1d([&](double x) { const double xx[1] = {x}; return oracle.density(T, xx); },
                          [&](double x) { return std::exp(-0.5 * x * x / T) / std::sqrt(2.0 * std::numbers::pi * T); },
                          kInf, br);
    CurvePoint p{T, tv.value, rep.first_moment / (2.0 * std::sqrt(T)), false};
    p.violated = rep.lemma_checked && p.tv > p.bound;
    rep.points[i] = p;
  }, threads);
  for (const auto& p : rep.points) rep.any_violation = rep.any_violation || p.violated;
  return rep;
}

double solve_c_alpha(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("solve_c_alpha: alpha must be positive");
  const double C = concentration_constant(alpha);
  auto ok = [C](double c) { return c > 2.0 && c > 2.0 * C * (1.0 + std::sqrt(c)); };
  double lo = 2.0, hi = 4.0;
  while (!ok(hi)) hi *= 2.0;
  if (ok(lo)) return lo * (1.0 + 1e-9);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi * (1.0 + 1e-9);
}

RegionReport region_diagnostics(const DiffusedOracle& oracle, double t, const std::vector<std::size_t>& n_list,
                                double alpha, int threads) {
  require_d1(oracle, "region_diagnostics");
  if (!(t > 0.0)) throw std::invalid_argument("region_diagnostics: t must be positive");
  const TargetDistribution& target = oracle.target();
  const int d = 1;
  RegionReport rep;
  rep.t = t;
  rep.alpha = alpha;
  rep.c_alpha = solve_c_alpha(alpha);
  rep.regime = regime_of(target);
  rep.gamma = target.tail.gamma;
  const double g = rep.gamma;
  const double ca = rep.c_alpha;

  // Level sets are taken as one interval around the mode (all builtins are unimodal).
  double mode = 0.0;
  if (!target.symmetric) {
    double best = -1.0;
    for (int i = -400; i <= 400; ++i) {
      const double x[1] = {0.05 * i * target.scale};
      const double p = oracle.density(t, x);
      if (p > best) {
        best = p;
        mode = x[0];
      }
    }
  }
  const double xm[1] = {mode};
  const double peak = oracle.density(t, xm);

  rep.rows.resize(n_list.size());
  parallel_for(n_list.size(), [&](std::size_t i) {
    RegionRow row;
    row.n = n_list[i];
    row.rho = default_threshold(row.n, d, t);
    row.level = ca * row.rho;
    row.lo = row.hi = mode;
    if (peak > row.level) {
      auto above = [&](double x) {
        const double xx[1] = {x};
        return oracle.density(t, xx) > row.level;
      };
      for (int side : {-1, 1}) {
        double step = target.scale, inner = mode, outer = mode + side * step;
        while (above(outer)) {
          inner = outer;
          step *= 2.0;
          outer = mode + side * step;
        }
        for (int it = 0; it < 200 && std::abs(outer - inner) > 1e-13 * (1.0 + std::abs(outer)); ++it) {
          const double mid = 0.5 * (inner + outer);
          (above(mid) ? inner : outer) = mid;
        }
        (side < 0 ? row.lo : row.hi) = 0.5 * (inner + outer);
      }
      row.g1_volume = row.hi - row.lo;
      row.g2_mass = oracle.outside_mass(t, row.lo, row.hi);
    } else {
      row.g2_mass = 1.0;
    }
    const double L = std::log(1.0 / row.rho);
    if (rep.regime == Regime::Polynomial) {
      const double e = 1.0 + g + d;
      row.g1_ratio = row.g1_volume / std::pow(row.rho, -d / e);
      row.g2_ratio = row.g2_mass / std::pow(row.rho, (g + 1.0) / e);
      const double Cg = polynomial_envelope_constant(g, d, target.poly_C0, t);
      row.g1_bound = 2.0 * std::pow(Cg / row.level, 1.0 / e);
      // Ball volume plus surface area in d = 1 are 2 and 2.
      row.g2_bound = std::pow(ca, (g + 1.0) / e) * std::pow(Cg, d / e) * 4.0 * std::pow(row.rho, (g + 1.0) / e);
    } else {
      const double k = std::min(g, 2.0);
      row.g1_ratio = row.g1_volume / std::pow(L, d / g);
      row.g2_ratio = row.g2_mass / (row.rho * std::pow(L, d / k));
      const double Cs = std::pow(2.0 * std::numbers::pi * t, -0.5 * d) + target.tail.C1;
      const double c = std::min(1.0 / (8.0 * t), target.tail.c1 / std::pow(2.0, g));
      const double s = std::log(Cs / row.level) / c;
      const double r = s > 0.0 ? std::max(std::sqrt(s), std::pow(s, 1.0 / g)) : 0.0;
      row.g1_bound = 2.0 * r;
      auto env = [&](double x) { return Cs * std::exp(-c * std::min(x * x, std::pow(x, g))); };
      const double inf = std::numeric_limits<double>::infinity();
      const double br[] = {r, std::max(r, 1.0), r + 1.0 / std::sqrt(c), inf};
      const double tail = quad::adaptive(env, std::span<const double>(br), 1e-10).value;
      row.g2_bound = row.level * 2.0 * r + 2.0 * tail;
    }
    rep.rows[i] = row;
  }, threads);

  std::vector<RatePoint> g1, g2;
  for (const auto& row : rep.rows) {
    if (row.g1_volume <= 0.0) continue;
    if (rep.regime == Regime::Polynomial) {
      g1.push_back({row.rho, row.g1_volume, 0.0});
      g2.push_back({row.rho, row.g2_mass, 0.0});
    } else {
      const double L = std::log(1.0 / row.rho);
      g1.push_back({double(row.n), row.g1_volume / std::pow(L, d / g), 0.0});
      g2.push_back({row.rho, row.g2_mass / std::pow(L, d / std::min(g, 2.0)), 0.0});
    }
  }
  if (g1.size() < 4)
    throw std::invalid_argument("region_diagnostics: the bulk set is empty for too many n; use larger n");
  if (rep.regime == Regime::Polynomial) {
    rep.g1_fit = fit_rate(g1, Axis::LogRho);
    rep.g1_predicted = -double(d) / (1.0 + g + d);
    rep.g2_predicted = (g + 1.0) / (d + g + 1.0);
  } else {
    rep.g1_fit = fit_rate(g1, Axis::LogN);
    rep.g1_predicted = 0.0;
    rep.g2_predicted = 1.0;
  }
  rep.g2_fit = fit_rate(g2, Axis::LogRho);

  const RegionRow* first = nullptr;
  for (const auto& row : rep.rows) {
    if (row.g1_volume > 0.0 && !first) first = &row;
    if (row.g1_volume > row.g1_bound * (1.0 + 1e-9) || row.g2_mass > row.g2_bound * (1.0 + 1e-9)) rep.one_sided = false;
  }
  for (const auto& row : rep.rows) {
    if (row.g1_volume <= 0.0) continue;
    rep.g1_ratio_growth = std::max(rep.g1_ratio_growth, row.g1_ratio / first->g1_ratio);
    rep.g2_ratio_growth = std::max(rep.g2_ratio_growth, row.g2_ratio / first->g2_ratio);
  }
  return rep;
}

}  // namespace tailscore
