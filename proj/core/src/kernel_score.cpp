#include "tailscore/kernel_score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "kde_kernel.hpp"
#include "tailscore/parallel.hpp"

namespace tailscore {

namespace {

// Samples whose exponent exceeds the nearest one by more than this are
// skipped; each contributes below e^{-72} of the nearest term.
constexpr double kExponentGap = 72.0;

double log_norm(int d, double t) { return 0.5 * d * std::log(2.0 * std::numbers::pi * t); }

}  // namespace

double default_threshold(std::size_t n, int d, double t) {
  if (n < 2) throw std::invalid_argument("threshold: n must be at least 2");
  if (!(t > 0.0)) throw std::invalid_argument("threshold: t must be positive");
  return std::log(double(n)) / (double(n) * std::pow(2.0 * std::numbers::pi * t, 0.5 * d));
}

KdeScoreModel::KdeScoreModel(const Matrix& samples, double t)
    : KdeScoreModel(samples, t, default_threshold(samples.rows(), static_cast<int>(samples.cols()), t)) {}

KdeScoreModel::KdeScoreModel(const Matrix& samples, double t, double rho) {
  if (samples.empty() || samples.cols() == 0) throw std::invalid_argument("KdeScoreModel: empty sample matrix");
  if (!(t > 0.0)) throw std::invalid_argument("KdeScoreModel: t must be positive");
  if (!(rho > 0.0)) throw std::invalid_argument("KdeScoreModel: threshold must be positive");
  auto data = std::make_shared<Data>();
  data->n = samples.rows();
  data->d = static_cast<int>(samples.cols());
  data->xs = samples.data();
  for (double v : data->xs)
    if (!std::isfinite(v)) throw std::invalid_argument("KdeScoreModel: non-finite sample");
  if (data->d == 1) std::sort(data->xs.begin(), data->xs.end());
  data_ = std::move(data);
  t_ = t;
  rho_ = rho;
}

KdeScoreModel::KdeScoreModel(std::shared_ptr<const Data> data, double t, double rho)
    : data_(std::move(data)), t_(t), rho_(rho) {}

KdeScoreModel KdeScoreModel::at(double t) const {
  return KdeScoreModel(data_, t, default_threshold(data_->n, data_->d, t));
}

KdeScoreModel::Eval KdeScoreModel::evaluate(Point x, std::span<double> grad, std::span<double> score) const {
  const int d = data_->d;
  if (x.size() != static_cast<std::size_t>(d)) throw std::invalid_argument("KdeScoreModel: dimension mismatch");
  const double inv2t = 0.5 / t_;
  double s0 = 0.0, e_min = 0.0;
  double s1[8];
  std::vector<double> s1_heap;
  double* s1p = s1;
  if (d > 8) {
    s1_heap.resize(d);
    s1p = s1_heap.data();
  }
  const std::vector<double>& xs = data_->xs;
  if (d == 1) {
    const double x0 = x[0];
    auto it = std::lower_bound(xs.begin(), xs.end(), x0);
    double dn = std::numeric_limits<double>::infinity();
    if (it != xs.end()) dn = *it - x0;
    if (it != xs.begin()) dn = std::min(dn, x0 - *(it - 1));
    e_min = dn * dn * inv2t;
    const double r = std::sqrt(dn * dn + 2.0 * kExponentGap * t_);
    const auto lo = std::lower_bound(xs.begin(), xs.end(), x0 - r);
    const auto hi = std::upper_bound(lo, xs.end(), x0 + r);
    detail::gauss_sums_1d(&*lo, static_cast<std::size_t>(hi - lo), x0, inv2t, e_min, s0, s1p[0]);
  } else {
    e_min = detail::min_sq_dist_nd(xs.data(), data_->n, d, x.data()) * inv2t;
    detail::gauss_sums_nd(xs.data(), data_->n, d, x.data(), inv2t, e_min, s0, s1p);
  }
  Eval ev;
  // s0 >= 1 because the nearest sample contributes exp(0).
  ev.density = std::exp(std::log(s0) - e_min - std::log(double(data_->n)) - log_norm(d, t_));
  ev.above_threshold = ev.density >= rho_;
  if (!grad.empty()) {
    const double f = ev.density / (t_ * s0);
    for (int j = 0; j < d; ++j) grad[j] = f * s1p[j];
  }
  if (!score.empty()) {
    for (int j = 0; j < d; ++j) score[j] = ev.above_threshold ? s1p[j] / (t_ * s0) : 0.0;
  }
  return ev;
}

double KdeScoreModel::density(Point x) const { return evaluate(x, {}, {}).density; }

std::vector<double> KdeScoreModel::grad_density(Point x) const {
  std::vector<double> g(data_->d);
  evaluate(x, g, {});
  return g;
}

std::vector<double> KdeScoreModel::score(Point x) const {
  std::vector<double> s(data_->d);
  evaluate(x, {}, s);
  return s;
}

ScoreFn KdeScoreModel::as_field() const {
  return [self = *this](double t, Point x, std::span<double> out) { self.at(t).evaluate(x, {}, out); };
}

double concentration_constant(double alpha) { return std::max(std::sqrt(8.0 * alpha), 16.0 * alpha / 3.0); }

MseReport pointwise_mse_report(const DiffusedOracle& oracle, double t, std::size_t n, const Matrix& x_cloud,
                               std::size_t replicates, std::uint64_t seed, int threads) {
  if (replicates < 100) throw std::invalid_argument("pointwise_mse_report: need at least 100 replicates");
  if (n < 2) throw std::invalid_argument("pointwise_mse_report: n must be at least 2");
  if (!(t > 0.0)) throw std::invalid_argument("pointwise_mse_report: t must be positive");
  const int d = oracle.dim();
  if (x_cloud.cols() != static_cast<std::size_t>(d)) throw std::invalid_argument("pointwise_mse_report: cloud dimension");
  const std::size_t P = x_cloud.rows();

  std::vector<double> p_true(P);
  Matrix g_true(P, d);
  for (std::size_t i = 0; i < P; ++i) {
    p_true[i] = oracle.density(t, x_cloud.row(i));
    const auto g = oracle.grad(t, x_cloud.row(i));
    std::copy(g.begin(), g.end(), g_true.row(i).begin());
  }

  // est[r][i*(1+d) + 0] = p̂, then ∇p̂.
  std::vector<std::vector<double>> est(replicates);
  const TargetDistribution& target = oracle.target();
  parallel_for(replicates, [&](std::size_t r) {
    Stream rng(seed, r);
    const KdeScoreModel model(target.sample(rng, n), t);
    auto& row = est[r];
    row.resize(P * (1 + d));
    for (std::size_t i = 0; i < P; ++i) {
      std::span<double> g(row.data() + i * (1 + d) + 1, d);
      row[i * (1 + d)] = model.evaluate(x_cloud.row(i), g, {}).density;
    }
  }, threads);

  MseReport rep;
  rep.t = t;
  rep.n = n;
  rep.replicates = replicates;
  const double R = double(replicates);
  const double unit = 1.0 / (double(n) * std::pow(2.0 * std::numbers::pi * t, 0.5 * d));
  for (std::size_t i = 0; i < P; ++i) {
    MsePoint pt;
    pt.x.assign(x_cloud.row(i).begin(), x_cloud.row(i).end());
    pt.p_true = p_true[i];
    double se1 = 0, se2 = 0, sq1 = 0, sq2 = 0, gq1 = 0, gq2 = 0;
    std::vector<double> gb1(d, 0.0), gb2(d, 0.0);
    for (std::size_t r = 0; r < replicates; ++r) {
      const double e = est[r][i * (1 + d)] - p_true[i];
      se1 += e;
      se2 += e * e;
      sq1 += e * e;
      sq2 += e * e * e * e;
      double gn = 0.0;
      for (int j = 0; j < d; ++j) {
        const double ge = est[r][i * (1 + d) + 1 + j] - g_true(i, j);
        gn += ge * ge;
        gb1[j] += ge;
        gb2[j] += ge * ge;
      }
      gq1 += gn;
      gq2 += gn * gn;
    }
    auto mean_se = [R](double s1, double s2, double& mean, double& se) {
      mean = s1 / R;
      se = std::sqrt(std::max(0.0, s2 / R - mean * mean) / (R - 1.0));
    };
    mean_se(se1, se2, pt.density_bias, pt.density_bias_se);
    mean_se(sq1, sq2, pt.density_mse, pt.density_mse_se);
    mean_se(gq1, gq2, pt.grad_mse, pt.grad_mse_se);
    pt.grad_bias.resize(d);
    pt.grad_bias_se.resize(d);
    for (int j = 0; j < d; ++j) mean_se(gb1[j], gb2[j], pt.grad_bias[j], pt.grad_bias_se[j]);
    pt.density_bound = p_true[i] * unit;
    pt.grad_bound = p_true[i] * unit / t;
    pt.bound_violated = pt.density_mse > pt.density_bound + 3.0 * pt.density_mse_se ||
                        pt.grad_mse > pt.grad_bound + 3.0 * pt.grad_mse_se;
    pt.bias_flag = std::abs(pt.density_bias) > 4.0 * pt.density_bias_se;
    for (int j = 0; j < d; ++j)
      if (std::abs(pt.grad_bias[j]) > 4.0 * pt.grad_bias_se[j]) pt.bias_flag = true;
    rep.any_bound_violated = rep.any_bound_violated || pt.bound_violated;
    rep.any_bias_flag = rep.any_bias_flag || pt.bias_flag;
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

EnvelopeHitReport concentration_envelope_check(const DiffusedOracle& oracle, double t, std::size_t n, double alpha,
                                               const Matrix& x_cloud, std::size_t replicates, std::uint64_t seed,
                                               int threads) {
  if (!(alpha > 0.0)) throw std::invalid_argument("concentration_envelope_check: alpha must be positive");
  if (replicates == 0) throw std::invalid_argument("concentration_envelope_check: need replicates");
  const int d = oracle.dim();
  const std::size_t P = x_cloud.rows();
  std::vector<double> p_true(P);
  for (std::size_t i = 0; i < P; ++i) p_true[i] = oracle.density(t, x_cloud.row(i));
  const double rho = default_threshold(n, d, t);
  const double c = concentration_constant(alpha);

  std::vector<char> hit(replicates, 0);
  const TargetDistribution& target = oracle.target();
  parallel_for(replicates, [&](std::size_t r) {
    Stream rng(seed, r);
    const KdeScoreModel model(target.sample(rng, n), t);
    for (std::size_t i = 0; i < P; ++i) {
      const double dev = std::abs(model.density(x_cloud.row(i)) - p_true[i]);
      if (!(dev < c * (rho + std::sqrt(p_true[i] * rho)))) {
        hit[r] = 1;
        break;
      }
    }
  }, threads);

  EnvelopeHitReport rep;
  rep.alpha = alpha;
  rep.c_alpha = c;
  rep.replicates = replicates;
  for (char h : hit) rep.violations += h;
  rep.frequency = double(rep.violations) / double(replicates);
  const double q = std::pow(double(n), -alpha);
  rep.allowed = q + 3.0 * std::sqrt(q * (1.0 - q) / double(replicates));
  rep.pass = rep.frequency <= rep.allowed;
  return rep;
}

}  // namespace tailscore
