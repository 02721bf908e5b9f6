#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tailscore/kernel_score.hpp"
#include "tailscore/quadrature.hpp"

namespace tailscore {

namespace {

// ∫_{-1}^{1} u^m (1-u^2)^2 du
double weight_moment(int m) {
  if (m % 2) return 0.0;
  return 2.0 * (1.0 / (m + 1) - 2.0 / (m + 3) + 1.0 / (m + 5));
}

std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-14) throw std::logic_error("build_order_kernel: singular moment system");
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

constexpr double kKernelWindow = 12.0;

}  // namespace

OrderKernel::OrderKernel(int order) : order_(order) {
  if (order < 1 || order > 6) throw std::invalid_argument("build_order_kernel: order must be in [1, 6]");
  // Coefficients c_k of P solve sum_k c_k mu_{j+k} = [j == 0] for j = 0..order,
  // which makes P(u) the reproducing kernel at 0 of the weighted polynomial space.
  const int m = order + 1;
  std::vector<std::vector<double>> a(m, std::vector<double>(m));
  std::vector<double> b(m, 0.0);
  b[0] = 1.0;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) a[j][k] = weight_moment(j + k);
  coeffs_ = solve(std::move(a), std::move(b));
}

double OrderKernel::operator()(double u) const {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  double p = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 0;) p = p * u + coeffs_[k];
  const double w = 1.0 - u * u;
  return p * w * w;
}

double OrderKernel::derivative(double u) const {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  double p = 0.0, dp = 0.0;
  for (std::size_t k = coeffs_.size(); k-- > 0;) {
    dp = dp * u + p;
    p = p * u + coeffs_[k];
  }
  const double w = 1.0 - u * u;
  return dp * w * w - 4.0 * u * w * p;
}

double OrderKernel::moment(int j) const {
  const quad::Rule& r = quad::gauss_legendre(64);
  return quad::panel([&](double u) { return std::pow(u, j) * (*this)(u); }, -1.0, 1.0, r);
}

double OrderKernel::abs_moment(double p) const {
  const double br[] = {-1.0, 0.0, 1.0};
  return quad::adaptive([&](double u) { return std::pow(std::abs(u), p) * std::abs((*this)(u)); },
                        std::span<const double>(br), 1e-12)
      .value;
}

OrderKernel build_order_kernel(int order) { return OrderKernel(order); }

double bias_constant(const OrderKernel& k, int d, double beta, double holder_L) {
  const int l = k.order();
  const double pre = holder_L * std::pow(2.0 * d, l) / std::tgamma(l + 1.0);
  if (d == 1) return pre * k.abs_moment(beta);
  if (d != 2) throw CapabilityError("bias_constant: d > 2 unsupported");
  const double br[] = {-1.0, 0.0, 1.0};
  auto outer = [&](double u) {
    auto inner = [&](double v) { return std::pow(u * u + v * v, 0.5 * beta) * std::abs(k(u) * k(v)); };
    return quad::adaptive(inner, std::span<const double>(br), 1e-10, 12).value;
  };
  return pre * quad::adaptive(outer, std::span<const double>(br), 1e-9, 12).value;
}

void DecoupledScoreModel::smoothed_kernel_1d(const OrderKernel& k, double h, double t, double z, double& value,
                                             double& deriv) {
  if (t == 0.0) {
    value = k(z / h) / h;
    deriv = k.derivative(z / h) / (h * h);
    return;
  }
  const double st = std::sqrt(t);
  const double a = std::max(-h, z - kKernelWindow * st), b = std::min(h, z + kKernelWindow * st);
  value = 0.0;
  deriv = 0.0;
  if (!(b > a)) return;
  const quad::Rule& r = quad::gauss_legendre(64);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi * t));
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double v = mid + half * r.nodes[i];
    const double w = z - v;
    const double g = r.weights[i] * k(v / h) * std::exp(-0.5 * w * w / t);
    value += g;
    deriv -= g * w / t;
  }
  value *= half * norm;
  deriv *= half * norm;
}

DecoupledScoreModel::DecoupledScoreModel(const Matrix& samples, double t, Params params) : t_(t) {
  if (samples.empty()) throw std::invalid_argument("DecoupledScoreModel: empty sample matrix");
  const int d = static_cast<int>(samples.cols());
  if (d > 2) throw CapabilityError("DecoupledScoreModel: d > 2 unsupported");
  if (t < 0.0) throw std::invalid_argument("DecoupledScoreModel: t must be nonnegative");
  if (!(params.beta > 0.0)) throw std::invalid_argument("DecoupledScoreModel: beta must be positive");
  beta_ = params.beta;
  const double n = double(samples.rows());
  h_ = params.bandwidth.value_or(std::pow(n, -1.0 / (2.0 * beta_ + d)));
  if (!(h_ > 0.0)) throw std::invalid_argument("DecoupledScoreModel: bandwidth must be positive");
  // Orders below 1 fall back to the nonnegative order-1 kernel.
  const int order = params.order.value_or(std::max(1, static_cast<int>(std::floor(beta_))));
  kernel_ = std::make_shared<const OrderKernel>(order);
  c_rho_ = params.c_rho.value_or(2.0 * bias_constant(*kernel_, d, beta_, params.holder_L) + 1.0);
  if (!(c_rho_ > 0.0)) throw std::invalid_argument("DecoupledScoreModel: C_rho must be positive");
  rho_ = c_rho_ * std::pow(h_, beta_);
  samples_ = std::make_shared<const Matrix>(samples);
}

DecoupledScoreModel DecoupledScoreModel::at(double t) const {
  if (t < 0.0) throw std::invalid_argument("DecoupledScoreModel: t must be nonnegative");
  DecoupledScoreModel m = *this;
  m.t_ = t;
  return m;
}

double DecoupledScoreModel::evaluate(Point x, std::span<double> grad, std::span<double> score) const {
  const int d = dim();
  if (x.size() != static_cast<std::size_t>(d)) throw std::invalid_argument("DecoupledScoreModel: dimension mismatch");
  const Matrix& s = *samples_;
  double p = 0.0, g[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double v0, d0;
    smoothed_kernel_1d(*kernel_, h_, t_, x[0] - s(i, 0), v0, d0);
    if (d == 1) {
      p += v0;
      g[0] += d0;
    } else {
      if (v0 == 0.0 && d0 == 0.0) continue;
      double v1, d1;
      smoothed_kernel_1d(*kernel_, h_, t_, x[1] - s(i, 1), v1, d1);
      p += v0 * v1;
      g[0] += d0 * v1;
      g[1] += v0 * d1;
    }
  }
  const double inv_n = 1.0 / double(s.rows());
  p *= inv_n;
  for (int j = 0; j < d; ++j) g[j] *= inv_n;
  if (!grad.empty())
    for (int j = 0; j < d; ++j) grad[j] = g[j];
  if (!score.empty()) {
    // Higher-order kernels can push the estimate negative; the score is zero there too.
    const bool active = p >= rho_ && p > 0.0;
    for (int j = 0; j < d; ++j) {
      const double v = active ? g[j] / p : 0.0;
      score[j] = std::isfinite(v) ? v : 0.0;
    }
  }
  return p;
}

double DecoupledScoreModel::density(Point x) const { return evaluate(x, {}, {}); }

std::vector<double> DecoupledScoreModel::grad(Point x) const {
  std::vector<double> g(dim());
  evaluate(x, g, {});
  return g;
}

std::vector<double> DecoupledScoreModel::score(Point x) const {
  std::vector<double> s(dim());
  evaluate(x, {}, s);
  return s;
}

ScoreFn DecoupledScoreModel::as_field() const {
  return [self = *this](double t, Point x, std::span<double> out) { self.at(t).evaluate(x, {}, out); };
}

}  // namespace tailscore
