#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tailscore/metrics.hpp"
#include "tailscore/quadrature.hpp"

namespace tailscore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double half_sqrt_2_over_pi() { return 0.5 * std::sqrt(2.0 / std::numbers::pi); }

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * double(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - double(i);
  return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v.back();
}

void check_batches(const Matrix& a, const Matrix& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("tv_empirical: empty batch");
  if (a.cols() != b.cols()) throw std::invalid_argument("tv_empirical: batches differ in dimension");
  if (a.rows() < 1000 || b.rows() < 1000) throw std::invalid_argument("tv_empirical: need at least 1000 points per batch");
}

}  // namespace

TvEstimate tv_1d(const Density1d& a, const Density1d& b, double R, std::vector<double> breaks) {
  if (!(R > 0.0)) throw std::invalid_argument("tv_1d: truncation radius must be positive");
  for (double s = 1.0; s < 1e5; s *= 4.0) {
    breaks.push_back(s);
    breaks.push_back(-s);
  }
  breaks.push_back(0.0);
  std::vector<double> br;
  if (std::isinf(R)) {
    br = quad::make_breaks(breaks, -1e300, 1e300);
    br.front() = -kInf;
    br.back() = kInf;
  } else {
    br = quad::make_breaks(breaks, -R, R);
  }
  const auto diff = quad::adaptive([&](double x) { return std::abs(a(x) - b(x)); }, std::span<const double>(br), 1e-10);
  TvEstimate out;
  out.method = "quadrature";
  out.value = 0.5 * diff.value;
  out.error = 0.5 * diff.error;
  if (!std::isinf(R)) {
    const double ma = quad::adaptive(a, std::span<const double>(br), 1e-12).value;
    const double mb = quad::adaptive(b, std::span<const double>(br), 1e-12).value;
    out.error += 0.5 * (std::max(0.0, 1.0 - ma) + std::max(0.0, 1.0 - mb));
  }
  return out;
}

TvEstimate tv_empirical(const Matrix& a, const Matrix& b, const HistogramMethod& method, std::uint64_t seed,
                        std::size_t bootstrap) {
  check_batches(a, b);
  const std::size_t d = a.cols(), ma = a.rows(), mb = b.rows();
  const std::size_t m = std::min(ma, mb);
  const std::size_t bins =
      method.bins_per_axis.value_or(static_cast<std::size_t>(std::ceil(std::pow(double(m), 1.0 / double(d + 2)))));
  if (bins < 1) throw std::invalid_argument("tv_empirical: bins must be positive");
  const std::size_t per_axis = bins + 2;  // underflow, inner bins, overflow
  double cells_d = std::pow(double(per_axis), double(d));
  if (cells_d > 5e7) throw std::invalid_argument("tv_empirical: histogram grid too large");
  const auto cells = static_cast<std::size_t>(cells_d);

  std::vector<double> lo(d), width(d);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> pooled;
    pooled.reserve(ma + mb);
    for (std::size_t i = 0; i < ma; ++i) pooled.push_back(a(i, j));
    for (std::size_t i = 0; i < mb; ++i) pooled.push_back(b(i, j));
    std::sort(pooled.begin(), pooled.end());
    lo[j] = quantile_sorted(pooled, 0.001);
    const double hi = quantile_sorted(pooled, 0.999);
    width[j] = (hi > lo[j] ? hi - lo[j] : 1.0) / double(bins);
  }
  auto cell_of = [&](std::span<const double> x) {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double u = (x[j] - lo[j]) / width[j];
      std::size_t c;
      if (u < 0.0) c = 0;
      else if (u >= double(bins)) c = bins + 1;
      else c = 1 + std::min(bins - 1, static_cast<std::size_t>(u));
      idx = idx * per_axis + c;
    }
    return idx;
  };
  std::vector<std::size_t> ca(ma), cb(mb);
  for (std::size_t i = 0; i < ma; ++i) ca[i] = cell_of(a.row(i));
  for (std::size_t i = 0; i < mb; ++i) cb[i] = cell_of(b.row(i));

  std::vector<double> ha(cells), hb(cells);
  auto tv_from = [&](auto&& pick_a, auto&& pick_b) {
    std::fill(ha.begin(), ha.end(), 0.0);
    std::fill(hb.begin(), hb.end(), 0.0);
    for (std::size_t i = 0; i < ma; ++i) ha[ca[pick_a(i)]] += 1.0;
    for (std::size_t i = 0; i < mb; ++i) hb[cb[pick_b(i)]] += 1.0;
    double s = 0.0;
    for (std::size_t c = 0; c < cells; ++c) s += std::abs(ha[c] / double(ma) - hb[c] / double(mb));
    return 0.5 * s;
  };
  TvEstimate out;
  out.method = "histogram(bins=" + std::to_string(bins) + ")";
  out.value = tv_from([](std::size_t i) { return i; }, [](std::size_t i) { return i; });
  out.noise_floor = half_sqrt_2_over_pi() * std::sqrt((1.0 / double(ma) + 1.0 / double(mb)) * double(cells));
  if (bootstrap > 1) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < bootstrap; ++r) {
      Stream rng(seed, 0x7b5, r);
      std::vector<std::size_t> ia(ma), ib(mb);
      for (auto& v : ia) v = static_cast<std::size_t>(rng() % ma);
      for (auto& v : ib) v = static_cast<std::size_t>(rng() % mb);
      const double v = tv_from([&](std::size_t i) { return ia[i]; }, [&](std::size_t i) { return ib[i]; });
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / double(bootstrap);
    out.error = std::sqrt(std::max(0.0, s2 / double(bootstrap) - mean * mean));
  }
  return out;
}

TvEstimate tv_empirical(const Matrix& a, const Matrix& b, const KnnClassifierMethod& method, std::uint64_t seed,
                        std::size_t bootstrap) {
  check_batches(a, b);
  if (method.k < 1) throw std::invalid_argument("tv_empirical: k must be positive");
  const std::size_t d = a.cols();
  Stream rng(seed, 0x6e6e);
  auto subsample = [&](const Matrix& m) {
    std::vector<std::size_t> idx(m.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    idx.resize(std::min(idx.size(), method.max_points));
    return idx;
  };
  const auto ia = subsample(a), ib = subsample(b);
  std::vector<const double*> pts;
  std::vector<int> label;
  for (auto i : ia) {
    pts.push_back(a.row(i).data());
    label.push_back(0);
  }
  for (auto i : ib) {
    pts.push_back(b.row(i).data());
    label.push_back(1);
  }
  const std::size_t N = pts.size();
  std::vector<int> fold(N);
  {
    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t i = 0; i < N; ++i) fold[order[i]] = static_cast<int>(i % 5);
  }
  std::vector<char> correct(N);
  std::vector<std::pair<double, int>> dist;
  for (std::size_t i = 0; i < N; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < N; ++j) {
      if (fold[j] == fold[i]) continue;
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) r2 += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
      dist.emplace_back(r2, label[j]);
    }
    const std::size_t k = std::min<std::size_t>(method.k, dist.size());
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    int votes = 0;
    for (std::size_t q = 0; q < k; ++q) votes += dist[q].second;
    const int pred = 2 * votes > int(k) ? 1 : 0;
    correct[i] = pred == label[i];
  }
  auto proxy = [&](auto&& pick) {
    double c = 0.0;
    for (std::size_t i = 0; i < N; ++i) c += correct[pick(i)];
    return 2.0 * c / double(N) - 1.0;
  };
  TvEstimate out;
  out.method = "knn_classifier(k=" + std::to_string(method.k) + ", lower-bound proxy)";
  out.value = proxy([](std::size_t i) { return i; });
  out.noise_floor = 2.0 / std::sqrt(double(N));
  if (bootstrap > 1) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < bootstrap; ++r) {
      Stream br(seed, 0x6e6f, r);
      const double v = proxy([&](std::size_t) { return static_cast<std::size_t>(br() % N); });
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / double(bootstrap);
    out.error = std::sqrt(std::max(0.0, s2 / double(bootstrap) - mean * mean));
  }
  return out;
}

TvEstimate tv_smoothed_vs_oracle(const std::vector<double>& samples, double b, const DiffusedOracle& oracle,
                                 double t) {
  if (oracle.dim() != 1) throw std::invalid_argument("tv_smoothed_vs_oracle: d = 1 only");
  if (samples.empty()) throw std::invalid_argument("tv_smoothed_vs_oracle: empty sample");
  if (!(b > 0.0)) throw std::invalid_argument("tv_smoothed_vs_oracle: bandwidth must be positive");
  const double ts = t + b * b;
  const Matrix sm(samples.size(), 1, samples);
  const KdeScoreModel kde(sm, b * b, std::numeric_limits<double>::min());
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn - 12.0 * b, hi = *mx + 12.0 * b;
  const double width = std::max(0.5 * b, (hi - lo) / 40000.0);
  const auto panels = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  const double w = (hi - lo) / double(panels);
  const quad::Rule& rule = quad::gauss_legendre(8);
  double diff = 0.0, floor_acc = 0.0;
  // ∫ K^2 for the Gaussian kernel at unit bandwidth.
  const double roughness = 1.0 / (2.0 * std::sqrt(std::numbers::pi));
  for (std::size_t k = 0; k < panels; ++k) {
    const double mid = lo + (double(k) + 0.5) * w;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x[1] = {mid + 0.5 * w * rule.nodes[i]};
      const double f = kde.density(x);
      const double q = oracle.density(ts, x);
      diff += rule.weights[i] * 0.5 * w * std::abs(f - q);
      floor_acc += rule.weights[i] * 0.5 * w * std::sqrt(f * roughness / (double(samples.size()) * b));
    }
  }
  TvEstimate out;
  out.method = "kernel_smoothed_quadrature(b=" + std::to_string(b) + ")";
  const double outside = oracle.outside_mass(ts, lo, hi);
  out.value = 0.5 * diff + 0.5 * outside;
  out.error = 1e-9;
  out.noise_floor = half_sqrt_2_over_pi() * floor_acc;
  return out;
}

double ks_statistic(std::vector<double> s, const std::function<double(double)>& cdf) {
  if (s.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(s.begin(), s.end());
  const double m = double(s.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    dmax = std::max({dmax, double(i + 1) / m - F, F - double(i) / m});
  }
  return dmax;
}

double ks_critical_value(std::size_t m, double alpha) {
  if (m == 0 || !(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ks_critical_value: bad arguments");
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(double(m));
}

}  // namespace tailscore
