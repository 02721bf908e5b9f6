#include "kde_kernel.hpp"

#include <cmath>

namespace tailscore::detail {

void gauss_sums_1d(const double* xs, std::size_t n, double x, double inv2t, double shift, double& s0,
                   double& s1) {
  double a0 = 0.0, a1 = 0.0;
#pragma omp simd reduction(+ : a0, a1)
  for (std::size_t i = 0; i < n; ++i) {
    const double u = xs[i] - x;
    const double k = std::exp(shift - u * u * inv2t);
    a0 += k;
    a1 += u * k;
  }
  s0 = a0;
  s1 = a1;
}

void gauss_sums_nd(const double* xs, std::size_t n, int d, const double* x, double inv2t, double shift,
                   double& s0, double* s1) {
  if (d == 2) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    const double x0 = x[0], x1 = x[1];
#pragma omp simd reduction(+ : a0, a1, a2)
    for (std::size_t i = 0; i < n; ++i) {
      const double u0 = xs[2 * i] - x0, u1 = xs[2 * i + 1] - x1;
      const double k = std::exp(shift - (u0 * u0 + u1 * u1) * inv2t);
      a0 += k;
      a1 += u0 * k;
      a2 += u1 * k;
    }
    s0 = a0;
    s1[0] = a1;
    s1[1] = a2;
    return;
  }
  double a0 = 0.0;
  for (int j = 0; j < d; ++j) s1[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xs + i * static_cast<std::size_t>(d);
    double r2 = 0.0;
    for (int j = 0; j < d; ++j) r2 += (row[j] - x[j]) * (row[j] - x[j]);
    const double k = std::exp(shift - r2 * inv2t);
    a0 += k;
    for (int j = 0; j < d; ++j) s1[j] += (row[j] - x[j]) * k;
  }
  s0 = a0;
}

double min_sq_dist_nd(const double* xs, std::size_t n, int d, const double* x) {
  double best = 1.7976931348623157e308;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xs + i * static_cast<std::size_t>(d);
    double r2 = 0.0;
    for (int j = 0; j < d; ++j) r2 += (row[j] - x[j]) * (row[j] - x[j]);
    best = r2 < best ? r2 : best;
  }
  return best;
}

}  // namespace tailscore::detail
