#pragma once

#include <cstddef>

// Gaussian kernel sums for the KDE hot loop. Compiled with relaxed FP flags so
// the exponentials vectorize; every argument must be finite.
namespace tailscore::detail {

// s0 = sum_i exp(shift - (x - xs[i])^2 * inv2t), s1 = sum_i (xs[i] - x) * (same).
void gauss_sums_1d(const double* xs, std::size_t n, double x, double inv2t, double shift, double& s0,
                   double& s1);

// Row-major n x d points. s1 has d entries.
void gauss_sums_nd(const double* xs, std::size_t n, int d, const double* x, double inv2t, double shift,
                   double& s0, double* s1);

// min_i |x - xs[i]|^2 over row-major n x d points.
double min_sq_dist_nd(const double* xs, std::size_t n, int d, const double* x);

}  // namespace tailscore::detail
