#include "tailscore/quadrature.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/legendre.hpp>

namespace tailscore::quad {

namespace {

Rule build_rule(unsigned n) {
  // boost returns the non-negative zeros in ascending order.
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(static_cast<int>(n));
  Rule r;
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it)
    if (*it != 0.0) r.nodes.push_back(-*it);
  for (double z : zeros) r.nodes.push_back(z);
  for (double x : r.nodes) {
    const double dp = boost::math::legendre_p_prime(static_cast<int>(n), x);
    r.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
  }
  return r;
}

}  // namespace

const Rule& gauss_legendre(unsigned n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  static std::mutex mu;
  static std::map<unsigned, std::unique_ptr<Rule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Rule>(build_rule(n));
  return *slot;
}

std::vector<double> make_breaks(std::vector<double> points, double lo, double hi) {
  std::vector<double> out{lo};
  std::sort(points.begin(), points.end());
  for (double p : points)
    if (p > lo && p < hi && p > out.back()) out.push_back(p);
  out.push_back(hi);
  return out;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace tailscore::quad
