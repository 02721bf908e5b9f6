#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tailscore/matrix.hpp"
#include "tailscore/rng.hpp"

namespace tailscore {

enum class TailKind { Polynomial, StretchedExponential, SubGaussian };

struct TailClass {
  TailKind kind = TailKind::SubGaussian;
  double gamma = 2.0;  // tail index
  double c1 = 0.0;     // stretched-exponential rate
  double C1 = 0.0;     // stretched-exponential prefactor
};

std::string to_string(TailKind kind);

/// Which family of rates applies: polynomial tails, or exponential-type tails
/// (stretched exponential and sub-Gaussian).
enum class Regime { Polynomial, Exponential };
std::string to_string(Regime r);

/// Isotropic Gaussian mixture: component k is N(means[k], scales[k]^2 I).
struct GaussianMixture {
  std::vector<double> weights;
  Matrix means;  // k x d
  std::vector<double> scales;
};

struct TargetDistribution {
  std::string name;
  int dim = 1;
  std::function<double(Point)> density;  // may be unnormalized
  double norm_constant = 1.0;
  std::function<void(Stream&, std::span<double>)> sampler;
  std::function<void(Point, std::span<double>)> analytic_score;  // empty if unavailable
  TailClass tail;
  double smoothness_beta = 2.0;
  std::optional<double> holder_order;
  std::optional<int> moment_order_k;
  std::optional<double> sobolev_radius;  // carried, never enforced

  // Fitted polynomial-envelope constant: pdf(x) <= poly_C0 (1+|x|^2)^{-(1+gamma+d)/2}.
  double poly_C0 = 0.0;
  std::optional<GaussianMixture> mixture;
  // One-dimensional locations where p0 is not smooth, plus a characteristic
  // width; both only guide quadrature breakpoints.
  std::vector<double> kinks;
  double scale = 1.0;
  bool symmetric = true;

  double pdf(Point x) const { return density(x) / norm_constant; }
  std::vector<double> score0(Point x) const;
  void sample(Stream& rng, std::span<double> out) const { sampler(rng, out); }
  Matrix sample(Stream& rng, std::size_t m) const;
};

/// Parsed `name(key=value,...)` spec. List values use brackets: means=[0,3].
struct BuiltinSpec {
  std::string name;
  std::map<std::string, std::vector<double>> args;

  static BuiltinSpec parse(const std::string& text);
  double get(const std::string& key, double fallback) const;
  bool has(const std::string& key) const { return args.count(key) > 0; }
  std::string str() const;
};

TargetDistribution make_builtin_target(const BuiltinSpec& spec);
TargetDistribution make_builtin_target(const std::string& spec);

std::vector<std::string> builtin_target_names();

Regime regime_of(const TargetDistribution& target);

// Factories behind make_builtin_target.
TargetDistribution make_gaussian(int d);
TargetDistribution make_laplace(int d);
TargetDistribution make_student_t(double nu, int d);
TargetDistribution make_generalized_gaussian(double gamma, int d);
TargetDistribution make_pareto_mixture(double gamma);
TargetDistribution make_gaussian_mixture(GaussianMixture mix);

/// Largest ratio pdf(x) (1+|x|^2)^{(1+gamma+d)/2} over a log-spaced radial grid
/// up to 1e3 plus one far point, along the first axis and the diagonal.
double fit_polynomial_envelope(const TargetDistribution& target, double gamma);

/// Largest ratio pdf(x) exp(c1 |x|^gamma) over the same grid.
double fit_stretched_prefactor(const TargetDistribution& target, double gamma, double c1);

}  // namespace tailscore
