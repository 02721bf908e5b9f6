#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tailscore/targets.hpp"

namespace tailscore {

/// Requested quantity cannot be produced for this target/setting; the CLI maps
/// it to the capability exit status.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when p_t underflows so that ∇p_t / p_t is meaningless.
class FarTailError : public std::runtime_error {
 public:
  FarTailError(const std::vector<double>& x);
  std::vector<double> x;
};

enum class OracleMode { ClosedForm, Quadrature };

/// Ground truth for p_t = φ_t * p0, its gradient and the score. Mixture targets
/// use the closed form in any dimension; everything else uses quadrature in
/// d <= 2.
class DiffusedOracle {
 public:
  explicit DiffusedOracle(TargetDistribution target);
  DiffusedOracle(TargetDistribution target, OracleMode mode);

  OracleMode mode() const { return mode_; }
  const TargetDistribution& target() const { return target_; }
  int dim() const { return target_.dim; }

  double density(double t, Point x) const;
  std::vector<double> grad(double t, Point x) const;
  std::vector<double> score(double t, Point x) const;
  /// Density and score together; cheaper than two calls.
  double density_and_score(double t, Point x, std::span<double> score_out) const;

  /// s_t(x) = E[s0(Y) | X_t = x], by a composite Gauss–Legendre rule that
  /// shares nothing with the main route. d = 1, needs an analytic score.
  std::vector<double> tweedie_score(double t, Point x) const;

  /// P(X_t < lo) + P(X_t > hi) for d = 1.
  double outside_mass(double t, double lo, double hi) const;
  /// E|X0| for d = 1 (infinite when the tail index is <= 0).
  double first_abs_moment() const;
  /// E_{p_t} |s_t|^2 for d = 1; t = 0 uses the analytic score.
  double score_second_moment(double t) const;

  /// Half-width of the Gaussian window, in units of sqrt(t). The omitted
  /// kernel mass exp(-z^2/2) is below the smallest normal double.
  static constexpr double kWindow = 38.0;

 private:
  void check(double t, Point x) const;
  std::vector<double> breakpoints(double t, double x) const;
  double quad_density_1d(double t, double x) const;
  double quad_grad_1d(double t, double x) const;
  double quad_density_2d(double t, Point x) const;
  std::vector<double> quad_grad_2d(double t, Point x) const;
  double mixture_eval(double t, Point x, std::span<double> grad_out, bool want_score) const;

  TargetDistribution target_;
  OracleMode mode_;
};

struct EnvelopeReport {
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> density;   // p_t(r e1)
  std::vector<double> envelope;  // lemma bound at r e1
  std::vector<double> ratio;
  double constant = 0.0;  // C_gamma(t) or its stretched-exponential counterpart
  double rate = 0.0;      // c_gamma(t), stretched-exponential only
  bool violation = false;
};

/// Polynomial-class envelope constant C_gamma(t) built from the fitted C0.
double polynomial_envelope_constant(double gamma, int d, double C0, double t);

EnvelopeReport tail_envelope_check(const DiffusedOracle& oracle, double t, const std::vector<double>& radii);

}  // namespace tailscore
