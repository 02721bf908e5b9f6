#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tailscore/metrics.hpp"
#include "tailscore/targets.hpp"

namespace tailscore {

/// ψ(x) = x₁ exp(-1/(1 - 4|x|²)) on |x| < 1/2, scaled to ω(x) = ψ(x/h).
struct BumpFunction {
  double h = 1.0;

  static double profile(std::span<const double> u);
  static void profile_grad(std::span<const double> u, std::span<double> out);
  // One-dimensional profile and its first two derivatives.
  static double psi(double u);
  static double psi1(double u);
  static double psi2(double u);

  static double sup_norm();        // sup |ψ|
  static double hessian_bound();   // sup |ψ''| on the support (d = 1)
  static double grad_at_zero() { return 0.36787944117144233; }
  /// 8 L_ψ √d / |∇ψ(0)|.
  static double theory_lambda(int d);

  double operator()(double x) const { return psi(x / h); }
  double derivative(double x) const { return psi1(x / h) / h; }
};

using Signs = std::vector<std::uint8_t>;

std::size_t hamming(const Signs& a, const Signs& b);

/// Greedy lexicographic code of length num_cells with pairwise distance above
/// fraction·num_cells, truncated at max_codewords.
std::vector<Signs> gv_packing(std::size_t num_cells, double min_distance_fraction, std::size_t max_codewords = 256);

/// q_b = q₀ + ε Σ b_i ω(x - x_i) in d = 1 with f = φ_t * q precomputed on a
/// fixed composite Gauss–Legendre grid around the bumps.
class PerturbedFamily {
 public:
  struct Spec {
    Regime regime = Regime::Polynomial;
    double gamma = 2.0;
    double t = 0.1;
    double epsilon = 0.0;
    double R = 1.0;           // left edge of the grid (polynomial); ignored for the exponential regime
    double lambda = 1.0;      // h = λ √t
    std::size_t max_cells = 24;
  };
  explicit PerturbedFamily(Spec spec);

  const Spec& spec() const { return spec_; }
  double h() const { return h_; }
  double epsilon() const { return spec_.epsilon; }
  double R() const { return spec_.regime == Regime::Polynomial ? spec_.R : 1.0; }
  double t() const { return spec_.t; }
  std::size_t cells() const { return centers_.size(); }
  const std::vector<double>& centers() const { return centers_; }
  bool truncated() const { return truncated_; }

  std::vector<Signs> signs;  // hypotheses considered; empty until assigned

  double q0(double x) const;
  double q(const Signs& b, double x) const;
  /// inf q₀ over the union of the bump supports.
  double base_inf() const;

  // Grid-level quantities used by the radii and separation.
  std::size_t nodes() const { return x_.size(); }
  double node(std::size_t k) const { return x_[k]; }
  double weight(std::size_t k) const { return w_[k]; }
  double f0_at(std::size_t k) const { return f0_[k]; }
  double f0_deriv_at(std::size_t k) const { return f0p_[k]; }
  /// f_b - f_0 and its derivative on the grid.
  void perturbation(const Signs& b, std::vector<double>& df, std::vector<double>& dg) const;
  /// f₀(x) and f₀'(x) by direct convolution at an arbitrary point.
  double f0(double x, double* deriv = nullptr) const;

  /// (φ_t * ω)(u) and its derivative.
  void smoothed_bump(double u, double& value, double& deriv) const;

 private:
  Spec spec_;
  double h_ = 0.0;
  double norm_ = 1.0;
  bool truncated_ = false;
  std::vector<double> centers_;
  std::vector<double> x_, w_, f0_, f0p_;
  // per-cell node range and smoothed bump values there
  std::vector<std::size_t> lo_, hi_;
  std::vector<std::vector<double>> g_, gp_;
  // fixed y-rules for the q₀ and bump convolutions
  std::vector<double> y_, yw_, qy_;
  std::vector<double> by_, bw_, bpsi_;
};

double chi2_radius(const PerturbedFamily& family, const Signs& b);
double kl_radius(const PerturbedFamily& family, const Signs& b);
/// ∫ |s_b - s_b'|² f₀.
double score_separation(const PerturbedFamily& family, const Signs& b, const Signs& b_prime);
/// ε² R^{d+γ+1} t^{d/2-1} d_H (polynomial) or ε² t^{d/2-1} d_H (exponential).
double separation_scaling(const PerturbedFamily& family, std::size_t hamming_distance);

struct FanoReport {
  std::size_t n = 0;
  std::size_t packing_size = 0;
  double max_kl = 0.0;
  double chi2_at_max = 0.0;
  double log_packing = 0.0;
  double ratio = 0.0;  // n · max KL / log |packing|
  bool budget_ok = false;
  double min_separation = 0.0;
  std::size_t min_separation_hamming = 0;
  double min_separation_ratio = 0.0;  // against separation_scaling
};

FanoReport fano_budget_report(const PerturbedFamily& family, const std::vector<Signs>& packing, std::size_t n);

struct SobolevReport {
  double seminorm = 0.0;
  double ratio = 0.0;  // seminorm / L
  bool violated = false;
  std::string route;   // "derivative" or "fourier"
};

/// |D^β (q_b - q₀)|_{L²} maximised over the family's signs (all-ones when empty).
/// Integer β <= 2 integrates the derivative directly; other β (or `fourier`)
/// integrate |k|^{2β} |F[Δ]|² over a truncated frequency range.
SobolevReport sobolev_budget(const PerturbedFamily& family, double beta, double radius_L = 1.0,
                             bool fourier = false);

struct ConstraintReport {
  double positivity_ratio = 0.0;  // ε sup|ψ| / inf q₀, must stay below 1/2
  double min_q = 0.0;             // smallest q_b on the dense grid over all signs
  double mass_error = 0.0;        // max |∫ q_b - 1|
  double sobolev_ratio = 0.0;
  double fano_ratio = 0.0;
  bool positivity = false;
  bool mass = false;
  bool sobolev = false;
  bool geometry = false;
  bool fano = false;
  bool all() const { return positivity && mass && sobolev && geometry && fano; }
  std::string failing() const;
};

struct LabOptions {
  double lambda = 1.0;
  std::size_t max_cells = 24;
  double packing_fraction = 0.25;
  std::size_t max_codewords = 256;
  double sobolev_L = 1.0;
  double safety = 0.5;  // c = safety · c_max
};

struct CoupledParameters {
  Regime regime = Regime::Polynomial;
  int d = 1;
  std::size_t n = 0;
  double t = 0.0, gamma = 0.0, beta = 0.0, delta = 0.05;
  double lambda = 1.0;
  double c = 0.0, c_max = 0.0;
  double epsilon = 0.0, R = 0.0, h = 0.0;
  std::size_t grid_count = 0;
  bool grid_truncated = false;
  double window_lo = 0.0, window_hi = 0.0;
  bool in_window = true;
  std::string flag;
  std::string binding;  // constraints that fail just above c_max
  ConstraintReport constraints;
};

/// Parameters ε, R, h with the largest admissible c found by bisection, then
/// scaled by options.safety. d = 1.
CoupledParameters coupled_parameters(Regime regime, std::size_t n, double t, int d, double gamma, double beta,
                                     double delta = 0.05, const LabOptions& options = {});

/// Family, packing and all constraint checks for given parameters.
PerturbedFamily build_family(const CoupledParameters& p, const LabOptions& options = {});
ConstraintReport check_constraints(const PerturbedFamily& family, std::size_t n, double beta,
                                   const LabOptions& options = {});

struct SeparationSweep {
  std::vector<double> t;
  std::vector<double> separation;
  std::vector<double> ratio;  // separation / scaling, divided by the value at the first t
  RateFit fit;
  double predicted = -0.5;
  double min_ratio = 0.0;
};

/// Separation between one bump and none at fixed ε and R over t_list.
SeparationSweep separation_t_sweep(Regime regime, double gamma, double epsilon, double R,
                                   const std::vector<double>& t_list, double lambda = 1.0);

void write_constraints_csv(const std::vector<CoupledParameters>& rows, std::ostream& os);

}  // namespace tailscore
