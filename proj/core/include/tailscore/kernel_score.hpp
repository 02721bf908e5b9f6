#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "tailscore/matrix.hpp"
#include "tailscore/oracle.hpp"
#include "tailscore/targets.hpp"

namespace tailscore {

/// Score field over (t, x); writes the score into `out`.
using ScoreFn = std::function<void(double t, Point x, std::span<double> out)>;

/// ρ_n = log n / (n (2πt)^{d/2}).
double default_threshold(std::size_t n, int d, double t);

/// Gaussian KDE at bandwidth sqrt(t) with the thresholded score
/// ŝ_t = ∇p̂_t / p̂_t · 1{p̂_t >= ρ_n}. Copies share the sample storage.
class KdeScoreModel {
 public:
  KdeScoreModel(const Matrix& samples, double t);
  KdeScoreModel(const Matrix& samples, double t, double threshold_rho);

  /// Same samples at another diffusion time, default threshold.
  KdeScoreModel at(double t) const;

  double density(Point x) const;
  std::vector<double> grad_density(Point x) const;
  std::vector<double> score(Point x) const;

  struct Eval {
    double density = 0.0;
    bool above_threshold = false;
  };
  /// Writes ∇p̂_t into grad (may be empty) and ŝ_t into score (may be empty).
  Eval evaluate(Point x, std::span<double> grad, std::span<double> score) const;

  double t() const { return t_; }
  double threshold_rho() const { return rho_; }
  std::size_t n() const { return data_->n; }
  int dim() const { return data_->d; }

  /// Score field that rebuilds the model at each requested t.
  ScoreFn as_field() const;

 private:
  struct Data {
    std::size_t n = 0;
    int d = 1;
    std::vector<double> xs;  // sorted when d == 1, row-major otherwise
  };
  KdeScoreModel(std::shared_ptr<const Data> data, double t, double rho);
  std::shared_ptr<const Data> data_;
  double t_ = 0.0;
  double rho_ = 0.0;
};

/// Compactly supported order-ℓ kernel K(u) = P(u)(1-u^2)^2 on [-1, 1] with
/// ∫K = 1 and ∫u^j K = 0 for 1 <= j <= ℓ.
class OrderKernel {
 public:
  explicit OrderKernel(int order);
  int order() const { return order_; }
  double operator()(double u) const;
  double derivative(double u) const;
  const std::vector<double>& coefficients() const { return coeffs_; }  // P in the monomial basis
  /// ∫ u^j K(u) du by 64-node Gauss–Legendre (exact for these polynomials).
  double moment(int j) const;
  /// ∫ |u|^p |K(u)| du.
  double abs_moment(double p) const;

 private:
  int order_;
  std::vector<double> coeffs_;
};

OrderKernel build_order_kernel(int order);

/// Decoupled estimator: order-ℓ KDE f̂_h smoothed by φ_t, thresholded at
/// C_ρ h^β. d = 1 or 2, kernel tensorized.
class DecoupledScoreModel {
 public:
  struct Params {
    double beta = 2.0;
    std::optional<double> bandwidth;  // default n^{-1/(2β+d)}
    std::optional<int> order;         // default floor(β)
    std::optional<double> c_rho;      // default 2 C_{B,0} + 1
    double holder_L = 1.0;            // enters C_{B,0}
  };
  DecoupledScoreModel(const Matrix& samples, double t, Params params);

  DecoupledScoreModel at(double t) const;

  double density(Point x) const;
  std::vector<double> grad(Point x) const;
  std::vector<double> score(Point x) const;
  double evaluate(Point x, std::span<double> grad, std::span<double> score) const;

  double t() const { return t_; }
  double bandwidth() const { return h_; }
  double threshold_rho() const { return rho_; }
  double c_rho() const { return c_rho_; }
  const OrderKernel& kernel() const { return *kernel_; }
  std::size_t n() const { return samples_->rows(); }
  int dim() const { return static_cast<int>(samples_->cols()); }

  ScoreFn as_field() const;

  /// (K_h * φ_t)(z) and its derivative in one dimension; t = 0 gives K_h.
  static void smoothed_kernel_1d(const OrderKernel& k, double h, double t, double z, double& value,
                                 double& deriv);

 private:
  std::shared_ptr<const Matrix> samples_;
  std::shared_ptr<const OrderKernel> kernel_;
  double t_, h_, rho_, c_rho_, beta_;
};

/// C_{B,0} = L (2d)^ℓ / ℓ! ∫ |u|^β |K(u)| du (tensor kernel, Euclidean norm).
double bias_constant(const OrderKernel& k, int d, double beta, double holder_L);

struct MsePoint {
  std::vector<double> x;
  double p_true = 0.0;
  double density_mse = 0.0, density_mse_se = 0.0, density_bound = 0.0;
  double density_bias = 0.0, density_bias_se = 0.0;
  double grad_mse = 0.0, grad_mse_se = 0.0, grad_bound = 0.0;
  std::vector<double> grad_bias, grad_bias_se;
  bool bound_violated = false;
  bool bias_flag = false;  // |bias| > 4 standard errors
};

struct MseReport {
  double t = 0.0;
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::vector<MsePoint> points;
  bool any_bound_violated = false;
  bool any_bias_flag = false;
};

MseReport pointwise_mse_report(const DiffusedOracle& oracle, double t, std::size_t n, const Matrix& x_cloud,
                               std::size_t replicates, std::uint64_t seed, int threads = 0);

struct EnvelopeHitReport {
  double alpha = 0.0;
  double c_alpha = 0.0;  // C_α = max{√(8α), 16α/3}
  std::size_t replicates = 0;
  std::size_t violations = 0;
  double frequency = 0.0;
  double allowed = 0.0;  // n^{-α} + 3 binomial standard errors
  bool pass = false;
};

double concentration_constant(double alpha);

EnvelopeHitReport concentration_envelope_check(const DiffusedOracle& oracle, double t, std::size_t n, double alpha,
                                               const Matrix& x_cloud, std::size_t replicates, std::uint64_t seed,
                                               int threads = 0);

}  // namespace tailscore
