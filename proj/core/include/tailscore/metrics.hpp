#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tailscore/kernel_score.hpp"
#include "tailscore/matrix.hpp"
#include "tailscore/oracle.hpp"
#include "tailscore/reverse_sampler.hpp"
#include "tailscore/rng.hpp"

namespace tailscore {

// ---------------------------------------------------------------- score error

struct WeightedMseEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double median_of_means = 0.0;  // 16 blocks
  std::size_t eval_points = 0;
  double t = 0.0;
  std::size_t n = 0;
};

/// Points Z_j ~ p_t with their true scores, reusable across estimators.
struct EvalSet {
  double t = 0.0;
  Matrix points;
  Matrix true_score;
};

EvalSet make_eval_set(const DiffusedOracle& oracle, double t, std::size_t eval_samples, Stream& rng, int threads = 0);

/// (1/M) Σ |ŝ_t(Z_j) - s_t(Z_j)|^2 over an evaluation set. `estimator` gets the set's t.
WeightedMseEstimate weighted_score_mse(const ScoreFn& estimator, const EvalSet& eval, int threads = 0);
WeightedMseEstimate weighted_score_mse(const ScoreFn& estimator, const DiffusedOracle& oracle, double t,
                                       std::size_t eval_samples, Stream& rng, int threads = 0);

struct IntegratedError {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> t_grid;
  std::vector<WeightedMseEstimate> per_t;
};

/// ∫_{t0}^{T} E|ŝ_t - s_t|^2_{L2(p_t)} dt by the trapezoid rule in log t.
IntegratedError integrated_score_error(const ScoreFn& estimator, const DiffusedOracle& oracle, double t0, double T,
                                       std::size_t t_grid_size, std::size_t eval_samples, Stream& rng,
                                       int threads = 0);

// ---------------------------------------------------------------- TV distances

struct TvEstimate {
  double value = 0.0;
  double error = 0.0;  // quadrature error plus omitted tail mass, or bootstrap sd
  double noise_floor = 0.0;
  std::string method;
};

using Density1d = std::function<double(double)>;

/// ½∫|a - b| over [-R, R] (R may be infinite). `breaks` are extra breakpoints.
TvEstimate tv_1d(const Density1d& a, const Density1d& b, double truncation_radius,
                 std::vector<double> breaks = {});

struct HistogramMethod {
  std::optional<std::size_t> bins_per_axis;
};
struct KnnClassifierMethod {
  int k = 5;
  std::size_t max_points = 2000;  // per batch, subsampled above this
};

/// Histogram TV on the pooled 0.1%–99.9% quantile box (with overflow cells), or
/// a k-NN two-sample classifier proxy 2·accuracy − 1 (a lower-bound-flavoured
/// proxy, not a TV estimate). Uncertainty from 200 bootstrap resamples.
TvEstimate tv_empirical(const Matrix& a, const Matrix& b, const HistogramMethod& method, std::uint64_t seed = 1,
                        std::size_t bootstrap = 200);
TvEstimate tv_empirical(const Matrix& a, const Matrix& b, const KnnClassifierMethod& method, std::uint64_t seed = 1,
                        std::size_t bootstrap = 200);

/// TV between φ_b * (empirical law of `samples`) and p_{t + b²}; smoothing both
/// sides by the same Gaussian keeps the comparison between exact laws. d = 1.
TvEstimate tv_smoothed_vs_oracle(const std::vector<double>& samples, double bandwidth, const DiffusedOracle& oracle,
                                 double t);

/// Kolmogorov–Smirnov statistic of a sample against a continuous CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
/// Asymptotic one-sample critical value sqrt(-ln(α/2)/2)/sqrt(m).
double ks_critical_value(std::size_t m, double alpha);

// ---------------------------------------------------------------- rate fits

enum class Axis { LogN, LogT, LogT0, LogRho };
std::string to_string(Axis a);

struct RatePoint {
  double abscissa = 0.0, value = 0.0, stderr_ = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_halfwidth = 0.0;  // 95%
  Axis axis = Axis::LogN;
  std::vector<RatePoint> points;
  std::vector<double> residuals;
};

RateFit fit_rate(const std::vector<RatePoint>& points, Axis axis);

// ---------------------------------------------------------------- bias curves

struct CurvePoint {
  double x = 0.0;
  double tv = 0.0;
  double bound = 0.0;  // lemma bound where one applies
  bool violated = false;
};

struct EarlyStopCurve {
  std::vector<CurvePoint> points;  // x = t0
  RateFit fit;
  double predicted_smoothing = 0.0;    // β/2
  double predicted_polynomial = 0.0;   // β(γ+1)/(d+2(γ+1)+2β)
};

EarlyStopCurve early_stopping_bias_curve(const DiffusedOracle& oracle, const std::vector<double>& t0_list,
                                         double beta, int threads = 0);

struct InitGapReport {
  std::vector<CurvePoint> points;  // x = T
  double first_moment = 0.0;
  bool lemma_checked = false;  // false when M1 is infinite
  std::string notice;
  bool any_violation = false;
};

InitGapReport initialization_gap(const DiffusedOracle& oracle, const std::vector<double>& T_list, int threads = 0);

// ---------------------------------------------------------------- region geometry

/// Smallest c satisfying c > 2 and c > 2 C_α (1 + sqrt(c)), nudged up by 1e-9 relative.
double solve_c_alpha(double alpha);

struct RegionRow {
  std::size_t n = 0;
  double rho = 0.0;
  double level = 0.0;  // c_α ρ_n
  double lo = 0.0, hi = 0.0;
  double g1_volume = 0.0;
  double g2_mass = 0.0;
  double g1_ratio = 0.0;  // against the lemma scaling, unit constant
  double g2_ratio = 0.0;
  double g1_bound = 0.0;  // explicit bound from the tail envelope
  double g2_bound = 0.0;
};

struct RegionReport {
  double t = 0.0;
  double alpha = 1.0;
  double c_alpha = 0.0;
  Regime regime = Regime::Polynomial;
  double gamma = 0.0;
  std::vector<RegionRow> rows;
  RateFit g1_fit;             // log |G1| vs log ρ (polynomial); log(|G1|/L^{d/γ}) vs log n (exponential)
  RateFit g2_fit;             // log ∫_{G2} p_t vs log ρ
  double g1_predicted = 0.0;
  double g2_predicted = 0.0;
  double g1_ratio_growth = 0.0;  // max over the sweep of ratio / ratio at the smallest n
  double g2_ratio_growth = 0.0;
  bool one_sided = true;  // every measured value sits below its explicit envelope bound
};

RegionReport region_diagnostics(const DiffusedOracle& oracle, double t, const std::vector<std::size_t>& n_list,
                                double alpha = 1.0, int threads = 0);

}  // namespace tailscore
