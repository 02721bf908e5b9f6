#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tailscore/kernel_score.hpp"
#include "tailscore/matrix.hpp"
#include "tailscore/targets.hpp"

namespace tailscore {

enum class StepRule { Uniform, GeometricTowardT0 };

std::string to_string(StepRule r);

struct DiffusionSchedule {
  double T = 1.0;
  double t0 = 1e-3;
  int steps = 100;
  StepRule step_rule = StepRule::GeometricTowardT0;
  std::uint64_t seed = 0;
  bool beta_outside_window = false;  // set by schedule_from_theorem when β ∉ (0, 2]

  void validate() const;
  /// Diffusion times T = τ_0 > τ_1 > ... > τ_steps = t0.
  std::vector<double> times() const;
};

DiffusionSchedule schedule_from_theorem(Regime regime, std::size_t n, int d, double beta, double gamma, int steps,
                                        StepRule rule = StepRule::GeometricTowardT0, std::uint64_t seed = 0);

/// m draws of X0 + sqrt(t) Z.
Matrix forward_sample(const TargetDistribution& target, double t, std::size_t m, Stream& rng);

struct ScoreSource {
  ScoreFn fn;
  std::string tag;         // "oracle", "kde(n=...)", "decoupled(n=...,h=...)", ...
  bool estimated = false;  // clamp |s| <= 10/sqrt(t) when set
};

ScoreSource oracle_source(const DiffusedOracle& oracle);
ScoreSource kde_source(const KdeScoreModel& model);
ScoreSource decoupled_source(const DecoupledScoreModel& model);

struct TrajectoryBatch {
  Matrix endpoints;  // m x d states at diffusion time t0
  DiffusionSchedule schedule;
  std::string score_tag;
  std::size_t clamps = 0;    // clamped score evaluations
  std::size_t restarts = 0;  // trajectories restarted after a non-finite state
  double divergence_rate = 0.0;
};

/// Euler–Maruyama for dY = s_{T-τ}(Y) dτ + dW from Y_0 ~ N(0, T I). Trajectory i
/// draws from Stream(seed, i, attempt), so results do not depend on `threads`.
TrajectoryBatch integrate_reverse(const ScoreSource& score, const DiffusionSchedule& schedule, std::size_t m, int dim,
                                  int threads = 0);

/// CSV with `# key=value` schedule lines, then `traj_id,dim_0,...`.
void write_endpoints_csv(const TrajectoryBatch& batch, std::ostream& os);

/// Exact variance of the Euler–Maruyama chain for a N(0, σ²) target driven by its
/// true score -x/(σ² + τ), started from N(0, T).
double em_gaussian_variance(const DiffusionSchedule& schedule, double sigma2);
/// Variance at t0 of the continuous reverse SDE for the same problem.
double reverse_gaussian_variance(const DiffusionSchedule& schedule, double sigma2);

}  // namespace tailscore
