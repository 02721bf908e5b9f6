#include "tailscore/reverse_sampler.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tailscore/parallel.hpp"

namespace tailscore {

namespace {

constexpr int kMaxAttempts = 16;

}  // namespace

std::string to_string(StepRule r) { return r == StepRule::Uniform ? "uniform" : "geometric"; }

void DiffusionSchedule::validate() const {
  if (!(t0 > 0.0) || !(T > t0)) throw std::invalid_argument("schedule: need 0 < t0 < T");
  if (steps < 1) throw std::invalid_argument("schedule: steps must be at least 1");
}

std::vector<double> DiffusionSchedule::times() const {
  validate();
  std::vector<double> tau(steps + 1);
  for (int k = 0; k <= steps; ++k) {
    const double f = double(k) / steps;
    tau[k] = step_rule == StepRule::Uniform ? T - f * (T - t0) : T * std::pow(t0 / T, f);
  }
  tau.front() = T;
  tau.back() = t0;
  return tau;
}

DiffusionSchedule schedule_from_theorem(Regime regime, std::size_t n, int d, double beta, double gamma, int steps,
                                        StepRule rule, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("schedule_from_theorem: n must be at least 2");
  if (steps < 1) throw std::invalid_argument("schedule_from_theorem: steps must be at least 1");
  if (!(beta > 0.0) || d < 1) throw std::invalid_argument("schedule_from_theorem: need beta > 0 and d >= 1");
  DiffusionSchedule s;
  const double ln = std::log(double(n));
  if (regime == Regime::Polynomial) {
    const double g1 = gamma + 1.0;
    const double denom = 4.0 * beta * (d + g1) + d * (d + 2.0 * g1);
    s.t0 = std::exp(-2.0 * (d + 2.0 * g1) / denom * ln);
    s.T = std::exp(4.0 * beta * g1 / denom * ln);
  } else {
    s.t0 = std::exp(-2.0 / (2.0 * beta + d) * ln);
    s.T = std::exp(2.0 * beta / (2.0 * beta + d) * ln);
  }
  s.steps = steps;
  s.step_rule = rule;
  s.seed = seed;
  s.beta_outside_window = !(beta > 0.0 && beta <= 2.0);
  return s;
}

Matrix forward_sample(const TargetDistribution& target, double t, std::size_t m, Stream& rng) {
  if (m < 1) throw std::invalid_argument("forward_sample: m must be at least 1");
  if (t < 0.0) throw std::invalid_argument("forward_sample: t must be nonnegative");
  Matrix out(m, target.dim);
  const double st = std::sqrt(t);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = out.row(i);
    target.sample(rng, row);
    if (t > 0.0)
      for (double& v : row) v += st * rng.normal();
  }
  return out;
}

ScoreSource oracle_source(const DiffusedOracle& oracle) {
  return {[oracle](double t, Point x, std::span<double> out) { oracle.density_and_score(t, x, out); }, "oracle",
          false};
}

ScoreSource kde_source(const KdeScoreModel& model) {
  return {model.as_field(), "kde(n=" + std::to_string(model.n()) + ")", true};
}

ScoreSource decoupled_source(const DecoupledScoreModel& model) {
  std::ostringstream tag;
  tag << "decoupled(n=" << model.n() << ",h=" << model.bandwidth() << ")";
  return {model.as_field(), tag.str(), true};
}

TrajectoryBatch integrate_reverse(const ScoreSource& score, const DiffusionSchedule& schedule, std::size_t m, int dim,
                                  int threads) {
  if (m < 1) throw std::invalid_argument("integrate_reverse: m must be at least 1");
  if (dim < 1) throw std::invalid_argument("integrate_reverse: dim must be positive");
  const std::vector<double> tau = schedule.times();
  TrajectoryBatch batch;
  batch.schedule = schedule;
  batch.score_tag = score.tag;
  batch.endpoints = Matrix(m, dim);
  std::vector<std::size_t> clamps(m, 0), restarts(m, 0);

  parallel_for(m, [&](std::size_t i) {
    std::vector<double> y(dim), s(dim);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Stream rng(schedule.seed, i, static_cast<std::uint64_t>(attempt));
      const double s_init = std::sqrt(schedule.T);
      for (double& v : y) v = s_init * rng.normal();
      bool finite = true;
      for (int k = 0; k < schedule.steps && finite; ++k) {
        const double h = tau[k] - tau[k + 1];
        score.fn(tau[k], y, s);
        if (score.estimated) {
          double norm2 = 0.0;
          for (double v : s) norm2 += v * v;
          const double cap = 10.0 / std::sqrt(tau[k]);
          if (norm2 > cap * cap) {
            const double f = cap / std::sqrt(norm2);
            for (double& v : s) v *= f;
            ++clamps[i];
          }
        }
        const double sh = std::sqrt(h);
        for (int j = 0; j < dim; ++j) {
          y[j] += h * s[j] + sh * rng.normal();
          if (!std::isfinite(y[j])) finite = false;
        }
      }
      if (finite) {
        std::copy(y.begin(), y.end(), batch.endpoints.row(i).begin());
        return;
      }
      ++restarts[i];
    }
    throw std::runtime_error("integrate_reverse: trajectory " + std::to_string(i) + " diverged on every attempt");
  }, threads);

  for (std::size_t i = 0; i < m; ++i) {
    batch.clamps += clamps[i];
    batch.restarts += restarts[i];
  }
  batch.divergence_rate = double(batch.restarts) / double(m);
  if (batch.divergence_rate > 0.01) {
    std::ostringstream os;
    os << "integrate_reverse: divergence rate " << batch.divergence_rate << " exceeds 1% (" << batch.restarts
       << " restarts over " << m << " trajectories, score " << score.tag << ", steps " << schedule.steps
       << "); refine the step schedule or check the score";
    throw std::runtime_error(os.str());
  }
  return batch;
}

void write_endpoints_csv(const TrajectoryBatch& batch, std::ostream& os) {
  const auto& s = batch.schedule;
  os.precision(17);
  os << "# T=" << s.T << "\n# t0=" << s.t0 << "\n# steps=" << s.steps << "\n# step_rule=" << to_string(s.step_rule)
     << "\n# seed=" << s.seed << "\n# score=" << batch.score_tag << "\n# clamps=" << batch.clamps
     << "\n# restarts=" << batch.restarts << "\n";
  os << "traj_id";
  for (std::size_t j = 0; j < batch.endpoints.cols(); ++j) os << ",dim_" << j;
  os << "\n";
  for (std::size_t i = 0; i < batch.endpoints.rows(); ++i) {
    os << i;
    for (double v : batch.endpoints.row(i)) os << "," << v;
    os << "\n";
  }
}

double em_gaussian_variance(const DiffusionSchedule& schedule, double sigma2) {
  const auto tau = schedule.times();
  double v = schedule.T;
  for (int k = 0; k < schedule.steps; ++k) {
    const double h = tau[k] - tau[k + 1];
    const double a = 1.0 - h / (sigma2 + tau[k]);
    v = a * a * v + h;
  }
  return v;
}

double reverse_gaussian_variance(const DiffusionSchedule& schedule, double sigma2) {
  // v(τ) = (σ²+τ) + (v_T - (σ²+T)) ((σ²+τ)/(σ²+T))²
  const double a = sigma2 + schedule.t0, b = sigma2 + schedule.T;
  return a + (schedule.T - b) * (a / b) * (a / b);
}

}  // namespace tailscore
