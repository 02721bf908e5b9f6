#include "tailscore/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tailscore/kernel_score.hpp"
#include "tailscore/minimax_lab.hpp"
#include "tailscore/oracle.hpp"
#include "tailscore/parallel.hpp"
#include "tailscore/reverse_sampler.hpp"

#ifndef TAILSCORE_BUILD_ID
#define TAILSCORE_BUILD_ID "unknown"
#endif

namespace tailscore {

std::string build_id() { return TAILSCORE_BUILD_ID; }

double predicted_exponent(Experiment e, Regime regime, int d, double gamma, double beta, Axis axis) {
  const double dd = d, g1 = gamma + 1.0;
  const bool poly = regime == Regime::Polynomial;
  auto fail = [&]() -> double {
    throw std::invalid_argument("predicted_exponent: no stated rate for " + to_string(e) + " / " + to_string(regime) +
                                " along " + to_string(axis));
  };
  if (poly && !(gamma > 0.0)) throw std::invalid_argument("predicted_exponent: gamma must be positive");
  switch (e) {
    case Experiment::ScoreMse:
    case Experiment::RateSweepN:
    case Experiment::RateSweepT:
    case Experiment::DecoupledCompare:
      if (axis == Axis::LogN) return poly ? -g1 / (dd + g1) : -1.0;
      if (axis == Axis::LogT) return poly ? -1.0 - 0.5 * dd * g1 / (dd + g1) : -1.0 - 0.5 * dd;
      return fail();
    case Experiment::IntegratedError:
      if (axis == Axis::LogN) return poly ? -g1 / (dd + g1) : -1.0;
      if (axis == Axis::LogT0) return poly ? -dd * g1 / (2.0 * (dd + g1)) : -0.5 * dd;
      return fail();
    case Experiment::EarlyStop:
      if (axis == Axis::LogT0) return poly ? beta * g1 / (dd + 2.0 * g1 + 2.0 * beta) : 0.5 * beta;
      return fail();
    case Experiment::SampleAndCompare:
      if (axis == Axis::LogN)
        return poly ? -2.0 * beta * g1 / (4.0 * beta * (dd + g1) + dd * (dd + 2.0 * g1)) : -beta / (2.0 * beta + dd);
      return fail();
    case Experiment::InitGap:
      if (axis == Axis::LogT) return -0.5;
      return fail();
    case Experiment::RegionDiag:
      if (axis == Axis::LogRho) return poly ? g1 / (dd + g1) : 1.0;
      return fail();
    case Experiment::LowerBoundCheck:
      if (axis == Axis::LogT) return 0.5 * dd - 1.0;
      return fail();
  }
  return fail();
}

namespace {

constexpr std::uint64_t kEvalKey = 0x6576616c;  // eval sets get their own stream family
constexpr std::uint64_t kSamplerKey = 0x73616d70;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

struct Context {
  const ExperimentConfig& cfg;
  int threads;
  std::uint64_t seed;
  std::optional<DiffusedOracle> oracle;
  Regime regime = Regime::Polynomial;
  double gamma = 2.0, beta = 2.0;
  std::ostringstream csv, fit;
  std::vector<Check> checks;

  void check(const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass, detail});
  }
  void report_fit(const std::string& label, const RateFit& f, double predicted, double tol) {
    fit << label << ".axis = " << to_string(f.axis) << '\n'
        << label << ".predicted = " << num(predicted) << '\n'
        << label << ".fitted = " << num(f.slope) << '\n'
        << label << ".ci95 = [" << num(f.slope - f.slope_halfwidth) << ", " << num(f.slope + f.slope_halfwidth) << "]\n"
        << label << ".r2 = " << num(f.r_squared) << '\n'
        << label << ".tolerance = " << num(tol) << '\n';
    const double gap = std::abs(f.slope - predicted);
    check(label, gap <= tol, "fitted " + num(f.slope) + " vs predicted " + num(predicted) + ", |gap| " + num(gap) +
                                 " tol " + num(tol));
  }
};

ScoreFn make_estimator(const Context& c, const std::string& kind, const Matrix* samples, double t) {
  if (kind == "oracle") {
    const DiffusedOracle& o = *c.oracle;
    return [&o](double tt, Point x, std::span<double> out) { o.density_and_score(tt, x, out); };
  }
  if (kind == "decoupled") {
    DecoupledScoreModel::Params p;
    p.beta = c.beta;
    return DecoupledScoreModel(*samples, t, p).as_field();
  }
  return KdeScoreModel(*samples, t).as_field();
}

// ---------------------------------------------------------------- score MSE family

struct MseCell {
  double t = 0.0;
  std::size_t n = 0;
  std::vector<double> values, moms;
  double mean = 0.0, se = 0.0, mom = 0.0;
};

std::vector<MseCell> mse_grid(Context& c, const std::string& estimator_kind) {
  const auto& cfg = c.cfg;
  const std::size_t N = cfg.n_list.size(), R = cfg.replicates;
  std::vector<EvalSet> evals;
  for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti) {
    Stream rng(c.seed, kEvalKey, ti);
    evals.push_back(make_eval_set(*c.oracle, cfg.t_list[ti], cfg.eval_samples, rng, c.threads));
  }
  std::vector<MseCell> cells(cfg.t_list.size() * N);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    cells[k].t = cfg.t_list[k / N];
    cells[k].n = cfg.n_list[k % N];
    cells[k].values.resize(R);
    cells[k].moms.resize(R);
  }
  parallel_for(cells.size() * R, [&](std::size_t job) {
    const std::size_t k = job / R, r = job % R;
    MseCell& cell = cells[k];
    Stream rng(c.seed, k, r);
    Matrix samples;
    if (estimator_kind != "oracle") samples = c.oracle->target().sample(rng, cell.n);
    const ScoreFn est = make_estimator(c, estimator_kind, &samples, cell.t);
    const WeightedMseEstimate w = weighted_score_mse(est, evals[k / N], 1);
    cell.values[r] = w.value;
    cell.moms[r] = w.median_of_means;
  }, c.threads);
  for (auto& cell : cells) {
    double s = 0.0, s2 = 0.0, m = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      s += cell.values[r];
      s2 += cell.values[r] * cell.values[r];
      m += cell.moms[r];
    }
    cell.mean = s / double(R);
    cell.mom = m / double(R);
    cell.se = R > 1 ? std::sqrt(std::max(0.0, s2 / double(R) - cell.mean * cell.mean) / double(R - 1)) : 0.0;
  }
  return cells;
}

void write_mse_rows(Context& c, const std::vector<MseCell>& cells, const std::string& estimator) {
  for (const auto& cell : cells)
    c.csv << estimator << ',' << cell.n << ',' << num(cell.t) << ',' << cell.values.size() << ',' << num(cell.mean)
          << ',' << num(cell.se) << ',' << num(cell.mom) << '\n';
}

void run_score_mse(Context& c) {
  const auto& cfg = c.cfg;
  c.csv << "estimator,n,t,replicates,mse,mse_se,mse_median_of_means\n";
  const auto cells = mse_grid(c, cfg.estimator);
  write_mse_rows(c, cells, cfg.estimator);
  bool finite = std::all_of(cells.begin(), cells.end(), [](const MseCell& x) { return std::isfinite(x.mean); });
  c.check("finite", finite, "every cell produced a finite mean");

  if (cfg.experiment == Experiment::ScoreMse || cfg.estimator == "oracle") {
    if (cfg.estimator == "oracle") {
      const bool zero = std::all_of(cells.begin(), cells.end(), [](const MseCell& x) { return x.mean == 0.0; });
      c.check("oracle_zero", zero, "the oracle estimator reproduces the true score exactly");
    }
    return;
  }
  const bool along_n = cfg.experiment == Experiment::RateSweepN;
  std::vector<RatePoint> pts;
  for (const auto& cell : cells) pts.push_back({along_n ? double(cell.n) : cell.t, cell.mean, cell.se});
  const Axis axis = along_n ? Axis::LogN : Axis::LogT;
  const double pred = predicted_exponent(cfg.experiment, c.regime, cfg.d, c.gamma, c.beta, axis);
  c.report_fit("slope", fit_rate(pts, axis), pred, along_n ? cfg.tol_n_slope : cfg.tol_t_slope);
}

void run_decoupled_compare(Context& c) {
  c.csv << "estimator,n,t,replicates,mse,mse_se,mse_median_of_means\n";
  bool finite = true;
  for (const char* kind : {"kde", "decoupled"}) {
    const auto cells = mse_grid(c, kind);
    write_mse_rows(c, cells, kind);
    for (const auto& cell : cells) finite = finite && std::isfinite(cell.mean);
  }
  c.check("finite", finite, "both estimators produced finite errors in every cell");
}

// ---------------------------------------------------------------- integrated error

void run_integrated(Context& c) {
  const auto& cfg = c.cfg;
  const bool along_n = cfg.n_list.size() >= 4;
  const std::size_t cells = along_n ? cfg.n_list.size() : cfg.t0_list.size(), R = cfg.replicates;
  std::vector<double> vals(cells * R), ses(cells * R);
  parallel_for(cells * R, [&](std::size_t job) {
    const std::size_t k = job / R, r = job % R;
    const std::size_t n = along_n ? cfg.n_list[k] : cfg.n_list[0];
    const double t0 = along_n ? cfg.t0_list[0] : cfg.t0_list[k];
    Stream rng(c.seed, k, r);
    Matrix samples;
    if (cfg.estimator != "oracle") samples = c.oracle->target().sample(rng, n);
    const ScoreFn est = make_estimator(c, cfg.estimator, &samples, t0);
    Stream eval_rng(c.seed, kEvalKey, along_n ? 0 : k);
    const IntegratedError ie = integrated_score_error(est, *c.oracle, t0, *cfg.T, cfg.t_grid, cfg.eval_samples,
                                                      eval_rng, 1);
    vals[job] = ie.value;
    ses[job] = ie.std_error;
  }, c.threads);
  c.csv << "n,t0,T,replicates,integrated_error,integrated_error_se\n";
  std::vector<RatePoint> pts;
  for (std::size_t k = 0; k < cells; ++k) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      s += vals[k * R + r];
      s2 += vals[k * R + r] * vals[k * R + r];
    }
    const double mean = s / double(R);
    const double se = R > 1 ? std::sqrt(std::max(0.0, s2 / double(R) - mean * mean) / double(R - 1))
                            : ses[k * R];
    const std::size_t n = along_n ? cfg.n_list[k] : cfg.n_list[0];
    const double t0 = along_n ? cfg.t0_list[0] : cfg.t0_list[k];
    c.csv << n << ',' << num(t0) << ',' << num(*cfg.T) << ',' << R << ',' << num(mean) << ',' << num(se) << '\n';
    pts.push_back({along_n ? double(n) : t0, mean, se});
  }
  if (cfg.estimator == "oracle") {
    c.check("oracle_zero", std::all_of(pts.begin(), pts.end(), [](const RatePoint& p) { return p.value == 0.0; }),
            "the oracle estimator has zero integrated error");
    return;
  }
  const Axis axis = along_n ? Axis::LogN : Axis::LogT0;
  const double pred = predicted_exponent(Experiment::IntegratedError, c.regime, cfg.d, c.gamma, c.beta, axis);
  c.report_fit("slope", fit_rate(pts, axis), pred, along_n ? cfg.tol_n_slope : cfg.tol_t_slope);
}

// ---------------------------------------------------------------- quadrature curves

void run_early_stop(Context& c) {
  const auto& cfg = c.cfg;
  const EarlyStopCurve curve = early_stopping_bias_curve(*c.oracle, cfg.t0_list, c.beta, c.threads);
  c.csv << "t0,tv\n";
  for (const auto& p : curve.points) c.csv << num(p.x) << ',' << num(p.tv) << '\n';
  const double pred = predicted_exponent(Experiment::EarlyStop, c.regime, cfg.d, c.gamma, c.beta, Axis::LogT0);
  c.fit << "predicted_smoothing = " << num(curve.predicted_smoothing) << '\n'
        << "predicted_polynomial = " << num(curve.predicted_polynomial) << '\n';
  c.report_fit("slope", curve.fit, pred, cfg.tol_t_slope);
}

void run_init_gap(Context& c) {
  const InitGapReport rep = initialization_gap(*c.oracle, c.cfg.T_list, c.threads);
  c.csv << "T,tv,bound,violated\n";
  for (const auto& p : rep.points)
    c.csv << num(p.x) << ',' << num(p.tv) << ',' << num(p.bound) << ',' << p.violated << '\n';
  c.fit << "first_moment = " << num(rep.first_moment) << '\n';
  if (!rep.lemma_checked) {
    c.fit << "notice = " << rep.notice << '\n';
    c.check("bound", false, "first moment is infinite; the bound cannot be checked");
    return;
  }
  c.check("bound", !rep.any_violation, "TV(p_T, N(0,T)) <= M1/(2 sqrt T) at every T");
}

void run_region(Context& c) {
  const auto& cfg = c.cfg;
  const RegionReport rep = region_diagnostics(*c.oracle, cfg.t_list[0], cfg.n_list, cfg.alpha, c.threads);
  c.csv << "n,rho,level,lo,hi,g1_volume,g2_mass,g1_ratio,g2_ratio,g1_bound,g2_bound\n";
  for (const auto& r : rep.rows)
    c.csv << r.n << ',' << num(r.rho) << ',' << num(r.level) << ',' << num(r.lo) << ',' << num(r.hi) << ','
          << num(r.g1_volume) << ',' << num(r.g2_mass) << ',' << num(r.g1_ratio) << ',' << num(r.g2_ratio) << ','
          << num(r.g1_bound) << ',' << num(r.g2_bound) << '\n';
  const bool poly = rep.regime == Regime::Polynomial;
  const double tol = cfg.tol_region.value_or(poly ? 0.1 : 0.05);
  c.fit << "c_alpha = " << num(rep.c_alpha) << '\n'
        << "g1_ratio_growth = " << num(rep.g1_ratio_growth) << '\n'
        << "g2_ratio_growth = " << num(rep.g2_ratio_growth) << '\n';
  c.report_fit("g1", rep.g1_fit, rep.g1_predicted, tol);
  if (poly) {
    c.report_fit("g2", rep.g2_fit, rep.g2_predicted, tol);
  } else {
    c.fit << "g2.fitted = " << num(rep.g2_fit.slope) << '\n' << "g2.predicted = " << num(rep.g2_predicted) << '\n';
  }
  c.check("envelope", rep.one_sided, "measured volumes and masses stay below their explicit bounds");
}

// ---------------------------------------------------------------- sampling

void run_sample(Context& c) {
  const auto& cfg = c.cfg;
  if (cfg.d != 1) throw CapabilityError("SampleAndCompare: the smoothed TV comparison is one-dimensional");
  const StepRule rule = cfg.step_rule == "uniform" ? StepRule::Uniform : StepRule::GeometricTowardT0;
  const std::uint64_t sampler_seed = mix64(c.seed ^ kSamplerKey);
  c.csv << "n,T,t0,steps,endpoints,tv,tv_noise_floor,clamps,restarts\n";
  std::vector<RatePoint> pts;
  std::vector<double> tvs;
  for (std::size_t k = 0; k < cfg.n_list.size(); ++k) {
    const std::size_t n = cfg.n_list[k];
    DiffusionSchedule s;
    if (cfg.T) {
      s.T = *cfg.T;
      s.t0 = cfg.t0_list[0];
      s.steps = cfg.steps;
      s.step_rule = rule;
      s.seed = sampler_seed;
    } else {
      s = schedule_from_theorem(c.regime, n, cfg.d, c.beta, c.gamma, cfg.steps, rule, sampler_seed);
    }
    ScoreSource src;
    Stream rng(c.seed, k, 0);
    Matrix samples;
    if (cfg.estimator == "oracle") {
      src = oracle_source(*c.oracle);
    } else {
      samples = c.oracle->target().sample(rng, n);
      if (cfg.estimator == "decoupled") {
        DecoupledScoreModel::Params p;
        p.beta = c.beta;
        src = decoupled_source(DecoupledScoreModel(samples, s.t0, p));
      } else {
        src = kde_source(KdeScoreModel(samples, s.t0));
      }
    }
    const TrajectoryBatch batch = integrate_reverse(src, s, cfg.endpoints, 1, c.threads);
    const TvEstimate tv = tv_smoothed_vs_oracle(batch.endpoints.data(), cfg.smoothing, *c.oracle, s.t0);
    c.csv << n << ',' << num(s.T) << ',' << num(s.t0) << ',' << s.steps << ',' << cfg.endpoints << ','
          << num(tv.value) << ',' << num(tv.noise_floor) << ',' << batch.clamps << ',' << batch.restarts << '\n';
    pts.push_back({double(n), tv.value, 0.0});
    tvs.push_back(tv.value);
  }
  if (tvs.size() >= 2) {
    bool dec = true;
    for (std::size_t k = 1; k < tvs.size(); ++k) dec = dec && tvs[k] < tvs[k - 1];
    c.check("decreasing", dec, "TV strictly decreases along n_list");
  }
  if (cfg.tv_max)
    c.check("tv_max", tvs.back() < *cfg.tv_max, "TV at the largest n " + num(tvs.back()) + " below " + num(*cfg.tv_max));
  if (pts.size() >= 4) {
    const RateFit f = fit_rate(pts, Axis::LogN);
    const double pred = predicted_exponent(Experiment::SampleAndCompare, c.regime, cfg.d, c.gamma, c.beta, Axis::LogN);
    c.fit << "slope.predicted = " << num(pred) << '\n' << "slope.fitted = " << num(f.slope) << '\n';
  }
  if (c.checks.empty()) c.check("ran", true, "no comparison declared for a single n");
}

// ---------------------------------------------------------------- lower-bound lab

void run_lower_bound(Context& c) {
  const auto& cfg = c.cfg;
  LabOptions opt;
  opt.lambda = cfg.lambda;
  std::vector<CoupledParameters> rows;
  double tmin = *std::min_element(cfg.t_list.begin(), cfg.t_list.end());
  double tmax = *std::max_element(cfg.t_list.begin(), cfg.t_list.end());
  std::vector<std::pair<std::size_t, double>> grid;
  for (std::size_t n : cfg.n_list)
    for (double t : cfg.t_list) grid.emplace_back(n, t);
  rows.resize(grid.size());
  std::vector<std::string> errors(grid.size());
  std::vector<double> max_kl(grid.size()), max_chi2(grid.size()), spread(grid.size());
  std::vector<char> kl_ok(grid.size(), 0);
  parallel_for(grid.size(), [&](std::size_t i) {
    try {
      rows[i] = coupled_parameters(c.regime, grid[i].first, grid[i].second, cfg.d, c.gamma, c.beta, cfg.delta, opt);
      const PerturbedFamily fam = build_family(rows[i], opt);
      bool ok = true;
      for (const Signs& b : fam.signs) {
        const double kl = kl_radius(fam, b), chi2 = chi2_radius(fam, b);
        ok = ok && kl >= 0.0 && kl <= chi2;
        max_kl[i] = std::max(max_kl[i], kl);
        max_chi2[i] = std::max(max_chi2[i], chi2);
      }
      kl_ok[i] = ok;
      const Signs ones(fam.cells(), 1);
      double lo = 1e300, hi = 0.0;
      for (double scale : {0.25, 0.5, 1.0}) {
        PerturbedFamily::Spec s = fam.spec();
        s.epsilon *= scale;
        const double ratio = chi2_radius(PerturbedFamily(s), ones) / (s.epsilon * s.epsilon);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      spread[i] = hi / lo - 1.0;
    } catch (const CapabilityError&) {
      throw;
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  }, c.threads);
  write_constraints_csv(rows, c.csv);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string cell = "cell(n=" + std::to_string(grid[i].first) + ",t=" + num(grid[i].second) + ")";
    if (!errors[i].empty()) {
      c.check(cell, false, errors[i]);
      continue;
    }
    const auto& cr = rows[i].constraints;
    c.check(cell + ".constraints", cr.all(), cr.all() ? "all hold" : "failing: " + cr.failing());
    c.check(cell + ".kl_below_chi2", kl_ok[i] != 0, "max KL " + num(max_kl[i]) + ", max chi2 " + num(max_chi2[i]));
    c.check(cell + ".chi2_quadratic", spread[i] <= 0.05, "chi2/eps^2 spread " + num(spread[i]));
  }

  // Separation against t at the coupling of the middle cell, held fixed.
  const std::size_t mid = grid.size() / 2;
  if (!errors[mid].empty()) return;
  if (tmax <= tmin) tmin = tmax / 4.0;
  std::vector<double> ts;
  for (int k = 0; k < 6; ++k) ts.push_back(tmin * std::pow(tmax / tmin, k / 5.0));
  const SeparationSweep sw =
      separation_t_sweep(c.regime, c.gamma, rows[mid].epsilon, rows[mid].R, ts, cfg.lambda);
  c.fit << "separation.epsilon = " << num(rows[mid].epsilon) << '\n'
        << "separation.R = " << num(rows[mid].R) << '\n';
  for (std::size_t k = 0; k < sw.t.size(); ++k)
    c.fit << "separation.t" << k << " = " << num(sw.t[k]) << " value " << num(sw.separation[k]) << '\n';
  c.report_fit("separation", sw.fit, predicted_exponent(Experiment::LowerBoundCheck, c.regime, cfg.d, c.gamma, c.beta,
                                                        Axis::LogT),
               cfg.tol_separation);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError({"output_dir: cannot write " + p.string()});
  f << text;
}

}  // namespace

ExitReport run(const ExperimentConfig& cfg, int threads, const std::optional<std::string>& out_override) {
  ExitReport report;
  report.output_dir = out_override.value_or(cfg.output_dir);
  if (auto issues = validate(cfg); !issues.empty()) {
    report.status = 2;
    report.message = ConfigError(issues).what();
    return report;
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(report.output_dir, ec);
  if (ec || !fs::is_directory(report.output_dir)) {
    report.status = 2;
    report.message = "invalid configuration:\n  output_dir: cannot create '" + report.output_dir + "'";
    return report;
  }
  if (threads <= 0) threads = default_threads();

  Context c{cfg, threads, *cfg.seed, std::nullopt, Regime::Polynomial, 2.0, 2.0, {}, {}, {}};
  try {
    if (!cfg.target.empty()) {
      c.oracle.emplace(make_builtin_target(cfg.target));
      c.regime = regime_of(c.oracle->target());
      c.gamma = c.oracle->target().tail.gamma;
      c.beta = c.oracle->target().smoothness_beta;
    }
    if (cfg.regime) c.regime = *cfg.regime;
    if (cfg.gamma) c.gamma = *cfg.gamma;
    if (cfg.beta) {
      c.beta = *cfg.beta;
    } else if (c.beta > 2.0) {
      c.fit << "beta_note = target smoothness " << num(c.beta) << " capped at 2, the edge of the rate window\n";
      c.beta = 2.0;
    }

    switch (cfg.experiment) {
      case Experiment::ScoreMse:
      case Experiment::RateSweepN:
      case Experiment::RateSweepT: run_score_mse(c); break;
      case Experiment::IntegratedError: run_integrated(c); break;
      case Experiment::EarlyStop: run_early_stop(c); break;
      case Experiment::InitGap: run_init_gap(c); break;
      case Experiment::SampleAndCompare: run_sample(c); break;
      case Experiment::RegionDiag: run_region(c); break;
      case Experiment::LowerBoundCheck: run_lower_bound(c); break;
      case Experiment::DecoupledCompare: run_decoupled_compare(c); break;
    }
  } catch (const CapabilityError& ex) {
    report.status = 3;
    report.message = ex.what();
  } catch (const FarTailError& ex) {
    report.status = 3;
    report.message = ex.what();
  }

  std::ostringstream fit;
  fit << "experiment = " << to_string(cfg.experiment) << '\n'
      << "regime = " << to_string(c.regime) << '\n'
      << "gamma = " << num(c.gamma) << '\n'
      << "beta = " << num(c.beta) << '\n'
      << c.fit.str();
  for (const auto& ch : c.checks) fit << "check " << ch.name << " = " << (ch.pass ? "PASS" : "FAIL") << " (" << ch.detail << ")\n";
  if (report.status == 0)
    report.status = std::all_of(c.checks.begin(), c.checks.end(), [](const Check& x) { return x.pass; }) ? 0 : 1;
  fit << "status = " << report.status << '\n';
  if (!report.message.empty()) fit << "message = " << report.message << '\n';

  std::ostringstream meta;
  meta << "build_id = " << build_id() << '\n' << "seed = " << *cfg.seed << '\n' << "threads = " << threads << '\n';
  for (const auto& [k, v] : cfg.echo) meta << "config." << k << " = " << v << '\n';

  const fs::path dir(report.output_dir);
  write_file(dir / "results.csv", c.csv.str());
  write_file(dir / "fit.txt", fit.str());
  write_file(dir / "meta.txt", meta.str());
  report.checks = std::move(c.checks);
  return report;
}

}  // namespace tailscore
