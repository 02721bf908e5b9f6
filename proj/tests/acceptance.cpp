// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--only 1,4,12] [--threads N] [--out DIR] [--configs DIR]

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tailscore/config.hpp"
#include "tailscore/experiment.hpp"
#include "tailscore/kernel_score.hpp"
#include "tailscore/metrics.hpp"
#include "tailscore/oracle.hpp"
#include "tailscore/parallel.hpp"
#include "tailscore/quadrature.hpp"
#include "tailscore/reverse_sampler.hpp"

#ifndef TAILSCORE_CONFIG_DIR
#define TAILSCORE_CONFIG_DIR "configs"
#endif

using namespace tailscore;
namespace fs = std::filesystem;

namespace {

struct Env {
  int threads = 0;
  fs::path out = "acceptance_out";
  fs::path configs = TAILSCORE_CONFIG_DIR;
};

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "" : "FAILED ") + what);
  }
};

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

// Runs a shipped config through the experiment driver and folds in its checks.
void run_config(Outcome& o, const Env& env, const std::string& name, int threads) {
  const ExperimentConfig cfg = load_config((env.configs / (name + ".cfg")).string());
  const ExitReport r = run(cfg, threads, (env.out / name).string());
  if (r.status == 2 || r.status == 3) {
    o.require(false, name + ": " + r.message);
    return;
  }
  for (const auto& c : r.checks) o.require(c.pass, name + "." + c.name + " " + c.detail);
}

// ---------------------------------------------------------------- 1

Outcome estimator_identities(const Env&) {
  Outcome o;
  const double t10 = 1.0 / (2.0 * std::numbers::pi);
  const Matrix ten(10, 1, std::vector<double>{-2, -1, -0.5, 0, 0.1, 0.2, 0.7, 1.3, 2, 3});
  const double rho = KdeScoreModel(ten, t10).threshold_rho();
  const double want = std::log(10.0) / 10.0;
  o.require(std::abs(rho - want) <= 1e-15 * want, "rho(n=10,t=1/(2pi)) = " + fmt(rho, 17) + " vs ln(10)/10");

  // thresholding law over three bandwidths and a wide grid
  Stream rng(101);
  const Matrix data = make_laplace(1).sample(rng, 200);
  std::size_t zero = 0, ratio = 0, broken = 0;
  double ratio_err = 0.0;
  for (double t : {0.01, 0.1, 1.0}) {
    const KdeScoreModel m(data, t);
    for (int i = 0; i <= 4000; ++i) {
      const double x[1] = {-40.0 + 0.02 * i};
      double g[1], s[1];
      const auto e = m.evaluate(x, g, s);
      const bool below = e.density < m.threshold_rho();
      if ((s[0] == 0.0) != below || e.above_threshold == below) ++broken;
      if (below) {
        ++zero;
      } else {
        ++ratio;
        const double want = g[0] / e.density;
        ratio_err = std::max(ratio_err, std::abs(s[0] - want) / std::max(std::abs(want), 1e-300));
      }
    }
  }
  o.require(broken == 0 && zero > 0 && ratio > 0, "threshold law: " + std::to_string(zero) + " zero-branch, " +
                                                       std::to_string(ratio) + " ratio-branch, " +
                                                       std::to_string(broken) + " violations");
  o.require(ratio_err <= 1e-12, "score vs grad/density above threshold, worst relative gap " + fmt(ratio_err, 3));

  // analytic gradient against central differences
  Stream rng2(102);
  const KdeScoreModel m(make_gaussian(1).sample(rng2, 100), 0.5);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double x0 = -2.0 + 4.0 * rng2.uniform();
    const double h = 1e-5;
    const double xp[1] = {x0 + h}, xm[1] = {x0 - h}, xc[1] = {x0};
    const double fd = (m.density(xp) - m.density(xm)) / (2.0 * h);
    const double g = m.grad_density(xc)[0];
    worst = std::max(worst, std::abs(fd - g) / std::max(std::abs(g), 1e-3));
  }
  o.require(worst <= 1e-6, "gradient vs finite differences, worst relative error " + fmt(worst, 3));
  return o;
}

// ---------------------------------------------------------------- 2, 3

const std::vector<MseReport>& pointwise_reports(const Env& env) {
  static std::vector<MseReport> reports;
  if (!reports.empty()) return reports;
  Matrix cloud(20, 1);
  for (int i = 0; i < 20; ++i) cloud(i, 0) = -2.85 + 0.3 * i;
  std::uint64_t seed = 2001;
  for (const char* spec : {"gaussian", "laplace", "student_t(nu=3)"}) {
    const DiffusedOracle oracle(make_builtin_target(spec));
    for (double t : {0.1, 1.0}) reports.push_back(pointwise_mse_report(oracle, t, 200, cloud, 1000, seed++, env.threads));
  }
  return reports;
}

Outcome unbiasedness(const Env& env) {
  Outcome o;
  const char* names[] = {"gaussian", "laplace", "student_t"};
  const auto& reps = pointwise_reports(env);
  for (std::size_t k = 0; k < reps.size(); ++k) {
    double worst = 0.0;
    for (const auto& p : reps[k].points) {
      worst = std::max(worst, std::abs(p.density_bias) / p.density_bias_se);
      worst = std::max(worst, std::abs(p.grad_bias[0]) / p.grad_bias_se[0]);
    }
    o.require(!reps[k].any_bias_flag, std::string(names[k / 2]) + " t=" + fmt(reps[k].t) + " max |bias|/se " +
                                          fmt(worst, 3));
  }
  return o;
}

Outcome pointwise_bounds(const Env& env) {
  Outcome o;
  const char* names[] = {"gaussian", "laplace", "student_t"};
  const auto& reps = pointwise_reports(env);
  for (std::size_t k = 0; k < reps.size(); ++k) {
    double worst = 0.0;
    for (const auto& p : reps[k].points) {
      worst = std::max(worst, p.density_mse / p.density_bound);
      worst = std::max(worst, p.grad_mse / p.grad_bound);
    }
    o.require(!reps[k].any_bound_violated,
              std::string(names[k / 2]) + " t=" + fmt(reps[k].t) + " max mse/bound " + fmt(worst, 3));
  }
  return o;
}

// ---------------------------------------------------------------- 10

Outcome gaussian_closed_loop(const Env& env) {
  Outcome o;
  const DiffusedOracle oracle(make_gaussian(1));
  DiffusionSchedule s;
  s.T = 10.0;
  s.t0 = 1e-3;
  s.steps = 2000;
  s.step_rule = StepRule::Uniform;
  s.seed = 10001;
  const std::size_t m = 100000;
  const TrajectoryBatch b = integrate_reverse(oracle_source(oracle), s, m, 1, env.threads);
  const double sd = std::sqrt(1.0 + s.t0);
  const double ks = ks_statistic(b.endpoints.data(), [sd](double x) { return quad::normal_cdf(x / sd); });
  const double crit = ks_critical_value(m, 0.01);
  o.require(ks < crit, "KS " + fmt(ks, 3) + " vs 1% critical value " + fmt(crit, 3));

  auto disc_error = [&](int steps) {
    DiffusionSchedule q = s;
    q.steps = steps;
    return em_gaussian_variance(q, 1.0) - reverse_gaussian_variance(q, 1.0);
  };
  const double e1 = disc_error(2000), e2 = disc_error(4000);
  const double r = e2 / e1;
  o.require(r >= 0.35 && r <= 0.65, "variance error " + fmt(e1, 3) + " -> " + fmt(e2, 3) + " on doubling, ratio " +
                                        fmt(r, 3));
  double v = 0.0;
  for (double x : b.endpoints.data()) v += x * x;
  v /= double(m);
  o.notes.push_back("endpoint second moment " + fmt(v, 5) + ", EM law " + fmt(em_gaussian_variance(s, 1.0), 5));
  return o;
}

// ---------------------------------------------------------------- 13

Outcome decoupled_estimator(const Env& env) {
  Outcome o;
  const OrderKernel k(3);
  double worst = std::abs(k.moment(0) - 1.0);
  for (int j = 1; j <= 3; ++j) worst = std::max(worst, std::abs(k.moment(j)));
  o.require(worst <= 1e-10, "order-3 moments, worst deviation " + fmt(worst, 3));

  // E f̂_h(x) = (K_h * p)(x) exactly; the bias is taken uniformly over a grid.
  const TargetDistribution target = make_generalized_gaussian(3.0, 1);
  auto pdf = [&](double y) {
    const double yy[1] = {y};
    return target.pdf(yy);
  };
  auto expected = [&](double x, double h) {
    std::vector<double> br{-1.0, 1.0};
    if (std::abs(x / h) < 1.0) br.insert(br.begin() + 1, x / h);
    return quad::adaptive([&](double u) { return k(u) * pdf(x - h * u); }, std::span<const double>(br), 1e-14).value;
  };
  const std::vector<double> hs{0.4, 0.2, 0.1};
  std::vector<double> bias;
  for (double h : hs) {
    double b = 0.0;
    for (int i = 0; i <= 160; ++i) {
      const double x = -2.0 + 0.025 * i;
      b = std::max(b, std::abs(expected(x, h) - pdf(x)));
    }
    bias.push_back(b);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    mx += std::log(hs[i]) / 3.0;
    my += std::log(bias[i]) / 3.0;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    sxy += (std::log(hs[i]) - mx) * (std::log(bias[i]) - my);
    sxx += (std::log(hs[i]) - mx) * (std::log(hs[i]) - mx);
  }
  const double slope = sxy / sxx;
  o.require(std::abs(slope - 3.0) <= 0.3, "bias slope in log h " + fmt(slope, 4) + " (biases " + fmt(bias[0], 3) + ", " +
                                              fmt(bias[1], 3) + ", " + fmt(bias[2], 3) + ")");

  // Monte Carlo mean of the estimator at h = 0.4 against the quadrature expectation
  const std::size_t R = 400, n = 2000;
  std::vector<double> vals(R);
  parallel_for(R, [&](std::size_t r) {
    Stream rng(13001, r);
    DecoupledScoreModel::Params p;
    p.beta = 3.0;
    p.bandwidth = 0.4;
    const DecoupledScoreModel mdl(target.sample(rng, n), 0.0, p);
    const double x[1] = {0.0};
    vals[r] = mdl.density(x);
  }, env.threads);
  double s1 = 0, s2 = 0;
  for (double v : vals) {
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / R, se = std::sqrt((s2 / R - mean * mean) / (R - 1));
  const double ex = expected(0.0, 0.4);
  o.require(std::abs(mean - ex) <= 4.0 * se, "estimator mean at x=0, h=0.4: " + fmt(mean, 6) + " vs " + fmt(ex, 6) +
                                                 " (se " + fmt(se, 2) + ")");

  std::size_t bad = 0, evals = 0;
  for (std::size_t nn : {50, 2000}) {
    Stream rng(13002 + nn);
    const Matrix data = target.sample(rng, nn);
    for (double t : {0.0, 1e-3, 0.1, 1.0}) {
      DecoupledScoreModel::Params p;
      p.beta = 3.0;
      const DecoupledScoreModel mdl(data, t, p);
      for (int i = 0; i <= 2000; ++i) {
        const double x[1] = {-25.0 + 0.025 * i};
        double s[1];
        mdl.evaluate(x, {}, s);
        ++evals;
        if (!std::isfinite(s[0])) ++bad;
      }
    }
  }
  o.require(bad == 0, "thresholded score finite at " + std::to_string(evals - bad) + "/" + std::to_string(evals) +
                          " points");
  return o;
}

// ---------------------------------------------------------------- 14

Outcome reproducibility(const Env& env) {
  Outcome o;
  for (const char* name : {"repro_score_mse", "repro_integrated", "repro_sample", "repro_lower_bound"}) {
    const ExperimentConfig cfg = load_config((env.configs / (std::string(name) + ".cfg")).string());
    std::string csv[2];
    int k = 0;
    for (int threads : {1, 8}) {
      const fs::path dir = env.out / (std::string(name) + "_t" + std::to_string(threads));
      const ExitReport r = run(cfg, threads, dir.string());
      if (r.status >= 2) o.require(false, std::string(name) + ": " + r.message);
      std::ifstream in(dir / "results.csv", std::ios::binary);
      csv[k++] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    o.require(!csv[0].empty() && csv[0] == csv[1],
              std::string(name) + " results.csv " + (csv[0] == csv[1] ? "identical" : "differs") + " at 1 and 8 workers (" +
                  std::to_string(csv[0].size()) + " bytes)");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Env env;
  std::string only;
  std::string out = env.out.string(), configs = env.configs.string();
  CLI::App app{"acceptance criteria"};
  app.add_option("--only", only, "comma-separated criterion numbers");
  app.add_option("--threads", env.threads, "worker count");
  app.add_option("--out", out, "output root");
  app.add_option("--configs", configs, "config directory");
  CLI11_PARSE(app, argc, argv);
  env.out = out;
  env.configs = configs;

  const std::map<int, std::pair<std::string, std::function<Outcome(const Env&)>>> criteria = {
      {1, {"estimator identities", estimator_identities}},
      {2, {"unbiasedness", unbiasedness}},
      {3, {"pointwise MSE bounds", pointwise_bounds}},
      {4, {"polynomial n-slope", [](const Env& e) { Outcome o; run_config(o, e, "rate_n_student_t", e.threads); return o; }}},
      {5, {"exponential n-slope", [](const Env& e) { Outcome o; run_config(o, e, "rate_n_laplace", e.threads); return o; }}},
      {6, {"t-slope", [](const Env& e) { Outcome o; run_config(o, e, "rate_t_laplace", e.threads); return o; }}},
      {7, {"region geometry", [](const Env& e) {
             Outcome o;
             run_config(o, e, "region_student_t", e.threads);
             run_config(o, e, "region_laplace", e.threads);
             return o;
           }}},
      {8, {"early-stopping bias", [](const Env& e) { Outcome o; run_config(o, e, "early_stop_gaussian", e.threads); return o; }}},
      {9, {"initialization gap", [](const Env& e) {
             Outcome o;
             run_config(o, e, "init_gap_gaussian", e.threads);
             run_config(o, e, "init_gap_laplace", e.threads);
             return o;
           }}},
      {10, {"gaussian closed loop", gaussian_closed_loop}},
      {11, {"heavy-tailed sampling", [](const Env& e) { Outcome o; run_config(o, e, "sample_laplace", e.threads); return o; }}},
      {12, {"lower-bound lab", [](const Env& e) {
              Outcome o;
              run_config(o, e, "lower_bound_polynomial", e.threads);
              run_config(o, e, "lower_bound_exponential", e.threads);
              return o;
            }}},
      {13, {"decoupled estimator", decoupled_estimator}},
      {14, {"reproducibility", reproducibility}},
  };

  std::set<int> selected;
  if (only.empty()) {
    for (const auto& [k, v] : criteria) selected.insert(k);
  } else {
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
  }

  bool all = true;
  for (int k : selected) {
    auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << k << '\n';
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second(env);
    } catch (const std::exception& ex) {
      o.require(false, std::string("exception: ") + ex.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    std::cout << "criterion " << std::setw(2) << k << "  " << (o.pass ? "PASS" : "FAIL") << "  " << it->second.first
              << "  [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat << '\n';
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
  }
  return all ? 0 : 1;
}
