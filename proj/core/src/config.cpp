#include "tailscore/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>

namespace tailscore {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::optional<double> to_number(const std::string& s) {
  const std::string v = trim(s);
  if (v.empty()) return std::nullopt;
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) return std::nullopt;
  return x;
}

std::optional<std::vector<double>> to_list(const std::string& s) {
  std::string v = trim(s);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') return std::nullopt;
  v = v.substr(1, v.size() - 2);
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto x = to_number(item);
    if (!x) return std::nullopt;
    out.push_back(*x);
  }
  return out;
}

std::optional<std::size_t> to_count(double x) {
  if (!(x >= 0.0) || x != std::floor(x) || x > 1e15) return std::nullopt;
  return static_cast<std::size_t>(x);
}

}  // namespace

std::string to_string(Experiment e) {
  for (const auto& [k, desc] : experiment_catalog()) {
    if (k != e) continue;
    return desc.substr(0, desc.find(':'));
  }
  return "unknown";
}

const std::vector<std::pair<Experiment, std::string>>& experiment_catalog() {
  static const std::vector<std::pair<Experiment, std::string>> cat = {
      {Experiment::ScoreMse, "ScoreMse: weighted score MSE per (n, t) cell"},
      {Experiment::RateSweepN, "RateSweepN: score MSE slope in n at fixed t"},
      {Experiment::RateSweepT, "RateSweepT: score MSE slope in t at fixed n"},
      {Experiment::IntegratedError, "IntegratedError: time-integrated score error against n or t0"},
      {Experiment::EarlyStop, "EarlyStop: TV(p0, p_t0) slope in t0 by quadrature"},
      {Experiment::InitGap, "InitGap: TV(p_T, N(0,T)) against the first-moment bound"},
      {Experiment::SampleAndCompare, "SampleAndCompare: reverse-SDE endpoints against p_t0 in TV"},
      {Experiment::RegionDiag, "RegionDiag: bulk volume and tail mass of the threshold level sets"},
      {Experiment::LowerBoundCheck, "LowerBoundCheck: least-favourable family constraints and separation"},
      {Experiment::DecoupledCompare, "DecoupledCompare: thresholded KDE against the decoupled estimator"},
  };
  return cat;
}

std::optional<Experiment> parse_experiment(const std::string& name) {
  for (const auto& [k, desc] : experiment_catalog())
    if (desc.substr(0, desc.find(':')) == name) return k;
  return std::nullopt;
}

ConfigError::ConfigError(std::vector<std::string> list)
    : std::runtime_error([&] {
        std::string m = "invalid configuration:";
        for (const auto& s : list) m += "\n  " + s;
        return m;
      }()),
      issues(std::move(list)) {}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::vector<std::string> issues;
  std::set<std::string> seen;

  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  auto number = [&](auto assign) -> Setter {
    return [&issues, assign](const std::string& key, const std::string& value) {
      auto x = to_number(value);
      if (!x) {
        issues.push_back(key + ": expected a number, got '" + value + "'");
        return;
      }
      assign(*x);
    };
  };
  auto count = [&](auto assign) -> Setter {
    return [&issues, assign](const std::string& key, const std::string& value) {
      auto x = to_number(value);
      auto c = x ? to_count(*x) : std::nullopt;
      if (!c) {
        issues.push_back(key + ": expected a non-negative integer, got '" + value + "'");
        return;
      }
      assign(*c);
    };
  };
  auto list = [&](std::vector<double>& dst) -> Setter {
    return [&issues, &dst](const std::string& key, const std::string& value) {
      auto v = to_list(value);
      if (!v) {
        issues.push_back(key + ": expected a list like [1, 2, 3], got '" + value + "'");
        return;
      }
      dst = *v;
    };
  };
  auto text = [](std::string& dst) -> Setter {
    return [&dst](const std::string&, const std::string& value) { dst = value; };
  };

  const std::map<std::string, Setter> setters = {
      {"experiment",
       [&](const std::string& key, const std::string& v) {
         auto e = parse_experiment(v);
         if (!e)
           issues.push_back(key + ": unknown experiment '" + v + "' (see list-experiments)");
         else
           cfg.experiment = *e;
       }},
      {"target", text(cfg.target)},
      {"d", number([&](double x) { cfg.d = int(x); })},
      {"gamma", number([&](double x) { cfg.gamma = x; })},
      {"beta", number([&](double x) { cfg.beta = x; })},
      {"regime",
       [&](const std::string& key, const std::string& v) {
         std::string s = v;
         std::transform(s.begin(), s.end(), s.begin(), ::tolower);
         if (s == "polynomial")
           cfg.regime = Regime::Polynomial;
         else if (s == "exponential")
           cfg.regime = Regime::Exponential;
         else
           issues.push_back(key + ": expected Polynomial or Exponential, got '" + v + "'");
       }},
      {"n_list",
       [&](const std::string& key, const std::string& v) {
         auto l = to_list(v);
         if (!l) {
           issues.push_back(key + ": expected a list like [1000, 1e4], got '" + v + "'");
           return;
         }
         cfg.n_list.clear();
         for (double x : *l) {
           auto c = to_count(x);
           if (!c) {
             issues.push_back(key + ": entries must be non-negative integers");
             return;
           }
           cfg.n_list.push_back(*c);
         }
       }},
      {"t_list", list(cfg.t_list)},
      {"t0_list", list(cfg.t0_list)},
      {"T_list", list(cfg.T_list)},
      {"T", number([&](double x) { cfg.T = x; })},
      {"replicates", count([&](std::size_t x) { cfg.replicates = x; })},
      {"eval_samples", count([&](std::size_t x) { cfg.eval_samples = x; })},
      {"seed", count([&](std::size_t x) { cfg.seed = x; })},
      {"output_dir", text(cfg.output_dir)},
      {"estimator", text(cfg.estimator)},
      {"steps", number([&](double x) { cfg.steps = int(x); })},
      {"step_rule", text(cfg.step_rule)},
      {"endpoints", count([&](std::size_t x) { cfg.endpoints = x; })},
      {"smoothing", number([&](double x) { cfg.smoothing = x; })},
      {"alpha", number([&](double x) { cfg.alpha = x; })},
      {"t_grid", count([&](std::size_t x) { cfg.t_grid = x; })},
      {"lambda", number([&](double x) { cfg.lambda = x; })},
      {"delta", number([&](double x) { cfg.delta = x; })},
      {"tol_n_slope", number([&](double x) { cfg.tol_n_slope = x; })},
      {"tol_t_slope", number([&](double x) { cfg.tol_t_slope = x; })},
      {"tol_region", number([&](double x) { cfg.tol_region = x; })},
      {"tol_separation", number([&](double x) { cfg.tol_separation = x; })},
      {"tv_max", number([&](double x) { cfg.tv_max = x; })},
  };

  std::string line;
  int lineno = 0;
  bool have_experiment = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) {
      issues.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    if (!seen.insert(key).second) {
      issues.push_back(key + ": given more than once");
      continue;
    }
    if (key == "experiment") have_experiment = true;
    it->second(key, value);
    cfg.echo.emplace_back(key, value);
  }
  if (!have_experiment) issues.push_back("experiment: missing");
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open '" + path + "'"});
  return parse_config(in);
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> out;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };
  const Experiment e = c.experiment;
  need(c.seed.has_value(), "seed: missing (no wall-clock default)");
  need(c.d >= 1, "d: must be at least 1");
  need(!c.output_dir.empty(), "output_dir: empty");

  if (e == Experiment::LowerBoundCheck) {
    need(c.regime.has_value() || !c.target.empty(), "regime: required when no target is given");
    need(c.gamma.has_value() || !c.target.empty(), "gamma: required when no target is given");
    need(c.beta.has_value() || !c.target.empty(), "beta: required when no target is given");
  } else {
    need(!c.target.empty(), "target: missing");
  }
  if (!c.target.empty()) {
    try {
      const TargetDistribution t = make_builtin_target(c.target);
      need(t.dim == c.d, "d: " + std::to_string(c.d) + " does not match the target dimension " + std::to_string(t.dim));
    } catch (const std::exception& ex) {
      out.push_back(std::string("target: ") + ex.what());
    }
  }
  if (c.gamma) need(*c.gamma > 0.0, "gamma: must be positive");
  if (c.beta) need(*c.beta > 0.0, "beta: must be positive");

  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  };
  need(positive(c.t_list), "t_list: entries must be positive");
  need(positive(c.t0_list), "t0_list: entries must be positive");
  need(positive(c.T_list), "T_list: entries must be positive");
  need(std::all_of(c.n_list.begin(), c.n_list.end(), [](std::size_t n) { return n >= 2; }),
       "n_list: entries must be at least 2");
  need(c.estimator == "kde" || c.estimator == "oracle" || c.estimator == "decoupled",
       "estimator: expected kde, oracle or decoupled");
  need(c.step_rule == "geometric" || c.step_rule == "uniform", "step_rule: expected geometric or uniform");
  need(c.replicates >= 1, "replicates: must be at least 1");

  const bool mse = e == Experiment::ScoreMse || e == Experiment::RateSweepN || e == Experiment::RateSweepT ||
                   e == Experiment::IntegratedError || e == Experiment::DecoupledCompare;
  if (mse) need(c.eval_samples >= 1000, "eval_samples: must be at least 1000");

  switch (e) {
    case Experiment::ScoreMse:
    case Experiment::DecoupledCompare:
      need(!c.n_list.empty(), "n_list: empty");
      need(!c.t_list.empty(), "t_list: empty");
      break;
    case Experiment::RateSweepN:
      need(c.n_list.size() >= 4, "n_list: a slope fit needs at least 4 values");
      need(c.t_list.size() == 1, "t_list: give exactly one t for an n sweep");
      need(c.replicates >= 2, "replicates: need at least 2 for standard errors");
      break;
    case Experiment::RateSweepT:
      need(c.t_list.size() >= 4, "t_list: a slope fit needs at least 4 values");
      need(c.n_list.size() == 1, "n_list: give exactly one n for a t sweep");
      need(c.replicates >= 2, "replicates: need at least 2 for standard errors");
      break;
    case Experiment::IntegratedError: {
      need(!c.n_list.empty(), "n_list: empty");
      need(!c.t0_list.empty(), "t0_list: empty");
      need(c.T.has_value(), "T: missing");
      need((c.n_list.size() >= 4 && c.t0_list.size() == 1) || (c.t0_list.size() >= 4 && c.n_list.size() == 1),
           "n_list/t0_list: sweep one axis (at least 4 values) and fix the other (one value)");
      if (c.T)
        for (double t0 : c.t0_list) need(t0 < *c.T, "t0_list: every t0 must be below T");
      need(c.t_grid >= 8, "t_grid: must be at least 8");
      break;
    }
    case Experiment::EarlyStop:
      need(c.t0_list.size() >= 4, "t0_list: a slope fit needs at least 4 values");
      need(std::all_of(c.t0_list.begin(), c.t0_list.end(), [](double x) { return x < 1.0; }),
           "t0_list: entries must lie in (0, 1)");
      break;
    case Experiment::InitGap:
      need(!c.T_list.empty(), "T_list: empty");
      break;
    case Experiment::SampleAndCompare:
      need(!c.n_list.empty(), "n_list: empty");
      need(c.steps >= 1, "steps: must be at least 1");
      need(c.endpoints >= 100, "endpoints: must be at least 100");
      need(c.smoothing > 0.0, "smoothing: must be positive");
      need(c.T.has_value() == !c.t0_list.empty(), "T/t0_list: give both (fixed schedule) or neither (theorem schedule)");
      need(c.t0_list.size() <= 1, "t0_list: at most one value for sampling");
      break;
    case Experiment::RegionDiag:
      need(c.n_list.size() >= 4, "n_list: a slope fit needs at least 4 values");
      need(c.t_list.size() == 1, "t_list: give exactly one t");
      need(c.alpha > 0.0, "alpha: must be positive");
      break;
    case Experiment::LowerBoundCheck:
      need(!c.n_list.empty(), "n_list: empty");
      need(!c.t_list.empty(), "t_list: empty");
      need(std::all_of(c.n_list.begin(), c.n_list.end(), [](std::size_t n) { return n >= 10; }),
           "n_list: entries must be at least 10");
      need(c.d == 1, "d: the lower-bound lab is one-dimensional");
      need(c.lambda > 0.0, "lambda: must be positive");
      need(c.delta > 0.0 && c.delta < 1.0, "delta: must lie in (0, 1)");
      break;
  }
  return out;
}

}  // namespace tailscore
