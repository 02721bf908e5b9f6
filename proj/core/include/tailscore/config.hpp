#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tailscore/targets.hpp"

namespace tailscore {

enum class Experiment {
  ScoreMse,
  RateSweepN,
  RateSweepT,
  IntegratedError,
  EarlyStop,
  InitGap,
  SampleAndCompare,
  RegionDiag,
  LowerBoundCheck,
  DecoupledCompare,
};

std::string to_string(Experiment e);
std::optional<Experiment> parse_experiment(const std::string& name);
/// Name and one-line description of every experiment, in declaration order.
const std::vector<std::pair<Experiment, std::string>>& experiment_catalog();

/// Invalid or incomplete configuration; `issues` holds one line per field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  std::vector<std::string> issues;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::ScoreMse;
  std::string target;
  int d = 1;
  std::optional<double> gamma;  // defaults to the target's tail index
  std::optional<double> beta;   // defaults to the target's smoothness
  std::optional<Regime> regime;
  std::vector<std::size_t> n_list;
  std::vector<double> t_list, t0_list, T_list;
  std::optional<double> T;
  std::size_t replicates = 20;
  std::size_t eval_samples = 20000;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "out";

  std::string estimator = "kde";  // kde | oracle | decoupled
  int steps = 400;
  std::string step_rule = "geometric";
  std::size_t endpoints = 10000;
  double smoothing = 0.1;
  double alpha = 1.0;
  std::size_t t_grid = 16;
  double lambda = 1.0;
  double delta = 0.05;

  double tol_n_slope = 0.15;
  double tol_t_slope = 0.25;
  std::optional<double> tol_region;
  double tol_separation = 0.2;
  std::optional<double> tv_max;

  /// key = value lines as read, for the metadata echo.
  std::vector<std::pair<std::string, std::string>> echo;
};

/// Flat `key = value` text; `#` starts a comment; lists are `[a, b, c]`.
/// Throws ConfigError listing every bad field.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Field-level problems; empty when the config can run.
std::vector<std::string> validate(const ExperimentConfig& cfg);

}  // namespace tailscore
