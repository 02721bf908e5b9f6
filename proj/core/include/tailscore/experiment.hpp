#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tailscore/config.hpp"
#include "tailscore/metrics.hpp"

namespace tailscore {

/// Closed-form rate exponent for a sweep axis. Throws std::invalid_argument
/// for combinations without a stated rate.
double predicted_exponent(Experiment experiment, Regime regime, int d, double gamma, double beta, Axis axis);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExitReport {
  int status = 0;  // 0 pass, 1 check failed, 2 config error, 3 capability error
  std::string output_dir;
  std::vector<Check> checks;
  std::string message;
  bool pass() const { return status == 0; }
};

/// Runs the configured experiment and writes results.csv, fit.txt and meta.txt
/// into the output directory (`out_override` wins over the config).
ExitReport run(const ExperimentConfig& config, int threads = 0, const std::optional<std::string>& out_override = {});

/// Identifier of the source tree recorded at configure time.
std::string build_id();

}  // namespace tailscore
