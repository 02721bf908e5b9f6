#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tailscore/config.hpp"
#include "tailscore/experiment.hpp"
#include "tailscore/oracle.hpp"

using namespace tailscore;

namespace {

int print_issues(const std::vector<std::string>& issues) {
  std::cerr << "invalid configuration:\n";
  for (const auto& s : issues) std::cerr << "  " << s << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thresholded KDE score experiments"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 0;
  std::string out_dir;

  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  run_cmd->add_option("--config", config_path, "experiment config file")->required();
  run_cmd->add_option("--threads", threads, "worker count (default: THREADS or all cores)")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--out", out_dir, "output directory, overrides output_dir");

  auto* validate_cmd = app.add_subcommand("validate", "check a config without running it");
  validate_cmd->add_option("--config", config_path, "experiment config file")->required();

  app.add_subcommand("list-experiments", "print the experiment catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (app.got_subcommand("list-experiments")) {
    for (const auto& [e, desc] : experiment_catalog()) std::cout << desc << '\n';
    return 0;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    return print_issues(e.issues);
  }

  if (validate_cmd->parsed()) {
    if (auto issues = validate(cfg); !issues.empty()) return print_issues(issues);
    std::cout << "ok: " << to_string(cfg.experiment) << '\n';
    return 0;
  }

  try {
    const ExitReport r = run(cfg, threads, out_dir.empty() ? std::nullopt : std::optional<std::string>(out_dir));
    if (r.status == 2) {
      std::cerr << r.message << '\n';
      return 2;
    }
    for (const auto& c : r.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << c.detail << '\n';
    if (!r.message.empty()) std::cerr << r.message << '\n';
    std::cout << "results in " << r.output_dir << '\n';
    return r.status;
  } catch (const ConfigError& e) {
    return print_issues(e.issues);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
