// drce: offline synthesis, Monte Carlo simulation and schedule verification.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "drce/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::optional<double> tol;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> methods;
  std::vector<double> theta_w, theta_v;
  std::optional<double> theta_x0;
  std::optional<double> lambda;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory (overrides the config)");
  cmd->add_option("--tol", o.tol, "SDP duality-gap tolerance");
  cmd->add_option("--runs", o.runs, "Monte Carlo runs");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--method", o.methods, "Restrict to methods (wdrce, wdrc, lqg)");
  cmd->add_option("--grid-theta-w", o.theta_w, "theta_w grid");
  cmd->add_option("--grid-theta-v", o.theta_v, "theta_v grid");
  cmd->add_option("--grid-theta-x0", o.theta_x0, "theta_x0");
  cmd->add_option("--lambda", o.lambda, "Fixed penalty (disables selection)");
}

drce::ExperimentConfig apply(const Overrides& o) {
  auto c = drce::load_config(o.config);
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.tol) c.tol = *o.tol;
  if (o.runs) c.n_runs = *o.runs;
  if (o.seed) c.base_seed = *o.seed;
  if (!o.methods.empty()) {
    c.methods.clear();
    for (const auto& m : o.methods) c.methods.push_back(drce::method_from_string(m));
  }
  if (!o.theta_w.empty()) c.theta_w = o.theta_w;
  if (!o.theta_v.empty()) c.theta_v = o.theta_v;
  if (o.theta_x0) c.theta_x0 = *o.theta_x0;
  if (o.lambda) c.lambda = {drce::LambdaSpec::Mode::Fixed, *o.lambda};
  if (c.n_runs < 1) throw drce::ConfigError("--runs must be >= 1");
  if (!(c.tol > 0.0)) throw drce::ConfigError("--tol must be positive");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein distributionally robust control and estimation"};
  app.require_subcommand(1);

  Overrides off, sim, run;
  auto* offline = app.add_subcommand("offline", "Synthesize one schedule per grid cell");
  add_common(offline, off);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of synthesized schedules");
  add_common(simulate, sim);
  std::string schedule_dir;
  simulate->add_option("--schedules", schedule_dir, "Directory holding manifest.json (default: --out)");

  auto* all = app.add_subcommand("run", "offline followed by simulate");
  add_common(all, run);

  auto* verify = app.add_subcommand("verify", "Check every stage of a schedule file");
  std::string schedule_file;
  std::optional<double> verify_tol;
  verify->add_option("schedule", schedule_file, "Schedule file")->required();
  verify->add_option("--tol", verify_tol, "Gap tolerance (default: the schedule's own)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : drce::kExitConfigError;
  }

  try {
    if (*verify) return drce::cmd_verify(schedule_file, verify_tol, std::cout, std::cerr);
    if (*offline) return drce::cmd_offline(apply(off), std::cout, std::cerr);
    if (*simulate) {
      const auto cfg = apply(sim);
      const std::filesystem::path dir =
          schedule_dir.empty() ? cfg.out_dir : std::filesystem::path(schedule_dir);
      return drce::cmd_simulate(cfg, dir, std::cout, std::cerr);
    }
    if (*all) {
      const auto cfg = apply(run);
      if (const int rc = drce::cmd_offline(cfg, std::cout, std::cerr); rc != 0) return rc;
      return drce::cmd_simulate(cfg, cfg.out_dir, std::cout, std::cerr);
    }
  } catch (const drce::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return drce::kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return drce::kExitConfigError;
  }
  return 0;
}
