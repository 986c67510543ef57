#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcmstep/scenario.hpp"
#include "dcmstep/sim.hpp"

namespace fs = std::filesystem;

namespace {

dcmstep::SimConfig resolve_scenario(const std::string& path, const std::string& builtin) {
  if (!path.empty() && !builtin.empty()) {
    throw dcmstep::ConfigError("pass either a scenario file or --scenario-builtin, not both");
  }
  if (!builtin.empty()) return dcmstep::builtin_scenario(builtin);
  if (!path.empty()) return dcmstep::load_scenario_file(path);
  throw dcmstep::ConfigError("missing scenario: pass a file path or --scenario-builtin NAME");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw dcmstep::ConfigError("cannot write '" + p.string() + "'");
  return out;
}

int cmd_run(const std::string& scenario, const std::string& builtin, const std::string& mode,
            const std::string& out_dir) {
  dcmstep::SimConfig cfg = resolve_scenario(scenario, builtin);
  if (mode == "adaptive") cfg.mode = dcmstep::ControllerMode::adaptive;
  if (mode == "fixed") cfg.mode = dcmstep::ControllerMode::fixed_timing;

  const dcmstep::Trace trace = dcmstep::run_scenario(cfg);
  const dcmstep::SummaryReport summary = dcmstep::build_summary(trace, cfg.recovery);

  fs::create_directories(out_dir);
  auto csv = open_out(fs::path(out_dir) / "trace.csv");
  dcmstep::write_trace_csv(csv, trace);
  auto sum = open_out(fs::path(out_dir) / "summary.txt");
  dcmstep::write_summary(sum, summary);
  dcmstep::write_summary(std::cout, summary);

  return trace.diverged ? 2 : 0;
}

int cmd_sweep(const std::string& scenario, const std::string& builtin, double theta_min,
              double theta_max, double theta_step, int threads, const std::string& out_dir) {
  dcmstep::SimConfig cfg = resolve_scenario(scenario, builtin);
  if (!(theta_step > 0.0)) throw dcmstep::ConfigError("--theta-step must be > 0");

  std::vector<double> thetas;
  for (double th = theta_min; th <= theta_max + 1e-9; th += theta_step) thetas.push_back(th);

  dcmstep::SweepOptions opt;
  opt.threads = threads;
  cfg.mode = dcmstep::ControllerMode::adaptive;
  const auto adaptive = dcmstep::max_push_sweep(cfg, thetas, opt);
  cfg.mode = dcmstep::ControllerMode::fixed_timing;
  const auto fixed = dcmstep::max_push_sweep(cfg, thetas, opt);

  fs::create_directories(out_dir);
  auto csv = open_out(fs::path(out_dir) / "sweep.csv");
  csv << "theta_deg,f_max_adaptive_N,f_max_fixed_N\n";
  for (size_t i = 0; i < thetas.size(); ++i) {
    csv << dcmstep::format_sig9(adaptive[i].theta_deg) << ','
        << dcmstep::format_sig9(adaptive[i].f_max) << ','
        << dcmstep::format_sig9(fixed[i].f_max) << "\n";
    std::cout << "theta " << adaptive[i].theta_deg << " deg: adaptive " << adaptive[i].f_max
              << " N, fixed " << fixed[i].f_max << " N\n";
  }
  return 0;
}

int cmd_validate(const std::string& scenario, const std::string& builtin) {
  const dcmstep::SimConfig cfg = resolve_scenario(scenario, builtin);
  std::cout << dcmstep::serialize_scenario(cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biped walking simulator with DCM-based step location and timing adaptation"};
  app.require_subcommand(1);

  std::string scenario, builtin, out_dir = ".", mode;
  double theta_min = -90.0, theta_max = 90.0, theta_step = 15.0;
  int threads = 0;

  CLI::App* run = app.add_subcommand("run", "simulate a scenario, write trace.csv and summary.txt");
  run->add_option("scenario", scenario, "scenario file");
  run->add_option("--scenario-builtin", builtin, "built-in scenario name");
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--mode", mode, "override controller mode")
      ->check(CLI::IsMember({"adaptive", "fixed"}));

  CLI::App* sweep =
      app.add_subcommand("sweep", "maximum recoverable push per direction, both controller modes");
  sweep->add_option("scenario", scenario, "scenario file");
  sweep->add_option("--scenario-builtin", builtin, "built-in scenario name");
  sweep->add_option("--theta-min", theta_min, "first push angle [deg]")->capture_default_str();
  sweep->add_option("--theta-max", theta_max, "last push angle [deg]")->capture_default_str();
  sweep->add_option("--theta-step", theta_step, "angle grid step [deg]")->capture_default_str();
  sweep->add_option("--threads", threads, "worker threads (0 = auto)")->capture_default_str();
  sweep->add_option("--out", out_dir, "output directory")->capture_default_str();

  CLI::App* validate = app.add_subcommand("validate", "parse and echo the effective configuration");
  validate->add_option("scenario", scenario, "scenario file");
  validate->add_option("--scenario-builtin", builtin, "built-in scenario name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario, builtin, mode, out_dir);
    if (sweep->parsed()) return cmd_sweep(scenario, builtin, theta_min, theta_max, theta_step,
                                          threads, out_dir);
    if (validate->parsed()) return cmd_validate(scenario, builtin);
  } catch (const dcmstep::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
