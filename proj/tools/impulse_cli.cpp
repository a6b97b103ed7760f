// impulse: command-line driver for scenario files.
//
//   impulse validate scenarios/two_state.json
//   impulse solve scenarios/two_state.json --tol 1e-12
//   impulse report scenarios/five_state_ctmc.json --out out/five --paths 2000
//
// Exit status is 0 only when the scenario loads and every executed check passes.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "impulse/experiments.hpp"
#include "impulse/scenario.hpp"

namespace {

struct Overrides {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<double> tie_tol;
  std::optional<std::size_t> k_horizon;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> fine_factor;
  std::vector<std::size_t> checkpoints;
};

void apply_overrides(impulse::Scenario& s, const Overrides& o) {
  if (o.seed) s.simulation.seed = *o.seed;
  if (o.tol) s.solver.tol = *o.tol;
  if (o.tie_tol) s.solver.tie_tol = *o.tie_tol;
  if (o.k_horizon) s.solver.K = *o.k_horizon;
  if (o.paths) s.simulation.n_paths = *o.paths;
  if (o.steps) {
    s.simulation.horizon_steps = *o.steps;
    if (o.checkpoints.empty()) s.simulation.checkpoints.clear();
  }
  if (o.fine_factor) s.simulation.fine_factor = *o.fine_factor;
  if (!o.checkpoints.empty()) s.simulation.checkpoints = o.checkpoints;
}

void print_checks(const std::string& prefix, const impulse::ValidationReport& r) {
  for (const auto& c : r.checks) {
    std::cout << (c.passed ? "  PASS " : "  FAIL ") << prefix << c.name;
    if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
    std::cout << "\n";
  }
}

int execute(const std::string& command, const Overrides& o) {
  const impulse::LoadResult loaded = impulse::load_scenario(o.scenario);
  if (!loaded.ok()) {
    for (const auto& d : loaded.diagnostics)
      std::cerr << o.scenario << ": " << d.code << " error at " << (d.location.empty() ? "/" : d.location)
                << ": " << d.message << "\n";
    return 2;
  }
  impulse::Scenario scenario = *loaded.scenario;
  try {
    apply_overrides(scenario, o);
    impulse::resolve_checkpoints(scenario.simulation);
  } catch (const std::exception& e) {
    std::cerr << "invalid option: " << e.what() << "\n";
    return 2;
  }

  std::vector<std::string> experiments;
  if (command == "report") {
    experiments = scenario.experiments.empty() ? impulse::applicable_experiments(scenario) : scenario.experiments;
  } else if (command != "validate") {
    experiments = {command};
  }

  const impulse::RunReport report = impulse::run(scenario, experiments);
  std::cout << "scenario " << report.scenario << "  sha256 " << report.input_digest << "\n";
  print_checks("", report.validation);
  for (const auto& e : report.experiments) {
    std::cout << (e.passed() ? "PASS " : "FAIL ") << e.id << "  [" << e.wall_clock_seconds << " s]\n";
    print_checks(e.id + ": ", e.checks);
    for (const auto& w : e.warnings) std::cout << "  WARN " << w << "\n";
    if (!e.error.empty()) std::cout << "  ERROR " << e.error << "\n";
  }
  if (!o.out.empty()) {
    report.write(o.out);
    std::cout << "report written to " << o.out << "\n";
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average-cost impulse control under generalised discounting"};
  app.require_subcommand(1);
  Overrides o;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "load a scenario and check its assumptions"},
      {"solve", "undiscounted relative value iteration"},
      {"solve-discounted", "time-dependent discounted Bellman recursion"},
      {"oracle", "compare against exhaustive enumeration of stationary strategies"},
      {"equivalence", "discounted vs undiscounted value of the optimal strategy"},
      {"refine", "lambda_h along the scenario's h ladder"},
      {"simulate", "Monte Carlo estimates of both functionals"},
      {"report", "run every experiment listed in (or applicable to) the scenario"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("scenario", o.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "directory for report.json and CSV tables");
    sub->add_option("--seed", o.seed, "simulation seed");
    sub->add_option("--tol", o.tol, "solver tolerance");
    sub->add_option("--tie-tol", o.tie_tol, "tie tolerance for strategy extraction");
    sub->add_option("--k-horizon", o.k_horizon, "discounted horizon K");
    sub->add_option("--paths", o.paths, "simulation paths");
    sub->add_option("--steps", o.steps, "simulation horizon in grid steps");
    sub->add_option("--fine-factor", o.fine_factor, "sub-steps per grid step");
    sub->add_option("--checkpoints", o.checkpoints, "checkpoint steps")->delimiter(',');
  }
  CLI11_PARSE(app, argc, argv);
  for (const auto& [name, help] : commands)
    if (app.got_subcommand(name)) return execute(name, o);
  return 2;
}
