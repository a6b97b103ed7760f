#pragma once

// Experiment pipelines over a loaded scenario and the report they produce.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "impulse/bellman.hpp"
#include "impulse/discounting.hpp"
#include "impulse/montecarlo.hpp"
#include "impulse/scenario.hpp"
#include "impulse/stationary.hpp"
#include "impulse/validation.hpp"

namespace impulse {

inline constexpr const char* kLibraryVersion = "0.1.0";

inline constexpr double kOracleTolerance = 1e-6;
inline constexpr double kDriftTolerance = 1e-8;
inline constexpr double kEquivalenceTolerance = 1e-2;
inline constexpr double kRefineTolerance = 1e-2;
inline constexpr double kSimulationFloor = 2e-2;
inline constexpr double kConditioningGuard = 1e-6;

struct CsvTable {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt(std::size_t v) { return std::to_string(v); }

struct ExperimentResult {
  std::string id;
  std::string claim;
  ValidationReport checks;
  json results = json::object();
  std::vector<CsvTable> tables;
  std::string error;
  std::vector<std::string> warnings;
  double wall_clock_seconds = 0.0;

  bool passed() const { return error.empty() && checks.ok(); }
};

struct RunReport {
  std::string scenario;
  std::string input_digest;
  ValidationReport validation;
  std::vector<ExperimentResult> experiments;
  double wall_clock_seconds = 0.0;

  bool passed() const {
    return validation.ok() &&
           std::all_of(experiments.begin(), experiments.end(), [](const auto& e) { return e.passed(); });
  }

  json to_json() const {
    auto checks_json = [](const ValidationReport& r) {
      json a = json::array();
      for (const auto& c : r.checks) a.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
      return a;
    };
    json j;
    j["scenario"] = scenario;
    j["input_digest"] = input_digest;
    j["versions"] = {{"library", kLibraryVersion}, {"compiler", __VERSION__}, {"cxx", __cplusplus}};
    j["validation"] = checks_json(validation);
    j["experiments"] = json::array();
    for (const auto& e : experiments) {
      json x{{"id", e.id}, {"claim", e.claim}, {"passed", e.passed()}, {"checks", checks_json(e.checks)},
             {"results", e.results}, {"wall_clock_seconds", e.wall_clock_seconds}};
      if (!e.error.empty()) x["error"] = e.error;
      if (!e.warnings.empty()) x["warnings"] = e.warnings;
      std::vector<std::string> files;
      for (const auto& t : e.tables) files.push_back(t.name + ".csv");
      x["tables"] = files;
      j["experiments"].push_back(std::move(x));
    }
    j["passed"] = passed();
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
  }

  /// report.json plus one CSV per table.
  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "report.json") << to_json().dump(2) << "\n";
    for (const auto& e : experiments) {
      for (const auto& t : e.tables) {
        std::ofstream out(dir / (t.name + ".csv"));
        for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
        out << "\n";
        for (const auto& row : t.rows) {
          for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
          out << "\n";
        }
      }
    }
  }
};

inline json strategy_json(const StationaryStrategy& s) {
  json psi = json::object();
  for (const auto& [x, t] : s.shift_map()) psi[std::to_string(x)] = t;
  return {{"D", s.continuation_set()}, {"psi", psi}};
}

inline std::string strategy_string(const StationaryStrategy& s) {
  std::string out = "D={";
  const auto d = s.continuation_set();
  for (std::size_t i = 0; i < d.size(); ++i) out += (i ? " " : "") + std::to_string(d[i]);
  out += "} psi={";
  bool first = true;
  for (const auto& [x, t] : s.shift_map()) {
    out += (first ? "" : " ") + std::to_string(x) + "->" + std::to_string(t);
    first = false;
  }
  return out + "}";
}

struct ContractionCertificate {
  bool ratios_ok = true;
  bool iterations_ok = true;
  double worst_ratio = 0.0;       // max span_{t+1} / span_t
  std::size_t iteration_bound = 0;
};

/// span_{t+1} <= Lambda span_t (1 + 1e-12) and iterations <= ceil(log(tol/span_0)/log Lambda) + 2.
inline ContractionCertificate certify_contraction(const BellmanSolution& sol, double tol) {
  ContractionCertificate cert;
  const double lambda = sol.contraction_factor;
  for (std::size_t t = 0; t + 1 < sol.spans.size(); ++t) {
    if (sol.spans[t] > 0.0) cert.worst_ratio = std::max(cert.worst_ratio, sol.spans[t + 1] / sol.spans[t]);
    if (sol.spans[t + 1] > lambda * sol.spans[t] * (1.0 + 1e-12)) cert.ratios_ok = false;
  }
  double steps = 0.0;
  const double span0 = sol.spans.empty() ? 0.0 : sol.spans.front();
  if (lambda > 0.0 && span0 > tol) steps = std::ceil(std::log(tol / span0) / std::log(lambda));
  cert.iteration_bound = static_cast<std::size_t>(steps) + 2;
  cert.iterations_ok = sol.iterations <= cert.iteration_bound;
  return cert;
}

struct RefinementRow {
  double h = 0.0;
  double contraction = 0.0;
  double lambda = 0.0;
  double residual = 0.0;  // |lambda - lambda_h| <= residual
  double weighted_lambda_d = 0.0;
  std::size_t horizon = 0;  // K_h, steps covering the same physical horizon at every rung
  std::size_t iterations = 0;
  std::string strategy;
};

struct RefinementTable {
  std::vector<RefinementRow> rows;
  std::vector<double> gaps;  // |lambda_{i+1} - lambda_i|
  /// gap_{i+1} <= gap_i, where two gaps that differ by less than the certified error of the
  /// lambdas involved are not ordered.
  bool gaps_non_increasing = true;
  double max_discounted_gap = 0.0;  // max_i |weighted_lambda_d - lambda| over rungs
  std::vector<std::string> warnings;
};

/// lambda_h along a decreasing ladder, each rung solved on exp(hQ). The discounted column uses
/// K_h = round(K h_0 / h) steps so every rung covers the physical horizon K h_0.
inline RefinementTable refine_lambda(const ImpulseModel& base, const DiscountSpec& beta,
                                     const std::vector<double>& ladder, const SolverConfig& cfg) {
  if (ladder.size() < 3) throw DomainError("refinement needs at least three ladder entries");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i] < ladder[i - 1])) throw DomainError("h ladder must be strictly decreasing");
  RefinementTable table;
  SolverOptions opts{cfg.tol, cfg.max_iterations};
  for (double h : ladder) {
    const ImpulseModel m = base.at_step(h);
    RefinementRow row;
    row.h = h;
    row.contraction = m.contraction();
    if (row.contraction > 1.0 - kConditioningGuard) {
      table.warnings.push_back("ill-conditioned rung h=" + fmt(h) + ": Lambda_h=" + fmt(row.contraction));
    }
    const BellmanSolution sol = solve_undiscounted(m, opts);
    row.lambda = sol.lambda;
    row.residual = sol.residual;
    row.iterations = sol.iterations;
    row.horizon = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.K) * ladder.front() / h));
    const PhiSequence phi = compute_phi(beta, h, row.horizon + discounted_buffer(m, cfg.tol));
    const DiscountedBellmanSolution ds = solve_discounted(m, phi, row.horizon, cfg.tol);
    row.weighted_lambda_d = weighted_lambda(ds, phi, row.horizon);
    try {
      row.strategy = strategy_string(extract_strategy(sol, m, cfg.tie_tol));
    } catch (const StrategyError& e) {
      row.strategy = std::string("degenerate: ") + e.what();
    }
    table.max_discounted_gap = std::max(table.max_discounted_gap, std::abs(row.weighted_lambda_d - row.lambda));
    table.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i)
    table.gaps.push_back(std::abs(table.rows[i].lambda - table.rows[i - 1].lambda));
  for (std::size_t i = 1; i < table.gaps.size(); ++i) {
    const auto& rows = table.rows;
    const double resolution = rows[i - 1].residual + 2.0 * rows[i].residual + rows[i + 1].residual;
    if (table.gaps[i] > table.gaps[i - 1] + resolution) table.gaps_non_increasing = false;
  }
  return table;
}

namespace detail {

struct Shared {
  const Scenario& scenario;
  ImpulseModel model;
  std::optional<BellmanSolution> solution;
  std::optional<StationaryStrategy> strategy;

  SolverOptions options() const { return {scenario.solver.tol, scenario.solver.max_iterations}; }

  const BellmanSolution& solve() {
    if (!solution) solution = solve_undiscounted(model, options());
    return *solution;
  }
  const StationaryStrategy& optimal_strategy() {
    if (!strategy) strategy = extract_strategy(solve(), model, scenario.solver.tie_tol);
    return *strategy;
  }
};

inline void run_solve(Shared& s, ExperimentResult& r) {
  r.claim = "relative value iteration contracts in span at rate Lambda_h and its limit (w, lambda) "
            "solves the undiscounted Bellman equation; z_n is a submartingale, a martingale until the "
            "first impulse";
  const BellmanSolution& sol = s.solve();
  const double tol = s.scenario.solver.tol;
  r.checks.add("residual <= tol", sol.residual <= tol, fmt(sol.residual));
  const ContractionCertificate cert = certify_contraction(sol, tol);
  r.checks.add("span ratio <= Lambda_h", cert.ratios_ok,
               "worst " + fmt(cert.worst_ratio) + " vs " + fmt(sol.contraction_factor));
  r.checks.add("iterations <= contraction bound", cert.iterations_ok,
               fmt(sol.iterations) + " <= " + fmt(cert.iteration_bound));
  const DriftReport drift = check_martingale_drift(sol, s.model, kDriftTolerance, s.scenario.solver.tie_tol);
  r.checks.add("drift >= -1e-8", drift.min_drift >= -kDriftTolerance, fmt(drift.min_drift));
  r.checks.add("|drift| <= 1e-8 on D", drift.max_abs_continuation_drift <= kDriftTolerance,
               fmt(drift.max_abs_continuation_drift));
  const StationaryStrategy& strat = s.optimal_strategy();
  r.results = {{"lambda", sol.lambda},       {"w", sol.w},
               {"residual", sol.residual},   {"iterations", sol.iterations},
               {"contraction", sol.contraction_factor}, {"strategy", strategy_json(strat)}};
  CsvTable spans{"solve_spans", {"iteration", "span"}, {}};
  for (std::size_t t = 0; t < sol.spans.size(); ++t) spans.rows.push_back({fmt(t), fmt(sol.spans[t])});
  r.tables.push_back(std::move(spans));
}

inline void run_solve_discounted(Shared& s, ExperimentResult& r) {
  r.claim = "the time-dependent discounted Bellman equation has a solution (w^d, lambda^d) obtained by "
            "backward span contraction; its drift process is a submartingale";
  const auto& cfg = s.scenario.solver;
  const std::size_t K = cfg.K;
  const PhiSequence phi = compute_phi(s.scenario.discount, s.model.h(), K + discounted_buffer(s.model, cfg.tol) + 1);
  const DiscountedBellmanSolution ds = solve_discounted(s.model, phi, K, cfg.tol);
  const DriftReport drift = check_martingale_drift(ds, s.model, phi, kDriftTolerance, cfg.tie_tol);
  r.checks.add("residual <= tol", ds.residual <= cfg.tol, fmt(ds.residual));
  r.checks.add("truncation bound <= tol", ds.truncation_bound <= cfg.tol, fmt(ds.truncation_bound));
  r.checks.add("drift >= -1e-8", drift.min_drift >= -kDriftTolerance, fmt(drift.min_drift));
  r.checks.add("|drift| <= 1e-8 on D", drift.max_abs_continuation_drift <= kDriftTolerance,
               fmt(drift.max_abs_continuation_drift));
  const double wavg = weighted_lambda(ds, phi, K);
  r.results = {{"K", K},
               {"buffer", ds.buffer},
               {"residual", ds.residual},
               {"truncation_bound", ds.truncation_bound},
               {"weighted_lambda_d", wavg},
               {"lambda_d_first", ds.lambda.front()},
               {"lambda_d_last", ds.lambda.back()}};
  CsvTable t{"lambda_d", {"k", "phi", "lambda_d", "weighted_average"}, {}};
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    num += phi[k] * ds.lambda[k];
    den += phi[k];
    t.rows.push_back({fmt(k), fmt(phi[k]), fmt(ds.lambda[k]), fmt(num / den)});
  }
  r.tables.push_back(std::move(t));
}

inline void run_oracle(Shared& s, ExperimentResult& r) {
  r.claim = "the strategy extracted from the Bellman solution attains lambda_h, the minimum over all "
            "stationary exit-time strategies";
  const BellmanSolution& sol = s.solve();
  const OracleResult orc = brute_force_optimum(s.model, true);
  const double extracted = evaluate_undiscounted_exact(s.optimal_strategy(), s.model);
  r.checks.add("|lambda - lambda*| <= 1e-6", std::abs(sol.lambda - orc.lambda_star) <= kOracleTolerance,
               fmt(std::abs(sol.lambda - orc.lambda_star)));
  r.checks.add("extracted strategy is an argmin", std::abs(extracted - orc.lambda_star) <= kOracleTolerance,
               fmt(extracted) + " vs " + fmt(orc.lambda_star));
  r.results = {{"lambda", sol.lambda},
               {"lambda_star", orc.lambda_star},
               {"strategy_star", strategy_json(orc.strategy_star)},
               {"strategies_evaluated", orc.strategies_evaluated}};
  CsvTable t{"oracle_table", {"strategy", "value"}, {}};
  for (const auto& row : orc.table) t.rows.push_back({strategy_string(row.strategy), fmt(row.value)});
  r.tables.push_back(std::move(t));
}

inline void run_equivalence(Shared& s, ExperimentResult& r) {
  r.claim = "the optimal undiscounted grid strategy is also optimal for the discounted functional, "
            "and both functionals equal lambda_h under it";
  const auto& cfg = s.scenario.solver;
  const BellmanSolution& sol = s.solve();
  const StationaryStrategy& strat = s.optimal_strategy();
  const std::size_t K = cfg.K;
  const PhiSequence phi = compute_phi(s.scenario.discount, s.model.h(), K + discounted_buffer(s.model, cfg.tol) + 1);
  const DiscountedBellmanSolution ds = solve_discounted(s.model, phi, K, cfg.tol);
  const double wavg = weighted_lambda(ds, phi, K);
  const double undiscounted = evaluate_undiscounted_exact(strat, s.model);
  r.checks.add("|weighted lambda_d - lambda| <= 1e-2", std::abs(wavg - sol.lambda) <= kEquivalenceTolerance,
               fmt(std::abs(wavg - sol.lambda)));
  r.checks.add("|J_h(V) - lambda| <= 1e-6", std::abs(undiscounted - sol.lambda) <= kOracleTolerance,
               fmt(std::abs(undiscounted - sol.lambda)));
  CsvTable t{"equivalence", {"x0", "lambda_h", "undiscounted_exact", "discounted_exact", "weighted_lambda_d"}, {}};
  double worst = 0.0;
  json per_state = json::array();
  for (std::size_t x0 = 0; x0 < s.model.size(); ++x0) {
    const double disc = evaluate_discounted_exact(strat, s.model, phi, x0, K).value;
    worst = std::max(worst, std::abs(disc - sol.lambda));
    per_state.push_back(disc);
    t.rows.push_back({fmt(x0), fmt(sol.lambda), fmt(undiscounted), fmt(disc), fmt(wavg)});
  }
  r.checks.add("|J^d_h(V) - lambda| <= 1e-2 for every x0", worst <= kEquivalenceTolerance, fmt(worst));
  r.results = {{"lambda", sol.lambda},
               {"weighted_lambda_d", wavg},
               {"undiscounted_exact", undiscounted},
               {"discounted_exact", per_state},
               {"N", K}};
  r.tables.push_back(std::move(t));
}

inline void run_refine(Shared& s, ExperimentResult& r) {
  r.claim = "the grid optimal values lambda_h form a Cauchy sequence as h decreases and the discounted "
            "and undiscounted grid problems share their optimal value at every h";
  if (!s.scenario.generator) throw DomainError("refine needs a scenario with a generator");
  const RefinementTable table = refine_lambda(s.model, s.scenario.discount, s.scenario.h_ladder, s.scenario.solver);
  r.warnings = table.warnings;
  r.checks.add("gaps non-increasing", table.gaps_non_increasing);
  r.checks.add("final gap < 1e-2", table.gaps.empty() || table.gaps.back() < kRefineTolerance,
               table.gaps.empty() ? "" : fmt(table.gaps.back()));
  r.checks.add("|weighted lambda_d - lambda_h| <= 1e-2 at every rung", table.max_discounted_gap <= kRefineTolerance,
               fmt(table.max_discounted_gap));
  CsvTable t{"refinement",
             {"h", "contraction", "lambda_h", "residual", "weighted_lambda_d", "K_h", "gap", "strategy"}, {}};
  json rows = json::array();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string gap = i == 0 ? "" : fmt(table.gaps[i - 1]);
    t.rows.push_back({fmt(row.h), fmt(row.contraction), fmt(row.lambda), fmt(row.residual), fmt(row.weighted_lambda_d),
                      fmt(row.horizon), gap, "\"" + row.strategy + "\""});
    rows.push_back({{"h", row.h}, {"contraction", row.contraction}, {"lambda", row.lambda},
                    {"residual", row.residual}, {"weighted_lambda_d", row.weighted_lambda_d}, {"K", row.horizon},
                    {"iterations", row.iterations}, {"strategy", row.strategy}});
  }
  r.results = {{"rows", rows}, {"gaps", table.gaps}};
  r.tables.push_back(std::move(t));
}

inline json estimate_json(const FunctionalEstimate& e) {
  json cps = json::array();
  for (const auto& c : e.per_checkpoint) cps.push_back({{"step", c.step}, {"mean", c.mean}, {"std_error", c.std_error}});
  return {{"mean", e.mean}, {"std_error", e.std_error}, {"tail_sup", e.tail_sup}, {"checkpoints", cps}};
}

inline void run_simulate(Shared& s, ExperimentResult& r) {
  r.claim = "the optimal grid strategy is epsilon-optimal for the continuous-time undiscounted and "
            "discounted functionals";
  const BellmanSolution& sol = s.solve();
  const StationaryStrategy& strat = s.optimal_strategy();
  const SimConfig& cfg = s.scenario.simulation;
  const FunctionalEstimate u = simulate_undiscounted(strat, s.model, cfg);
  const FunctionalEstimate d = simulate_discounted(strat, s.model, s.scenario.discount, cfg);
  const FunctionalEstimate one = simulate_discounted(strat, s.model, DiscountSpec::constant(), cfg);
  const double band_u = std::max(3.0 * u.std_error, kSimulationFloor);
  const double band_d = std::max(3.0 * d.std_error, kSimulationFloor);
  r.checks.add("|J estimate - lambda| <= max(3 se, 2e-2)", std::abs(u.mean - sol.lambda) <= band_u,
               fmt(std::abs(u.mean - sol.lambda)) + " <= " + fmt(band_u));
  r.checks.add("|J^d estimate - lambda| <= max(3 se, 2e-2)", std::abs(d.mean - sol.lambda) <= band_d,
               fmt(std::abs(d.mean - sol.lambda)) + " <= " + fmt(band_d));
  r.checks.add("beta = 1 reproduces the undiscounted paths", one.path_values == u.path_values);
  r.results = {{"lambda", sol.lambda},
               {"paths", cfg.n_paths},
               {"steps", cfg.horizon_steps},
               {"seed", cfg.seed},
               {"fine_factor", cfg.fine_factor},
               {"undiscounted", estimate_json(u)},
               {"discounted", estimate_json(d)}};
  CsvTable t{"simulation", {"step", "undiscounted_mean", "undiscounted_se", "discounted_mean", "discounted_se"}, {}};
  for (std::size_t i = 0; i < u.per_checkpoint.size(); ++i) {
    const auto& a = u.per_checkpoint[i];
    const auto& b = d.per_checkpoint[i];
    t.rows.push_back({fmt(a.step), fmt(a.mean), fmt(a.std_error), fmt(b.mean), fmt(b.std_error)});
  }
  r.tables.push_back(std::move(t));
}

}  // namespace detail

/// Runs the requested experiments in dependency order. Module errors are caught and recorded
/// against the experiment that raised them.
inline RunReport run(const Scenario& scenario, const std::vector<std::string>& experiments) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = scenario.name;
  report.input_digest = scenario.digest;
  report.validation = scenario.validation;
  detail::Shared shared{scenario, scenario.model(), std::nullopt, std::nullopt};
  for (const std::string& id : known_experiments()) {
    if (std::find(experiments.begin(), experiments.end(), id) == experiments.end()) continue;
    ExperimentResult r;
    r.id = id;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if (id == "solve") detail::run_solve(shared, r);
      else if (id == "solve-discounted") detail::run_solve_discounted(shared, r);
      else if (id == "oracle") detail::run_oracle(shared, r);
      else if (id == "equivalence") detail::run_equivalence(shared, r);
      else if (id == "refine") detail::run_refine(shared, r);
      else if (id == "simulate") detail::run_simulate(shared, r);
    } catch (const std::exception& e) {
      r.error = "[" + id + "] " + e.what();
    }
    r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.experiments.push_back(std::move(r));
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Experiments a full report runs for this scenario: all of them, minus refine without a
/// generator and oracle beyond the enumeration guard.
inline std::vector<std::string> applicable_experiments(const Scenario& scenario) {
  std::vector<std::string> out;
  for (const auto& id : known_experiments()) {
    if (id == "refine" && (!scenario.generator || scenario.h_ladder.size() < 3)) continue;
    if (id == "oracle" && (scenario.states.size() > kOracleMaxStates ||
                           scenario.states.targets().size() > kOracleMaxTargets))
      continue;
    out.push_back(id);
  }
  return out;
}

}  // namespace impulse
