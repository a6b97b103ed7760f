#pragma once

// JSON scenario files. Loading never throws on bad input; every problem comes back as a
// Diagnostic with a code, a JSON-pointer location and a message.
//
//   {
//     "name": "...",
//     "states": {"n": 2, "labels": [...], "coords": [[...]], "impulse_targets": [0, 1]},
//     "kernel": [[...]], "h": 1.0                 | "generator": [[...]], "h_ladder": [...], "h": ...
//     "g": [...],
//     "c": [[...]] (|E| x |U|)                    | "metric_cost": {"h_table": [[d, v], ...], "c0": ...}
//     "c0": ...,
//     "discount": {"family": "hyperbolic", "h_beta": 1, "alpha": 1} | {"family": "constant"}
//               | {"family": "tabulated", "points": [[t, b], ...]},
//     "solver": {"tol": 1e-10, "tie_tol": 1e-9, "K": 4096, "max_iterations": 1000000},
//     "simulation": {"paths": ..., "steps": ..., "seed": ..., "fine_factor": ..., "checkpoints": [...]},
//     "experiments": ["solve", ...]
//   }

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "impulse/costs.hpp"
#include "impulse/discounting.hpp"
#include "impulse/errors.hpp"
#include "impulse/model.hpp"
#include "impulse/montecarlo.hpp"
#include "impulse/process.hpp"

namespace impulse {

using json = nlohmann::json;

/// code: "io", "parse", "schema", "shape", or the violated assumption "A1" (discount),
/// "A2" (costs), "A4" (ergodicity).
struct Diagnostic {
  std::string code;
  std::string location;
  std::string message;
  std::size_t line = 0;    // parse errors only
  std::size_t column = 0;
};

struct SolverConfig {
  double tol = 1e-10;
  double tie_tol = 1e-9;
  std::size_t K = 4096;
  std::size_t max_iterations = 1'000'000;
};

inline const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> ids{"solve", "solve-discounted", "oracle", "equivalence",
                                            "refine", "simulate"};
  return ids;
}

struct Scenario {
  std::string name;
  StateSpace states;
  std::optional<Kernel> kernel;
  std::optional<Generator> generator;
  std::vector<double> h_ladder;
  double h = 1.0;  // working grid step
  CostModel costs;
  DiscountSpec discount = DiscountSpec::constant();
  SolverConfig solver;
  SimConfig simulation;
  std::vector<std::string> experiments;
  json canonical;       // the parsed document, keys sorted
  std::string digest;   // sha256 of canonical.dump()
  ValidationReport validation;
  double contraction = 1.0;

  ImpulseModel model() const {
    if (kernel) return ImpulseModel::make(states, *kernel, costs, generator);
    return ImpulseModel::make(states, kernel_from_generator(*generator, h), costs, generator);
  }
};

struct LoadResult {
  std::optional<Scenario> scenario;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return scenario.has_value() && diagnostics.empty(); }
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

namespace detail {

inline void line_column(const std::string& text, std::size_t offset, std::size_t& line, std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

inline Matrix matrix_from_json(const json& j) {
  return Matrix::from_rows(j.get<std::vector<std::vector<double>>>());
}

class ScenarioReader {
 public:
  explicit ScenarioReader(std::vector<Diagnostic>& diags) : diags_(diags) {}

  void error(std::string code, std::string location, std::string message) {
    diags_.push_back({std::move(code), std::move(location), std::move(message)});
  }

  // Runs f; any exception becomes a diagnostic at `location`. Returns false on failure.
  template <typename F>
  bool guard(const std::string& code, const std::string& location, F&& f) {
    try {
      f();
      return true;
    } catch (const ShapeError& e) {
      error("shape", location, e.what());
    } catch (const json::exception& e) {
      error("schema", location, e.what());
    } catch (const std::exception& e) {
      error(code, location, e.what());
    }
    return false;
  }

 private:
  std::vector<Diagnostic>& diags_;
};

}  // namespace detail

/// Parses and validates a scenario document.
inline LoadResult parse_scenario(const std::string& text) {
  LoadResult result;
  auto& diags = result.diagnostics;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    Diagnostic d{"parse", "", e.what()};
    detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0, d.line, d.column);
    d.location = "line " + std::to_string(d.line) + ", column " + std::to_string(d.column);
    diags.push_back(std::move(d));
    return result;
  }
  if (!doc.is_object()) {
    diags.push_back({"schema", "", "scenario must be a JSON object"});
    return result;
  }

  detail::ScenarioReader r(diags);
  Scenario s;
  s.canonical = doc;
  s.digest = sha256_hex(doc.dump());
  s.name = doc.value("name", std::string("unnamed"));

  // States.
  bool states_ok = r.guard("schema", "/states", [&] {
    const json& st = doc.at("states");
    std::vector<std::string> labels = st.value("labels", std::vector<std::string>{});
    std::size_t n = st.contains("n") ? st.at("n").get<std::size_t>() : labels.size();
    std::vector<std::vector<double>> coords = st.value("coords", std::vector<std::vector<double>>{});
    if (n == 0 && !coords.empty()) n = coords.size();
    const auto targets = st.at("impulse_targets").get<std::vector<std::size_t>>();
    s.states = StateSpace::make(n, targets, labels, coords);
  });
  if (!states_ok) return result;
  const std::size_t n = s.states.size();

  // Dynamics.
  const bool has_kernel = doc.contains("kernel");
  const bool has_generator = doc.contains("generator");
  if (has_kernel == has_generator) {
    r.error("schema", "", "exactly one of \"kernel\" and \"generator\" must be present");
  } else if (has_kernel) {
    r.guard("schema", "/kernel", [&] {
      const double h = doc.at("h").get<double>();
      s.kernel = Kernel::make(h, detail::matrix_from_json(doc.at("kernel")));
      if (s.kernel->size() != n) throw ShapeError("kernel is not |E| x |E|");
      s.h = h;
    });
  } else {
    r.guard("schema", "/generator", [&] {
      s.generator = Generator::make(detail::matrix_from_json(doc.at("generator")));
      if (s.generator->size() != n) throw ShapeError("generator is not |E| x |E|");
    });
    r.guard("schema", "/h_ladder", [&] {
      s.h_ladder = doc.at("h_ladder").get<std::vector<double>>();
      if (s.h_ladder.empty()) throw DomainError("h_ladder must be nonempty");
      for (std::size_t i = 0; i < s.h_ladder.size(); ++i) {
        if (!(s.h_ladder[i] > 0.0)) throw DomainError("h_ladder entries must be positive");
        if (i > 0 && !(s.h_ladder[i] < s.h_ladder[i - 1]))
          throw DomainError("h_ladder must be strictly decreasing");
      }
      s.h = doc.contains("h") ? doc.at("h").get<double>() : s.h_ladder.front();
      if (!(s.h > 0.0)) throw DomainError("h must be positive");
    });
  }

  // Costs.
  r.guard("A2", "/g", [&] {
    s.costs.running = doc.at("g").get<std::vector<double>>();
    if (s.costs.running.size() != n) throw ShapeError("g must have one entry per state");
  });
  if (doc.contains("c") == doc.contains("metric_cost")) {
    r.error("schema", "", "exactly one of \"c\" and \"metric_cost\" must be present");
  } else if (doc.contains("c")) {
    r.guard("A2", "/c", [&] {
      s.costs.shift = detail::matrix_from_json(doc.at("c"));
      if (s.costs.shift.rows() != n || s.costs.shift.cols() != s.states.targets().size())
        throw ShapeError("c must be |E| x |U|");
      double tightest = INFINITY;
      for (double v : s.costs.shift.data()) tightest = std::min(tightest, v);
      s.costs.c0 = doc.contains("c0") ? doc.at("c0").get<double>() : tightest;
    });
  } else {
    r.guard("A2", "/metric_cost", [&] {
      const json& mc = doc.at("metric_cost");
      const auto table = SubadditiveTable::make(mc.at("h_table").get<std::vector<std::pair<double, double>>>());
      s.costs = metric_cost(s.states, s.costs.running, table, mc.at("c0").get<double>());
    });
  }

  // Discount.
  r.guard("A1", "/discount", [&] {
    if (!doc.contains("discount")) {
      s.discount = DiscountSpec::constant();
      return;
    }
    const json& d = doc.at("discount");
    const std::string family = d.at("family").get<std::string>();
    if (family == "constant") {
      s.discount = DiscountSpec::constant();
    } else if (family == "hyperbolic") {
      s.discount = DiscountSpec::hyperbolic(d.value("h_beta", 1.0), d.value("alpha", 1.0));
    } else if (family == "tabulated") {
      s.discount = DiscountSpec::tabulated(d.at("points").get<std::vector<std::pair<double, double>>>());
    } else {
      r.error("schema", "/discount/family", "unknown discount family \"" + family + "\"");
    }
  });

  // Solver and simulation settings.
  r.guard("schema", "/solver", [&] {
    if (!doc.contains("solver")) return;
    const json& j = doc.at("solver");
    s.solver.tol = j.value("tol", s.solver.tol);
    s.solver.tie_tol = j.value("tie_tol", s.solver.tie_tol);
    s.solver.K = j.value("K", s.solver.K);
    s.solver.max_iterations = j.value("max_iterations", s.solver.max_iterations);
    if (!(s.solver.tol > 0.0) || !(s.solver.tie_tol > 0.0) || s.solver.K == 0)
      throw DomainError("solver tolerances and K must be positive");
  });
  r.guard("schema", "/simulation", [&] {
    if (!doc.contains("simulation")) return;
    const json& j = doc.at("simulation");
    s.simulation.n_paths = j.value("paths", s.simulation.n_paths);
    s.simulation.horizon_steps = j.value("steps", s.simulation.horizon_steps);
    s.simulation.seed = j.value("seed", s.simulation.seed);
    s.simulation.fine_factor = j.value("fine_factor", s.simulation.fine_factor);
    s.simulation.initial_state = j.value("initial_state", s.simulation.initial_state);
    s.simulation.checkpoints = j.value("checkpoints", s.simulation.checkpoints);
    resolve_checkpoints(s.simulation);
    if (s.simulation.initial_state >= n) throw DomainError("initial_state out of range");
  });
  r.guard("schema", "/experiments", [&] {
    s.experiments = doc.value("experiments", std::vector<std::string>{});
    for (const auto& e : s.experiments)
      if (std::find(known_experiments().begin(), known_experiments().end(), e) == known_experiments().end())
        throw DomainError("unknown experiment \"" + e + "\"");
  });
  if (!diags.empty()) return result;

  // Assumption checks on the assembled model.
  {
    const CostValidation cv = validate_costs(s.costs, s.states);
    for (const auto& c : cv.checks) {
      s.validation.add("(A2) " + c.name, c.passed, c.detail);
      if (!c.passed) r.error("A2", doc.contains("c") ? "/c" : "/metric_cost", c.name + ": " + c.detail);
    }
  }
  {
    std::vector<double> grid;
    const double horizon = static_cast<double>(s.solver.K) * s.h;
    for (double t = 0.0; t <= std::min(horizon, s.discount.domain_end()); t = t == 0.0 ? s.h / 4 : 2.0 * t)
      grid.push_back(t);
    const DiscountValidation dv = validate_discount(s.discount, grid);
    for (const auto& c : dv.checks) {
      s.validation.add("(A1) " + c.name, c.passed, c.detail);
      if (!c.passed) r.error("A1", "/discount", c.name + ": " + c.detail);
    }
  }
  if (diags.empty()) {
    r.guard("A4", s.kernel ? "/kernel" : "/generator", [&] {
      const ImpulseModel m = s.model();
      s.contraction = m.contraction();
      std::ostringstream os;
      os << "Lambda_h = " << s.contraction << " at h = " << s.h;
      const bool ergodic = s.contraction < 1.0;
      s.validation.add("(A4) Doeblin coefficient < 1", ergodic, os.str());
      if (!ergodic) throw ErgodicityError("kernel is not uniformly ergodic: " + os.str(), s.contraction);
    });
  }
  if (!diags.empty()) return result;
  result.scenario = std::move(s);
  return result;
}

inline LoadResult load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    LoadResult r;
    r.diagnostics.push_back({"io", path, "cannot open scenario file"});
    return r;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace impulse
