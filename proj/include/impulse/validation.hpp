#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace impulse {

struct Check {
  std::string name;
  bool passed = true;
  std::string detail;
};

/// Pass/fail record for a set of model assumptions. Never throws; callers decide.
struct ValidationReport {
  std::vector<Check> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  void add(std::string name, bool passed, std::string detail = {}) {
    checks.push_back({std::move(name), passed, std::move(detail)});
  }
};

}  // namespace impulse
