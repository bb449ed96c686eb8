#pragma once

// Structured result of an audit or verification check.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace finsler {

struct Stats {
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q95 = 0.0;

  static Stats of(std::vector<double> values);
  nlohmann::json to_json() const;
  static Stats from_json(const nlohmann::json& j);
};

class Report {
 public:
  Report() = default;
  Report(std::string check, std::string structure_hash) : check(std::move(check)), structure_hash(std::move(structure_hash)) {}

  std::string check;
  std::string structure_hash;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json resolution = nlohmann::json::object();
  std::map<std::string, Stats> stats;
  nlohmann::json metrics = nlohmann::json::object();
  /// Signed tolerance: a slack below −tolerance (or a residual above it)
  /// counts as a violation.
  double tolerance = 0.0;
  std::size_t violations = 0;
  /// Hard failure independent of the violation count (e.g. a counterexample).
  bool failed = false;
  bool empty = false;
  std::vector<std::string> notes;

  bool passed() const { return !failed && violations == 0; }

  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  /// Aligned plain-text table.
  std::string to_text() const;
};

}  // namespace finsler
