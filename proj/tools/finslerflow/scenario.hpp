#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/data.hpp"
#include "finsler/grid.hpp"
#include "finsler/heat.hpp"
#include "finsler/structure.hpp"

namespace finslerflow {

using finsler::FinslerStructure;
using finsler::Grid;
using finsler::GridField;
using json = nlohmann::json;

struct SolverSpec {
  double T = 0.0;
  double tau = 0.0;
  finsler::Scheme scheme = finsler::Scheme::explicit_euler;
  std::vector<double> snapshots;
  double time_origin = 0.0;
};

struct CheckSpec {
  std::string name;
  json params = json::object();
  std::string path;  // e.g. checks[2]
};

/// A validated scenario. `source` is the normalized document the hash is
/// taken over.
struct Scenario {
  std::string name;
  json source;
  std::uint64_t seed = 1;
  json structure_spec;
  json grid_spec;
  std::optional<json> initial_spec;
  std::optional<SolverSpec> solver;
  int audit_samples = 1000;
  std::vector<CheckSpec> checks;
  std::string output;

  FinslerStructure structure() const;
  Grid grid(const FinslerStructure& fs) const;
  /// Same grid with nodes per axis scaled by `factor`.
  Grid grid(const FinslerStructure& fs, double factor) const;
  std::string hash() const;
  bool needs_trajectory() const;
};

const std::vector<std::string>& check_names();
bool is_check_name(const std::string& name);

/// Reads a `.toml` or `.json` document (by extension) without validating.
json load_document(const std::filesystem::path& file);
Scenario load_scenario(const std::filesystem::path& file);
Scenario parse_scenario(const json& doc);

/// TOML text to the equivalent JSON document; non-finite floats become
/// the strings "inf", "-inf", "nan".
json toml_to_json(const std::string& text, const std::string& source_name);

/// Datum from a preset description (kind gaussian_bump | heat_kernel | sine |
/// random_smooth | constant). `path` prefixes validation errors.
finsler::Datum make_datum(const FinslerStructure& fs, const json& spec, const std::string& path,
                          std::uint64_t default_seed);

/// Number or "inf".
double parse_dimension(const json& j, const std::string& path);

/// Reads a JSON number or the strings "inf"/"-inf".
double number(const json& j, const std::string& path);

}  // namespace finslerflow
