#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "finsler/geodesic.hpp"
#include "finsler/heat.hpp"
#include "finsler/report.hpp"
#include "scenario.hpp"

namespace finslerflow {

struct RunOptions {
  std::filesystem::path out;
  bool use_cache = true;
  double tolerance_scale = 1.0;
  bool quiet = false;
};

/// Structure, grid and lazily computed trajectory and distance tables for
/// one resolution of a scenario.
class Context {
 public:
  Context(const Scenario& sc, const RunOptions& opt, double grid_factor = 1.0);

  const Scenario& scenario() const { return *sc_; }
  const RunOptions& options() const { return *opt_; }
  const FinslerStructure& structure() const { return wg_.structure(); }
  const finsler::WeightedGrid& weighted_grid() const { return wg_; }
  const Grid& grid() const { return wg_.grid(); }
  double grid_factor() const { return factor_; }

  GridField initial() const;
  /// Snapshot times that must be stored in addition to the solver's own.
  void require_time(double t) { extra_times_.push_back(t); }
  const finsler::Trajectory& trajectory();
  bool has_trajectory() const { return traj_.has_value(); }
  /// Table for F, or for the reverse structure.
  const finsler::DistanceTable& distances(bool reverse = false);
  /// Sampled K_est for the given N, memoized on (N, samples, seed).
  double K_estimate(double N, int samples, std::uint64_t seed);

 private:
  const Scenario* sc_;
  const RunOptions* opt_;
  double factor_;
  finsler::WeightedGrid wg_;
  std::vector<double> extra_times_;
  std::optional<finsler::Trajectory> traj_;
  std::optional<finsler::DistanceTable> table_, reverse_table_;
  std::map<std::tuple<double, int, std::uint64_t>, double> K_;
};

/// A check whose parameters have been validated; `run` does the work.
struct PreparedCheck {
  CheckSpec spec;
  bool compare_refinement = false;
  std::vector<double> times;  // snapshot times the check reads
  std::function<std::vector<finsler::Report>(Context&)> run;
};

PreparedCheck prepare_check(const CheckSpec& spec, const Scenario& sc, const FinslerStructure& fs,
                            const RunOptions& opt);

/// Orchestrates audit → solve → verify and writes the artifacts under
/// opt.out. Return values are process exit codes (0 ok, 1 check failure).
class Runner {
 public:
  Runner(Scenario sc, RunOptions opt);

  int run();
  int audit_only();
  int solve_only();
  /// One check: the scenario's entry of that name when present, else defaults.
  int verify(const std::string& check);

 private:
  bool audit(Context& ctx);
  void solve(Context& ctx);
  void execute(const std::vector<PreparedCheck>& checks, Context& ctx);
  void emit(finsler::Report rep, const std::string& stem);
  void write_scenario(const Context& ctx);
  void write_summary(int exit_code);
  json stamp() const;

  Scenario sc_;
  RunOptions opt_;
  int counter_ = 0;
  json summary_ = json::array();
  bool all_passed_ = true;
};

/// Re-reads every report JSON under dir (recursively, sorted by path),
/// writes report.txt there and returns the text.
std::string render_reports(const std::filesystem::path& dir);

/// JSON document for one report, stamped with tool version and scenario hash.
json stamped_report(const finsler::Report& rep, const std::string& scenario_hash);

}  // namespace finslerflow
