#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "finsler/audit.hpp"
#include "finsler/error.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/parallel.hpp"
#include "finsler/verification.hpp"
#include "finsler/version.hpp"
#include "runner.hpp"
#include "scenario.hpp"

namespace {

using finslerflow::json;
using finsler::ValidationError;
using finsler::Vec;

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(finslerflow::number(item == "inf" || item == "-inf" ? json(item) : json(std::stod(item)), what));
    } catch (const std::invalid_argument&) {
      throw ValidationError("expected comma-separated numbers", what);
    }
  }
  if (out.empty()) throw ValidationError("expected comma-separated numbers", what);
  return out;
}

Vec parse_vec(const std::string& text, int dim, const std::string& what) {
  const auto v = parse_list(text, what);
  if (static_cast<int>(v.size()) != dim) throw ValidationError("expected " + std::to_string(dim) + " components", what);
  return Eigen::Map<const Vec>(v.data(), dim);
}

/// Structure given either by a scenario file or by inline flags.
struct StructureFlags {
  std::string scenario;
  std::string family = "euclidean";
  int dim = 2;
  std::string periods = "inf";
  double epsilon = 0.1;
  std::string b;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario, "Scenario file (.toml or .json) providing the structure");
    app->add_option("--family", family, "euclidean | quartic | randers")->capture_default_str();
    app->add_option("--dim", dim, "Dimension")->capture_default_str();
    app->add_option("--periods", periods, "inf, one period, or comma-separated periods")->capture_default_str();
    app->add_option("--epsilon", epsilon, "Quartic Minkowski parameter")->capture_default_str();
    app->add_option("--b", b, "Constant Randers one-form, comma-separated");
  }

  json document(std::uint64_t seed_override, bool has_seed) const {
    if (!scenario.empty()) {
      json doc = finslerflow::load_document(scenario);
      if (has_seed) doc["seed"] = seed_override;
      return doc;
    }
    json s = {{"family", family}, {"dim", dim}};
    if (periods == "inf") {
      s["periods"] = "inf";
    } else {
      const auto p = parse_list(periods, "--periods");
      s["periods"] = p.size() == 1 ? json(p[0]) : json(p);
    }
    if (family == "quartic") s["epsilon"] = epsilon;
    if (family == "randers") {
      if (b.empty()) throw ValidationError("randers needs --b", "--b");
      s["b"] = parse_list(b, "--b");
    }
    json doc = {{"name", "inline"}, {"structure", s}, {"grid", {{"nodes", 16}}}};
    if (s["periods"] == "inf") {
      json lo = json::array(), hi = json::array();
      for (int i = 0; i < dim; ++i) {
        lo.push_back(-1.0);
        hi.push_back(1.0);
      }
      doc["grid"] = {{"nodes", 16}, {"lo", lo}, {"hi", hi}};
    }
    if (has_seed) doc["seed"] = seed_override;
    return doc;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finslerflow: weighted Finsler heat flow and curvature-dimension checks"};
  app.set_version_flag("--version", std::string(finsler::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  int workers = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool no_cache = false;
  double tolerance_scale = 1.0;
  bool quiet = false;
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--workers", workers, "Worker threads (0: default)")->envname("FINSLERFLOW_WORKERS");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  app.add_flag("--no-cache", no_cache, "Do not read or write distance-table sidecars");
  app.add_option("--tolerance-scale", tolerance_scale, "Multiplier applied to every check tolerance")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "Do not print report tables");

  std::string scenario_file;
  auto* run = app.add_subcommand("run", "Audit, solve and verify a scenario");
  run->add_option("--scenario,scenario", scenario_file, "Scenario file")->required();

  StructureFlags audit_flags;
  int audit_samples = 0;
  auto* audit = app.add_subcommand("audit", "Audit a structure for positivity and strong convexity");
  audit_flags.add(audit);
  audit->add_option("--samples", audit_samples, "Sample count (default: scenario value or 1000)");

  StructureFlags geo_flags;
  std::string geo_from, geo_velocity;
  double geo_time = 1.0;
  int geo_steps = 10;
  auto* geodesic = app.add_subcommand("geodesic", "Integrate a geodesic and print it as CSV");
  geo_flags.add(geodesic);
  geodesic->add_option("--from", geo_from, "Start point, comma-separated")->required();
  geodesic->add_option("--velocity", geo_velocity, "Initial velocity, comma-separated")->required();
  geodesic->add_option("--time", geo_time, "Final time")->capture_default_str();
  geodesic->add_option("--steps", geo_steps, "Output samples")->capture_default_str()->check(CLI::PositiveNumber);

  StructureFlags dist_flags;
  std::string dist_from, dist_to;
  auto* distance = app.add_subcommand("distance", "Forward and reverse distance between two points");
  dist_flags.add(distance);
  distance->add_option("--from", dist_from, "x, comma-separated")->required();
  distance->add_option("--to", dist_to, "y, comma-separated")->required();

  StructureFlags curv_flags;
  std::string curv_N = "inf";
  int curv_samples = 1000;
  auto* curvature = app.add_subcommand("curvature", "Sampled lower bound K_est of the weighted Ricci curvature");
  curv_flags.add(curvature);
  curvature->add_option("--N", curv_N, "Effective dimension, number or inf")->capture_default_str();
  curvature->add_option("--samples", curv_samples, "Sample count")->capture_default_str()->check(CLI::PositiveNumber);

  auto* heat = app.add_subcommand("heat", "Solve the heat flow of a scenario");
  heat->add_option("--scenario,scenario", scenario_file, "Scenario file")->required();

  std::string check_name;
  auto* verify = app.add_subcommand("verify", "Run one verification check of a scenario");
  verify->add_option("check", check_name, "Check name")->required();
  verify->add_option("--scenario", scenario_file, "Scenario file")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Regenerate text tables from JSON reports");
  report->add_option("--dir", report_dir, "Directory holding reports")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (workers > 0) finsler::set_worker_count(workers);
    const bool has_seed = seed_opt->count() > 0;

    auto load = [&](const std::string& file) {
      if (file.empty()) throw ValidationError("a scenario file is required", "--scenario");
      json doc = finslerflow::load_document(file);
      if (has_seed) doc["seed"] = seed;
      return finslerflow::parse_scenario(doc);
    };
    auto options = [&](const finslerflow::Scenario& sc) {
      finslerflow::RunOptions o;
      o.out = out_opt->count() ? out : (sc.output.empty() ? std::string("out") : sc.output);
      o.use_cache = !no_cache;
      o.tolerance_scale = tolerance_scale;
      o.quiet = quiet;
      return o;
    };

    if (*run) {
      auto sc = load(scenario_file);
      auto o = options(sc);
      return finslerflow::Runner(sc, o).run();
    }
    if (*heat) {
      auto sc = load(scenario_file);
      auto o = options(sc);
      return finslerflow::Runner(sc, o).solve_only();
    }
    if (*verify) {
      if (!finslerflow::is_check_name(check_name)) {
        std::cerr << "error: unknown check '" << check_name << "'; available checks:\n";
        for (const auto& n : finslerflow::check_names()) std::cerr << "  " << n << '\n';
        return 2;
      }
      auto sc = load(scenario_file);
      auto o = options(sc);
      return finslerflow::Runner(sc, o).verify(check_name);
    }
    if (*report) {
      std::cout << finslerflow::render_reports(report_dir);
      return 0;
    }
    if (*audit) {
      json doc = audit_flags.document(seed, has_seed);
      if (audit_samples > 0) doc["audit"] = {{"samples", audit_samples}};
      doc.erase("checks");
      doc.erase("solver");
      doc.erase("initial");
      auto sc = finslerflow::parse_scenario(doc);
      auto o = options(sc);
      return finslerflow::Runner(sc, o).audit_only();
    }

    StructureFlags& sf = *geodesic ? geo_flags : *distance ? dist_flags : curv_flags;
    const json doc = sf.document(seed, has_seed);
    if (!doc.contains("structure")) throw ValidationError("missing", "structure");
    const finsler::FinslerStructure fs = finsler::structure_from_json(doc.at("structure"));
    const int n = fs.dim();

    if (*geodesic) {
      const Vec x = parse_vec(geo_from, n, "--from"), v = parse_vec(geo_velocity, n, "--velocity");
      const auto path = finsler::integrate_geodesic(fs, x, v, geo_time, geo_steps);
      std::printf("# tool_version %s\n# structure_hash %s\n# speed_drift %.3e\nt", finsler::kVersion,
                  fs.hash_hex().c_str(), path.speed_drift);
      for (int i = 0; i < n; ++i) std::printf(",x%d", i + 1);
      for (int i = 0; i < n; ++i) std::printf(",v%d", i + 1);
      std::printf("\n");
      for (const auto& s : path.samples) {
        std::printf("%.17g", s.t);
        for (int i = 0; i < n; ++i) std::printf(",%.17g", s.x(i));
        for (int i = 0; i < n; ++i) std::printf(",%.17g", s.xdot(i));
        std::printf("\n");
      }
      return 0;
    }
    if (*distance) {
      const Vec x = parse_vec(dist_from, n, "--from"), y = parse_vec(dist_to, n, "--to");
      const auto fwd = finsler::distance_detail(fs, x, y);
      const auto rev = finsler::distance_detail(fs, y, x);
      std::printf("forward %.12g (%s)\nreverse %.12g (%s)\n", fwd.value, finsler::to_string(fwd.status).c_str(),
                  rev.value, finsler::to_string(rev.status).c_str());
      return 0;
    }
    if (*curvature) {
      const double N = finslerflow::parse_dimension(json(curv_N == "inf" ? json("inf") : json(std::stod(curv_N))), "--N");
      const auto est = finsler::ricci_lower_bound(fs, N, curv_samples, has_seed ? seed : 1);
      if (!quiet) std::cout << est.report.to_text();
      std::printf("K_est %.12g\n", est.K);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
