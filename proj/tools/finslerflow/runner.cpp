#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <tuple>

#include "finsler/audit.hpp"
#include "finsler/error.hpp"
#include "finsler/verification.hpp"
#include "finsler/version.hpp"

namespace finslerflow {

namespace fsys = std::filesystem;
using finsler::Report;
using finsler::ValidationError;
using finsler::Vec;

namespace {

void write_file(const fsys::path& file, const std::string& text) {
  if (file.has_parent_path()) fsys::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << text;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_cell(const json& v) {
  if (v.is_number()) return fmt(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

/// Rows of a JSON array of flat objects, columns in first-row key order.
std::string csv_of(const json& rows, const std::vector<std::string>& header) {
  std::ostringstream os;
  for (const auto& h : header) os << "# " << h << '\n';
  std::vector<std::string> cols;
  for (const auto& [k, v] : rows.at(0).items())
    if (!v.is_structured()) cols.push_back(k);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << csv_cell(r.value(cols[i], json()));
    os << '\n';
  }
  return os.str();
}

bool flag(const json& p, const char* key, bool def, const std::string& path) {
  if (!p.contains(key)) return def;
  if (!p.at(key).is_boolean()) throw ValidationError("expected true or false", path + "." + key);
  return p.at(key).get<bool>();
}

int integer(const json& p, const char* key, int def, int lo, const std::string& path) {
  if (!p.contains(key)) return def;
  if (!p.at(key).is_number_integer() || p.at(key).get<long long>() < lo)
    throw ValidationError("expected an integer >= " + std::to_string(lo), path + "." + key);
  return p.at(key).get<int>();
}

std::uint64_t seed_of(const json& p, std::uint64_t def, const std::string& path) {
  if (!p.contains("seed")) return def;
  if (!p.at("seed").is_number_integer() || p.at("seed").get<long long>() < 0)
    throw ValidationError("expected a nonnegative integer", path + ".seed");
  return p.at("seed").get<std::uint64_t>();
}

double real(const json& p, const char* key, double def, const std::string& path) {
  return p.contains(key) ? number(p.at(key), path + "." + key) : def;
}

/// K: "estimate" (sampled K_est, the default) or a number.
struct CurvatureSpec {
  bool estimate = true;
  double value = 0.0;
  int samples = 2000;
  std::uint64_t seed = 1;

  double resolve(Context& ctx, double N, Report& rep) const {
    const double K = estimate ? ctx.K_estimate(N, samples, seed) : value;
    rep.params["K_source"] = estimate ? "estimate" : "scenario";
    if (estimate) rep.params["K_samples"] = samples;
    return K;
  }
};

CurvatureSpec curvature_spec(const json& p, std::uint64_t seed, const std::string& path) {
  CurvatureSpec k;
  k.seed = seed;
  k.samples = integer(p, "K_samples", 2000, 1, path);
  if (p.contains("K")) {
    const auto& v = p.at("K");
    if (v.is_string() && v.get<std::string>() == "estimate") return k;
    k.estimate = false;
    k.value = number(v, path + ".K");
  }
  return k;
}

/// "initial" or a stored snapshot time.
struct FieldChoice {
  bool initial = true;
  double t = 0.0;
};

FieldChoice field_choice(const json& p, const std::string& path) {
  FieldChoice f;
  if (!p.contains("field")) return f;
  const auto& v = p.at("field");
  if (v.is_string() && v.get<std::string>() == "initial") return f;
  f.initial = false;
  f.t = number(v, path + ".field");
  return f;
}

Vec default_center(const FinslerStructure& fs) {
  Vec c(fs.dim());
  for (int i = 0; i < fs.dim(); ++i) c(i) = fs.is_periodic(i) ? 0.5 * fs.periods()(i) : 0.0;
  return c;
}

/// Summary of a report used in the two-level comparison.
json level_summary(const Report& r, const Context& ctx) {
  json s = {{"nodes_per_axis", ctx.grid().shape[0]}, {"violations", r.violations}, {"passed", r.passed()}};
  for (const char* key : {"min_slack", "max_negative_slack", "max_abs_residual", "final_error"})
    if (r.metrics.contains(key)) s[key] = r.metrics.at(key);
  if (r.stats.contains("slack")) s["slack_min"] = r.stats.at("slack").min;
  return s;
}

}  // namespace

// ---- Context -----------------------------------------------------------------

Context::Context(const Scenario& sc, const RunOptions& opt, double grid_factor)
    : sc_(&sc), opt_(&opt), factor_(grid_factor), wg_(sc.structure(), sc.grid(sc.structure(), grid_factor)) {}

GridField Context::initial() const {
  if (!sc_->initial_spec) throw ValidationError("no initial datum", "initial");
  return finsler::sample(grid(), make_datum(structure(), *sc_->initial_spec, "initial", sc_->seed));
}

const finsler::Trajectory& Context::trajectory() {
  if (traj_) return *traj_;
  if (!sc_->solver) throw ValidationError("no solver settings", "solver");
  const SolverSpec& s = *sc_->solver;
  finsler::HeatOptions ho;
  ho.T = s.T;
  ho.tau = s.tau / (factor_ * factor_);
  ho.scheme = s.scheme;
  ho.time_origin = s.time_origin;
  ho.snapshots = s.snapshots;
  for (double t : extra_times_) {
    if (!(t > 0.0 && t <= s.T)) throw ValidationError("check time outside (0, T]", "checks");
    if (t < s.T) ho.snapshots.push_back(t);
  }
  std::sort(ho.snapshots.begin(), ho.snapshots.end());
  ho.snapshots.erase(std::unique(ho.snapshots.begin(), ho.snapshots.end()), ho.snapshots.end());
  traj_ = finsler::heat_solve(wg_, initial(), ho);
  return *traj_;
}

const finsler::DistanceTable& Context::distances(bool reverse) {
  auto& slot = reverse ? reverse_table_ : table_;
  if (slot) return *slot;
  const FinslerStructure fs = reverse ? finsler::reverse_structure(structure()) : structure();
  slot = opt_->use_cache ? finsler::DistanceTable::cached(fs, grid(), opt_->out / "cache")
                         : finsler::DistanceTable::build(fs, grid());
  return *slot;
}

double Context::K_estimate(double N, int samples, std::uint64_t seed) {
  const auto key = std::make_tuple(N, samples, seed);
  if (auto it = K_.find(key); it != K_.end()) return it->second;
  const double K = finsler::ricci_lower_bound(structure(), N, samples, seed).K;
  K_[key] = K;
  return K;
}

// ---- check preparation ---------------------------------------------------------

PreparedCheck prepare_check(const CheckSpec& spec, const Scenario& sc, const FinslerStructure& fs,
                            const RunOptions& opt) {
  PreparedCheck pc;
  pc.spec = spec;
  const json& p = spec.params;
  const std::string& path = spec.path;
  const int n = fs.dim();
  const double scale = opt.tolerance_scale;
  pc.compare_refinement = flag(p, "compare_refinement", false, path);
  std::optional<double> tol;
  if (p.contains("tolerance")) {
    tol = number(p.at("tolerance"), path + ".tolerance");
    if (!(*tol >= 0.0)) throw ValidationError("must be nonnegative", path + ".tolerance");
    *tol *= scale;
  }
  auto dimension = [&](double def) {
    const double N = p.contains("N") ? parse_dimension(p.at("N"), path + ".N") : def;
    if (N < n) throw ValidationError("N must lie in [n, inf]", path + ".N");
    return N;
  };
  const std::uint64_t seed = seed_of(p, sc.seed, path);
  const std::string& name = spec.name;

  if (name == "ricci_lower_bound") {
    const double N = dimension(INFINITY);
    const int samples = integer(p, "samples", 2000, 1, path);
    pc.run = [N, samples, seed](Context& ctx) {
      return std::vector<Report>{finsler::ricci_lower_bound(ctx.structure(), N, samples, seed).report};
    };
    return pc;
  }

  if (name == "bochner_pointwise" || name == "bochner_integrated") {
    const double N = dimension(INFINITY);
    const FieldChoice field = field_choice(p, path);
    if (!field.initial) pc.times.push_back(field.t);
    if (field.initial && !sc.initial_spec) throw ValidationError("needs an initial datum", "initial");
    std::optional<finsler::Datum> datum;
    if (sc.initial_spec) datum = make_datum(fs, *sc.initial_spec, "initial", sc.seed);
    auto field_of = [field](Context& ctx) {
      return field.initial ? ctx.initial() : ctx.trajectory().at(field.t);
    };

    if (name == "bochner_pointwise") {
      const double frac = real(p, "regular_fraction", 0.5, path);
      if (!(frac >= 0.0 && frac < 1.0)) throw ValidationError("must lie in [0, 1)", path + ".regular_fraction");
      std::vector<int> levels;
      if (p.contains("levels")) {
        if (!p.at("levels").is_array()) throw ValidationError("expected an array", path + ".levels");
        for (const auto& l : p.at("levels")) {
          if (!l.is_number_integer() || l.get<int>() < 16)
            throw ValidationError("levels must be integers >= 16", path + ".levels");
          levels.push_back(l.get<int>());
        }
        if (levels.size() == 1) throw ValidationError("need at least two levels", path + ".levels");
      } else if (std::isinf(N) && field.initial && !sc.grid_spec.contains("lo")) {
        levels = {32, 64, 128};
      }
      if (!levels.empty() && (!field.initial || sc.grid_spec.contains("lo")))
        throw ValidationError("refinement levels need the initial datum on a periodic grid", path + ".levels");
      pc.run = [=](Context& ctx) {
        const double t = tol ? *tol : finsler::discretization_tolerance(ctx.grid(), 0.0, scale);
        std::vector<Report> out{finsler::bochner_pointwise(ctx.weighted_grid(), field_of(ctx), N, t, frac)};
        if (!levels.empty()) out.push_back(finsler::bochner_refinement(ctx.structure(), *datum, N, levels, frac));
        return out;
      };
      return pc;
    }

    const json phi_spec = p.value("phi", json{{"kind", "constant"}, {"value", 1.0}});
    (void)make_datum(fs, phi_spec, path + ".phi", seed);
    pc.run = [=](Context& ctx) {
      const GridField phi = finsler::sample(ctx.grid(), make_datum(ctx.structure(), phi_spec, path + ".phi", seed));
      double t = 0.0;
      if (tol) {
        t = *tol;
      } else {
        t = finsler::discretization_tolerance(ctx.grid(), 0.0, scale) * ctx.weighted_grid().integral(phi);
      }
      return std::vector<Report>{finsler::bochner_integrated(ctx.weighted_grid(), field_of(ctx), phi, N, t)};
    };
    return pc;
  }

  if (!sc.solver || !sc.initial_spec) throw ValidationError("needs an initial datum and solver settings", path);
  const CurvatureSpec K = curvature_spec(p, seed, path);

  if (name == "bakry_emery") {
    if (!p.contains("s") || !p.contains("t")) throw ValidationError("needs times s and t", path);
    const double s = number(p.at("s"), path + ".s"), t = number(p.at("t"), path + ".t");
    if (!(s >= 0.0 && s <= t)) throw ValidationError("need 0 <= s <= t", path + ".s");
    if (s > 0.0) pc.times.push_back(s);
    pc.times.push_back(t);
    finsler::BakryEmeryOptions o;
    if (tol) o.tolerance = *tol;
    try {
      o.fallback = finsler::fallback_from_string(p.value("fallback", "e1"));
      o.alternate = finsler::fallback_from_string(p.value("alternate", "e2"));
    } catch (const std::exception& e) {
      throw ValidationError(e.what(), path + ".fallback");
    }
    const std::string op = p.value("operator", "compact");
    if (op != "compact" && op != "wide") throw ValidationError("expected compact or wide", path + ".operator");
    o.op = op == "wide" ? finsler::LinearOperator::wide : finsler::LinearOperator::compact;
    if (!tol) o.tolerance *= scale;
    pc.run = [=](Context& ctx) {
      Report tmp;
      const double k = K.resolve(ctx, INFINITY, tmp);
      Report rep = finsler::bakry_emery(ctx.weighted_grid(), ctx.trajectory(), s, t, k, o);
      rep.params.update(tmp.params);
      return std::vector<Report>{rep};
    };
    return pc;
  }

  if (name == "lipschitz_decay") {
    finsler::LipschitzOptions o;
    o.tolerance = tol ? *tol : o.tolerance * scale;
    o.radius = integer(p, "radius", o.radius, 1, path);
    o.far_pairs = static_cast<std::size_t>(integer(p, "far_pairs", static_cast<int>(o.far_pairs), 0, path));
    o.seed = seed;
    pc.run = [=](Context& ctx) {
      Report tmp;
      const double k = K.resolve(ctx, INFINITY, tmp);
      Report rep = finsler::lipschitz_decay(ctx.weighted_grid(), ctx.trajectory(), k, ctx.distances(), o);
      rep.params.update(tmp.params);
      return std::vector<Report>{rep};
    };
    return pc;
  }

  if (name == "li_yau") {
    finsler::LiYauOptions o;
    o.N = dimension(n);
    if (std::isinf(o.N)) throw ValidationError("Li-Yau needs finite N", path + ".N");
    o.theta = real(p, "theta", 1.0, path);
    if (!(o.theta >= 1.0)) throw ValidationError("must be >= 1", path + ".theta");
    o.tolerance = tol ? *tol : o.tolerance * scale;
    o.shift = real(p, "shift", 0.0, path);
    const std::string kind = sc.initial_spec->value("kind", "");
    if (p.contains("center")) {
      const auto& c = p.at("center");
      if (!c.is_array() || static_cast<int>(c.size()) != n)
        throw ValidationError("expected one number per axis", path + ".center");
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = number(c.at(i), path + ".center");
      o.center = v;
    } else if (kind == "gaussian_bump" || kind == "heat_kernel") {
      if (sc.initial_spec->contains("center")) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v(i) = number(sc.initial_spec->at("center").at(i), "initial.center");
        o.center = v;
      } else {
        o.center = default_center(fs);
      }
    }
    double min_period = INFINITY;
    for (int i = 0; i < n; ++i) min_period = std::min(min_period, fs.periods()(i));
    o.radius = real(p, "radius", std::isfinite(min_period) ? 0.25 * min_period : 1.0, path);
    pc.run = [=](Context& ctx) {
      Report tmp;
      finsler::LiYauOptions oo = o;
      oo.K = K.resolve(ctx, o.N, tmp);
      Report rep = finsler::li_yau(ctx.weighted_grid(), ctx.trajectory(), oo);
      rep.params.update(tmp.params);
      return std::vector<Report>{rep};
    };
    return pc;
  }

  if (name == "harnack") {
    finsler::HarnackOptions o;
    o.N = dimension(n);
    if (std::isinf(o.N)) throw ValidationError("Harnack needs finite N", path + ".N");
    o.theta = real(p, "theta", 1.0, path);
    if (!(o.theta >= 1.0)) throw ValidationError("must be >= 1", path + ".theta");
    o.tolerance = tol ? *tol : o.tolerance * scale;
    const std::string orient = p.value("orientation", "stated");
    if (orient != "stated" && orient != "reversed")
      throw ValidationError("expected stated or reversed", path + ".orientation");
    o.orientation = orient == "stated" ? finsler::HarnackOrientation::stated : finsler::HarnackOrientation::reversed;
    const int count = integer(p, "pairs", 200, 1, path);
    const bool reverse_identity = flag(p, "reverse_identity", true, path);
    pc.run = [=](Context& ctx) {
      Report tmp;
      finsler::HarnackOptions oo = o;
      oo.K = K.resolve(ctx, o.N, tmp);
      const auto& traj = ctx.trajectory();
      const auto pairs = finsler::random_harnack_pairs(traj, static_cast<std::size_t>(count), seed);
      const auto& table = ctx.distances();
      Report rep = finsler::harnack(ctx.weighted_grid(), traj, table, pairs, oo);
      rep.params.update(tmp.params);
      if (reverse_identity) {
        const auto& rev = ctx.distances(true);
        double defect = 0.0;
        for (const auto& q : pairs) defect = std::max(defect, std::abs(rev(q.x, q.y) - table(q.y, q.x)));
        rep.metrics["reverse_identity_defect"] = defect;
        if (defect > 1e-6) {
          rep.failed = true;
          rep.notes.push_back("reverse-structure identity violated");
        }
      }
      return std::vector<Report>{rep};
    };
    return pc;
  }

  throw ValidationError("unknown check '" + name + "'", path + ".check");
}

// ---- Runner --------------------------------------------------------------------

Runner::Runner(Scenario sc, RunOptions opt) : sc_(std::move(sc)), opt_(std::move(opt)) {}

json Runner::stamp() const { return {{"tool_version", finsler::kVersion}, {"scenario_hash", sc_.hash()}}; }

json stamped_report(const Report& rep, const std::string& scenario_hash) {
  json j = rep.to_json();
  j["tool_version"] = finsler::kVersion;
  j["scenario_hash"] = scenario_hash;
  return j;
}

void Runner::write_scenario(const Context& ctx) {
  json j = stamp();
  j["structure_hash"] = ctx.structure().hash_hex();
  j["scenario"] = sc_.source;
  write_file(opt_.out / "scenario.json", j.dump(2) + "\n");
}

void Runner::emit(Report rep, const std::string& stem) {
  char prefix[8];
  std::snprintf(prefix, sizeof prefix, "%02d_", counter_++);
  const std::string base = prefix + stem;
  write_file(opt_.out / "reports" / (base + ".json"), stamped_report(rep, sc_.hash()).dump(2) + "\n");

  const std::vector<std::string> header = {"tool_version " + std::string(finsler::kVersion),
                                           "scenario_hash " + sc_.hash(), "structure_hash " + rep.structure_hash};
  if (rep.metrics.contains("levels") && rep.metrics.at("levels").is_array() && !rep.metrics.at("levels").empty()) {
    json rows = rep.metrics.at("levels");
    const json& orders = rep.metrics.at("orders");
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i]["order"] = i == 0 ? json() : orders.at(i - 1);
    write_file(opt_.out / (base + ".csv"), csv_of(rows, header));
  }
  if (rep.metrics.contains("per_time") && rep.metrics.at("per_time").is_array() &&
      !rep.metrics.at("per_time").empty())
    write_file(opt_.out / (base + ".csv"), csv_of(rep.metrics.at("per_time"), header));
  if (rep.check == "lipschitz_decay" && rep.metrics.contains("times")) {
    json rows = json::array();
    const auto& m = rep.metrics;
    for (std::size_t i = 0; i < m.at("times").size(); ++i)
      rows.push_back({{"time", m.at("times").at(i)}, {"lip", m.at("lip").at(i)},
                      {"sup_gradient", m.at("sup_gradient").at(i)}});
    write_file(opt_.out / (base + ".csv"), csv_of(rows, header));
  }

  if (!opt_.quiet) std::cout << rep.to_text() << '\n';
  summary_.push_back({{"file", "reports/" + base + ".json"},
                      {"check", rep.check},
                      {"passed", rep.passed()},
                      {"violations", rep.violations},
                      {"empty", rep.empty}});
  all_passed_ = all_passed_ && rep.passed();
}

void Runner::write_summary(int exit_code) {
  json j = stamp();
  j["name"] = sc_.name;
  j["structure_hash"] = sc_.structure().hash_hex();
  j["exit_code"] = exit_code;
  j["reports"] = summary_;
  write_file(opt_.out / "summary.json", j.dump(2) + "\n");
}

bool Runner::audit(Context& ctx) {
  Report rep = finsler::audit_structure(ctx.structure(), sc_.audit_samples, sc_.seed);
  const bool ok = rep.passed();
  emit(std::move(rep), "audit");
  return ok;
}

void Runner::solve(Context& ctx) {
  const finsler::Trajectory& traj = ctx.trajectory();
  finsler::Trajectory stored = traj;
  stored.metadata = stamp();
  stored.save(opt_.out / "trajectory.fft");
  std::ostringstream csv;
  traj.write_csv(csv, {"tool_version " + std::string(finsler::kVersion), "scenario_hash " + sc_.hash(),
                       "structure_hash " + traj.structure_hash});
  write_file(opt_.out / "timeseries.csv", csv.str());

  Report rep("heat_solve", traj.structure_hash);
  rep.params = {{"T", sc_.solver->T}, {"scheme", finsler::to_string(traj.scheme)}, {"time_origin", traj.time_origin}};
  rep.resolution = {{"grid", traj.grid.to_json()}, {"tau", traj.tau}};
  rep.metrics = {{"steps", traj.steps},
                 {"snapshots", traj.times.size()},
                 {"mass_drift", traj.mass_drift},
                 {"energy_increase", traj.energy_increase}};
  for (const auto& f : traj.fields)
    if (!f.all_finite()) {
      rep.failed = true;
      rep.notes.push_back("non-finite values in the solution");
      break;
    }
  emit(std::move(rep), "heat_solve");
}

void Runner::execute(const std::vector<PreparedCheck>& checks, Context& ctx) {
  std::unique_ptr<Context> coarse;
  for (const auto& pc : checks) {
    std::vector<Report> reports = pc.run(ctx);
    if (pc.compare_refinement) {
      if (!coarse) {
        coarse = std::make_unique<Context>(sc_, opt_, 0.5);
        for (const auto& c : checks)
          for (double t : c.times) coarse->require_time(t);
      }
      const std::vector<Report> low = pc.run(*coarse);
      for (std::size_t i = 0; i < reports.size() && i < low.size(); ++i) {
        const json a = level_summary(low[i], *coarse), b = level_summary(reports[i], ctx);
        const double tol = reports[i].tolerance;
        bool improved = true;
        auto value = [](const json& s, const char* key) { return s.at(key).get<double>(); };
        auto comparable = [&](const char* key) {
          return a.contains(key) && b.contains(key) && a.at(key).is_number() && b.at(key).is_number();
        };
        if (comparable("min_slack"))
          improved = improved && (value(b, "min_slack") >= value(a, "min_slack") || value(b, "min_slack") >= -tol);
        for (const char* key : {"max_negative_slack", "max_abs_residual"})
          if (comparable(key)) improved = improved && (value(b, key) <= value(a, key) || value(b, key) <= tol);
        reports[i].metrics["refinement"] = {{"coarse", a}, {"fine", b}, {"improved", improved}};
        if (!improved) reports[i].notes.push_back("slack did not improve under refinement");
      }
    }
    for (auto& r : reports) {
      const std::string stem = r.check;
      emit(std::move(r), stem);
    }
  }
}

int Runner::run() {
  Context ctx(sc_, opt_);
  const FinslerStructure& fs = ctx.structure();
  std::vector<PreparedCheck> checks;
  for (const auto& c : sc_.checks) checks.push_back(prepare_check(c, sc_, fs, opt_));
  write_scenario(ctx);
  if (!audit(ctx)) {
    write_summary(1);
    return 1;
  }
  for (const auto& c : checks)
    for (double t : c.times) ctx.require_time(t);
  if (sc_.solver && sc_.initial_spec) solve(ctx);
  execute(checks, ctx);
  const int code = all_passed_ ? 0 : 1;
  write_summary(code);
  return code;
}

int Runner::audit_only() {
  Context ctx(sc_, opt_);
  write_scenario(ctx);
  const int code = audit(ctx) ? 0 : 1;
  write_summary(code);
  return code;
}

int Runner::solve_only() {
  if (!sc_.solver || !sc_.initial_spec) throw ValidationError("needs an initial datum and solver settings", "solver");
  Context ctx(sc_, opt_);
  write_scenario(ctx);
  solve(ctx);
  const int code = all_passed_ ? 0 : 1;
  write_summary(code);
  return code;
}

int Runner::verify(const std::string& check) {
  if (!is_check_name(check)) {
    std::string known;
    for (const auto& n : check_names()) known += "\n  " + n;
    throw ValidationError("unknown check '" + check + "'; available checks:" + known, "check");
  }
  CheckSpec spec{check, json::object(), "verify"};
  for (const auto& c : sc_.checks)
    if (c.name == check) {
      spec = c;
      break;
    }
  Context ctx(sc_, opt_);
  const PreparedCheck pc = prepare_check(spec, sc_, ctx.structure(), opt_);
  write_scenario(ctx);
  for (double t : pc.times) ctx.require_time(t);
  execute({pc}, ctx);
  const int code = all_passed_ ? 0 : 1;
  write_summary(code);
  return code;
}

std::string render_reports(const fsys::path& dir) {
  if (!fsys::is_directory(dir)) throw ValidationError("not a directory", dir.string());
  std::vector<fsys::path> files;
  for (const auto& e : fsys::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::ostringstream os;
  std::size_t count = 0;
  for (const auto& f : files) {
    std::ifstream is(f, std::ios::binary);
    json j;
    try {
      j = json::parse(is);
    } catch (const json::parse_error&) {
      continue;
    }
    if (!j.is_object() || !j.contains("check") || !j.contains("tolerance")) continue;
    const Report rep = Report::from_json(j);
    os << "== " << fsys::relative(f, dir).generic_string();
    if (j.contains("tool_version")) os << "  (finslerflow " << j.at("tool_version").get<std::string>() << ")";
    os << '\n' << rep.to_text() << '\n';
    ++count;
  }
  if (count == 0) throw ValidationError("no reports found", dir.string());
  write_file(dir / "report.txt", os.str());
  return os.str();
}

}  // namespace finslerflow
