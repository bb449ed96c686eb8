#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "finsler/error.hpp"
#include "finsler/types.hpp"

namespace finslerflow {

using finsler::ValidationError;
using finsler::Vec;

namespace {

void allow_keys(const json& obj, const std::set<std::string>& keys, const std::string& path) {
  if (!obj.is_object()) throw ValidationError("expected a table/object", path);
  for (const auto& [k, v] : obj.items())
    if (!keys.contains(k)) throw ValidationError("unknown key", path.empty() ? k : path + "." + k);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

Vec vec(const json& j, int dim, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw ValidationError("expected " + std::to_string(dim) + " numbers", path);
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = number(j.at(i), path);
  return v;
}

json node_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    json o = json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = node_to_json(v);
    return o;
  }
  if (const auto* a = n.as_array()) {
    json arr = json::array();
    for (const auto& v : *a) arr.push_back(node_to_json(v));
    return arr;
  }
  if (const auto* s = n.as_string()) return s->get();
  if (const auto* i = n.as_integer()) return i->get();
  if (const auto* b = n.as_boolean()) return b->get();
  if (const auto* f = n.as_floating_point()) {
    const double x = f->get();
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
  }
  return n.visit([](const auto& v) {
    std::ostringstream os;
    os << v;
    return os.str();
  });
}

const std::map<std::string, std::set<std::string>>& check_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"ricci_lower_bound", {"N", "samples", "seed"}},
      {"bochner_pointwise", {"N", "field", "regular_fraction", "levels"}},
      {"bochner_integrated", {"N", "field", "phi"}},
      {"bakry_emery", {"s", "t", "K", "K_samples", "fallback", "alternate", "operator"}},
      {"lipschitz_decay", {"K", "K_samples", "radius", "far_pairs", "seed"}},
      {"li_yau", {"N", "K", "K_samples", "theta", "shift", "center", "radius"}},
      {"harnack", {"N", "K", "K_samples", "theta", "pairs", "seed", "orientation", "reverse_identity"}},
  };
  return keys;
}

}  // namespace

double number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ValidationError("expected a number", path);
}

double parse_dimension(const json& j, const std::string& path) {
  const double N = number(j, path);
  if (std::isnan(N) || N <= 0.0) throw ValidationError("N must be positive or \"inf\"", path);
  return N;
}

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : check_keys()) v.push_back(k);
    return v;
  }();
  return names;
}

bool is_check_name(const std::string& name) { return check_keys().contains(name); }

json toml_to_json(const std::string& text, const std::string& source_name) {
  try {
    return node_to_json(toml::parse(text, source_name));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " (line " << e.source().begin.line << ", column " << e.source().begin.column << ")";
    throw ValidationError(os.str(), source_name);
  }
}

json load_document(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ValidationError("cannot read scenario file", file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  json doc;
  if (file.extension() == ".toml") {
    doc = toml_to_json(ss.str(), file.string());
  } else {
    try {
      doc = json::parse(ss.str());
    } catch (const json::parse_error& e) {
      throw ValidationError(e.what(), file.string());
    }
  }
  return doc;
}

Scenario load_scenario(const std::filesystem::path& file) { return parse_scenario(load_document(file)); }

Scenario parse_scenario(const json& doc) {
  allow_keys(doc, {"name", "seed", "structure", "grid", "initial", "solver", "audit", "checks", "output"}, "");
  Scenario sc;
  sc.source = doc;
  sc.name = doc.value("name", "scenario");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_integer() || doc.at("seed").get<long long>() < 0)
      throw ValidationError("seed must be a nonnegative integer", "seed");
    sc.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (!doc.contains("structure")) throw ValidationError("missing", "structure");
  sc.structure_spec = doc.at("structure");
  const FinslerStructure fs = sc.structure();

  sc.grid_spec = doc.value("grid", json{{"nodes", 32}});
  allow_keys(sc.grid_spec, {"nodes", "lo", "hi"}, "grid");
  const Grid g = sc.grid(fs);

  if (doc.contains("initial")) {
    sc.initial_spec = doc.at("initial");
    (void)make_datum(fs, *sc.initial_spec, "initial", sc.seed);
  }

  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    allow_keys(s, {"T", "tau", "scheme", "snapshots", "snapshot_count", "centered_delta", "time_origin"}, "solver");
    SolverSpec sp;
    if (!s.contains("T")) throw ValidationError("missing", "solver.T");
    sp.T = number(s.at("T"), "solver.T");
    if (!(sp.T > 0.0) || !std::isfinite(sp.T)) throw ValidationError("must be positive", "solver.T");
    sp.tau = s.contains("tau") ? number(s.at("tau"), "solver.tau") : 0.0;
    if (sp.tau < 0.0) throw ValidationError("must be nonnegative", "solver.tau");
    try {
      sp.scheme = finsler::scheme_from_string(s.value("scheme", "explicit"));
    } catch (const std::exception& e) {
      throw ValidationError(e.what(), "solver.scheme");
    }
    if (s.contains("snapshots")) {
      const auto& a = s.at("snapshots");
      if (!a.is_array()) throw ValidationError("expected an array of times", "solver.snapshots");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = number(a.at(i), "solver.snapshots[" + std::to_string(i) + "]");
        if (!(t > 0.0 && t < sp.T))
          throw ValidationError("snapshot times must lie in (0, T)", "solver.snapshots[" + std::to_string(i) + "]");
        sp.snapshots.push_back(t);
      }
    }
    if (s.contains("snapshot_count")) {
      if (!s.at("snapshot_count").is_number_integer() || s.at("snapshot_count").get<int>() < 1)
        throw ValidationError("must be a positive integer", "solver.snapshot_count");
      const int n = s.at("snapshot_count").get<int>();
      for (int k = 1; k < n; ++k) sp.snapshots.push_back(sp.T * k / n);
    }
    if (s.contains("centered_delta")) {
      const double d = number(s.at("centered_delta"), "solver.centered_delta");
      if (!(d > 0.0)) throw ValidationError("must be positive", "solver.centered_delta");
      const std::vector<double> centers = sp.snapshots;
      for (double t : centers)
        for (double u : {t - d, t + d})
          if (u > 0.0 && u < sp.T) sp.snapshots.push_back(u);
    }
    std::sort(sp.snapshots.begin(), sp.snapshots.end());
    sp.snapshots.erase(std::unique(sp.snapshots.begin(), sp.snapshots.end()), sp.snapshots.end());
    if (s.contains("time_origin")) {
      sp.time_origin = number(s.at("time_origin"), "solver.time_origin");
    } else if (sc.initial_spec && sc.initial_spec->value("kind", "") == "heat_kernel") {
      sp.time_origin = number(sc.initial_spec->at("t0"), "initial.t0");
    }
    sc.solver = sp;
  }

  if (doc.contains("audit")) {
    const auto& a = doc.at("audit");
    allow_keys(a, {"samples"}, "audit");
    sc.audit_samples = a.value("samples", 1000);
    if (sc.audit_samples < 1) throw ValidationError("must be positive", "audit.samples");
  }

  if (doc.contains("checks")) {
    const auto& cs = doc.at("checks");
    if (!cs.is_array()) throw ValidationError("expected an array of check tables", "checks");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string path = "checks[" + std::to_string(i) + "]";
      const auto& c = cs.at(i);
      if (!c.is_object() || !c.contains("check") || !c.at("check").is_string())
        throw ValidationError("each check needs a 'check' name", path);
      CheckSpec spec;
      spec.name = c.at("check").get<std::string>();
      spec.path = path;
      if (!is_check_name(spec.name)) {
        std::string known;
        for (const auto& n : check_names()) known += (known.empty() ? "" : ", ") + n;
        throw ValidationError("unknown check '" + spec.name + "' (available: " + known + ")", path + ".check");
      }
      auto keys = check_keys().at(spec.name);
      keys.insert({"check", "tolerance", "compare_refinement"});
      allow_keys(c, keys, path);
      spec.params = c;
      spec.params.erase("check");
      sc.checks.push_back(std::move(spec));
    }
  }
  if (sc.needs_trajectory()) {
    if (!sc.initial_spec) throw ValidationError("checks on the heat flow need an initial datum", "initial");
    if (!sc.solver) throw ValidationError("checks on the heat flow need solver settings", "solver");
  }
  (void)g;
  sc.output = doc.value("output", "");
  return sc;
}

FinslerStructure Scenario::structure() const { return finsler::structure_from_json(structure_spec); }

Grid Scenario::grid(const FinslerStructure& fs) const { return grid(fs, 1.0); }

Grid Scenario::grid(const FinslerStructure& fs, double factor) const {
  const int dim = fs.dim();
  finsler::Index shape{1, 1, 1};
  const json nodes = grid_spec.value("nodes", json(32));
  if (nodes.is_number_integer()) {
    for (int i = 0; i < dim; ++i) shape[i] = nodes.get<int>();
  } else if (nodes.is_array() && static_cast<int>(nodes.size()) == dim) {
    for (int i = 0; i < dim; ++i) {
      if (!nodes.at(i).is_number_integer()) throw ValidationError("expected integers", "grid.nodes");
      shape[i] = nodes.at(i).get<int>();
    }
  } else {
    throw ValidationError("expected an integer or one integer per axis", "grid.nodes");
  }
  for (int i = 0; i < dim; ++i) shape[i] = static_cast<int>(std::lround(shape[i] * factor));
  if (grid_spec.contains("lo") || grid_spec.contains("hi")) {
    if (!grid_spec.contains("lo") || !grid_spec.contains("hi"))
      throw ValidationError("a patch needs both lo and hi", "grid");
    return Grid::patch(vec(grid_spec.at("lo"), dim, "grid.lo"), vec(grid_spec.at("hi"), dim, "grid.hi"), shape);
  }
  return Grid::periodic_cell(fs, shape);
}

std::string Scenario::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(finsler::fnv1a(source.dump())));
  return buf;
}

bool Scenario::needs_trajectory() const {
  for (const auto& c : checks) {
    if (c.name == "bakry_emery" || c.name == "lipschitz_decay" || c.name == "li_yau" || c.name == "harnack")
      return true;
    if (c.params.contains("field") && c.params.at("field") != "initial") return true;
  }
  return false;
}

finsler::Datum make_datum(const FinslerStructure& fs, const json& spec, const std::string& path,
                          std::uint64_t default_seed) {
  if (!spec.is_object() || !spec.contains("kind") || !spec.at("kind").is_string())
    throw ValidationError("needs a 'kind'", path);
  const std::string kind = spec.at("kind").get<std::string>();
  const int dim = fs.dim();
  auto num = [&](const char* key, double def) {
    return spec.contains(key) ? number(spec.at(key), join(path, key)) : def;
  };
  auto center = [&]() -> Vec {
    if (spec.contains("center")) return vec(spec.at("center"), dim, join(path, "center"));
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c(i) = fs.is_periodic(i) ? 0.5 * fs.periods()(i) : 0.0;
    return c;
  };
  try {
    if (kind == "gaussian_bump") {
      allow_keys(spec, {"kind", "center", "width", "amplitude", "floor"}, path);
      return finsler::gaussian_bump_datum(fs, center(), num("width", 1.0), num("amplitude", 1.0), num("floor", 0.0));
    }
    if (kind == "heat_kernel") {
      allow_keys(spec, {"kind", "center", "t0", "floor"}, path);
      if (!spec.contains("t0")) throw ValidationError("missing", join(path, "t0"));
      return finsler::heat_kernel_function(fs, center(), num("t0", 0.0), num("floor", 0.0));
    }
    if (kind == "sine") {
      allow_keys(spec, {"kind", "k", "amplitude"}, path);
      finsler::Index k{0, 0, 0};
      k[0] = 1;
      if (spec.contains("k")) {
        const auto& kj = spec.at("k");
        if (!kj.is_array() || static_cast<int>(kj.size()) != dim)
          throw ValidationError("expected one integer per axis", join(path, "k"));
        for (int i = 0; i < dim; ++i) k[i] = kj.at(i).get<int>();
      }
      return finsler::sine_mode_datum(fs, k, num("amplitude", 1.0));
    }
    if (kind == "random_smooth") {
      allow_keys(spec, {"kind", "seed", "kmax", "amplitude"}, path);
      return finsler::random_smooth_datum(fs, spec.value("seed", default_seed), spec.value("kmax", 2),
                                          num("amplitude", 1.0));
    }
    if (kind == "constant") {
      allow_keys(spec, {"kind", "value"}, path);
      const double c = num("value", 1.0);
      return [c](const Vec&) { return c; };
    }
  } catch (const ValidationError& e) {
    if (e.path().rfind(path, 0) == 0) throw;
    throw ValidationError(e.what(), path);
  }
  throw ValidationError("unknown kind '" + kind + "' (gaussian_bump|heat_kernel|sine|random_smooth|constant)",
                        join(path, "kind"));
}

}  // namespace finslerflow
