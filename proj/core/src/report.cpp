#include "finsler/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace finsler {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

// Infinite values (the −∞ weighted-Ricci sentinel) are stored as strings.
nlohmann::json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double from_num(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return NAN;
  }
  return j.get<double>();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string fmt_json(const nlohmann::json& j) {
  if (j.is_number_float()) return fmt(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

}  // namespace

Stats Stats::of(std::vector<double> values) {
  Stats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  double acc = 0.0;
  for (double v : values) acc += v;
  s.mean = acc / static_cast<double>(values.size());
  s.q05 = quantile(values, 0.05);
  s.q50 = quantile(values, 0.5);
  s.q95 = quantile(values, 0.95);
  return s;
}

nlohmann::json Stats::to_json() const {
  return {{"count", count}, {"min", num(min)},   {"max", num(max)}, {"mean", num(mean)},
          {"q05", num(q05)}, {"q50", num(q50)}, {"q95", num(q95)}};
}

Stats Stats::from_json(const nlohmann::json& j) {
  Stats s;
  s.count = j.at("count").get<std::size_t>();
  s.min = from_num(j.at("min"));
  s.max = from_num(j.at("max"));
  s.mean = from_num(j.at("mean"));
  s.q05 = from_num(j.at("q05"));
  s.q50 = from_num(j.at("q50"));
  s.q95 = from_num(j.at("q95"));
  return s;
}

nlohmann::json Report::to_json() const {
  nlohmann::json st = nlohmann::json::object();
  for (const auto& [k, v] : stats) st[k] = v.to_json();
  return {{"check", check},
          {"structure_hash", structure_hash},
          {"params", params},
          {"resolution", resolution},
          {"stats", st},
          {"metrics", metrics},
          {"tolerance", num(tolerance)},
          {"violations", violations},
          {"failed", failed},
          {"empty", empty},
          {"passed", passed()},
          {"notes", notes}};
}

Report Report::from_json(const nlohmann::json& j) {
  Report r;
  r.check = j.at("check").get<std::string>();
  r.structure_hash = j.value("structure_hash", "");
  r.params = j.value("params", nlohmann::json::object());
  r.resolution = j.value("resolution", nlohmann::json::object());
  const nlohmann::json stats = j.value("stats", nlohmann::json::object());
  for (const auto& [k, v] : stats.items()) r.stats[k] = Stats::from_json(v);
  r.metrics = j.value("metrics", nlohmann::json::object());
  r.tolerance = from_num(j.at("tolerance"));
  r.violations = j.value("violations", std::size_t{0});
  r.failed = j.value("failed", false);
  r.empty = j.value("empty", false);
  r.notes = j.value("notes", std::vector<std::string>{});
  return r;
}

std::string Report::to_text() const {
  std::ostringstream os;
  os << check << "  [" << (passed() ? "PASS" : "FAIL") << "]  structure " << structure_hash << '\n';
  auto kv_block = [&](const char* title, const nlohmann::json& obj) {
    if (obj.empty()) return;
    os << "  " << title << ":";
    for (const auto& [k, v] : obj.items()) os << "  " << k << "=" << fmt_json(v);
    os << '\n';
  };
  kv_block("params", params);
  kv_block("resolution", resolution);
  if (!stats.empty()) {
    std::size_t w = 4;
    for (const auto& [k, v] : stats) w = std::max(w, k.size());
    char line[256];
    std::snprintf(line, sizeof(line), "  %-*s %8s %13s %13s %13s %13s\n", static_cast<int>(w), "stat", "count", "min",
                  "q50", "max", "mean");
    os << line;
    for (const auto& [k, s] : stats) {
      std::snprintf(line, sizeof(line), "  %-*s %8zu %13.6g %13.6g %13.6g %13.6g\n", static_cast<int>(w), k.c_str(),
                    s.count, s.min, s.q50, s.max, s.mean);
      os << line;
    }
  }
  if (!metrics.empty()) {
    for (const auto& [k, v] : metrics.items()) os << "  " << k << " = " << fmt_json(v) << '\n';
  }
  os << "  tolerance = " << fmt(tolerance) << "  violations = " << violations;
  if (empty) os << "  (empty evaluation set)";
  os << '\n';
  for (const auto& n : notes) os << "  note: " << n << '\n';
  return os.str();
}

}  // namespace finsler
