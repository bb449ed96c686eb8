#include "finsler/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finsler/error.hpp"
#include "finsler/parallel.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

nlohmann::json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

void check_N(double N, int n) {
  if (std::isnan(N) || N < n) throw ValidationError("N must lie in [n, inf]", "N");
}

/// K′ = min(K, 0) and the θ-dependent curvature term of the Li-Yau bounds.
double curvature_term(double K, double theta) {
  if (!(theta >= 1.0)) throw ValidationError("theta must be >= 1", "theta");
  const double Kp = std::min(K, 0.0);
  if (Kp == 0.0) return 0.0;
  if (theta == 1.0) throw ValidationError("theta = 1 needs K >= 0", "theta");
  return Kp / (4.0 * (theta - 1.0));
}

nlohmann::json resolution_of(const Grid& g, double tau) {
  return {{"grid", g.to_json()}, {"h", vec_json(g.h)}, {"tau", tau}};
}

double signed_min(const std::vector<double>& v) {
  double m = INFINITY;
  for (double x : v) m = std::min(m, x);
  return m;
}

}  // namespace

double discretization_tolerance(const Grid& g, double tau, double scale) {
  const double h = g.h.maxCoeff();
  return scale * kToleranceConstant * (h * h + tau);
}

RicciEstimate ricci_lower_bound(const FinslerStructure& fs, double N, int samples, std::uint64_t seed) {
  const int n = fs.dim();
  check_N(N, n);
  if (samples < 1) throw ValidationError("need at least one sample", "samples");
  Rng rng(seed);
  std::vector<Vec> xs(static_cast<std::size_t>(samples)), vs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = random_point(fs, rng);
    vs[i] = random_direction(n, rng);
  }
  std::vector<double> values(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    const Vec v = vs[i] / fs.F(xs[i], vs[i]);
    values[i] = weighted_ricci(curvature(fs, xs[i], v), n, 1.0, N);
  });

  RicciEstimate out;
  Report& rep = out.report;
  rep = Report("ricci_lower_bound", fs.hash_hex());
  rep.params = {{"N", num(N)}, {"samples", samples}, {"seed", seed}};
  const auto it = std::min_element(values.begin(), values.end());
  out.K = *it;
  const auto arg = static_cast<std::size_t>(it - values.begin());
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  rep.stats["ric_N"] = Stats::of(finite);
  rep.metrics = {{"K_est", num(out.K)},
                 {"argmin_x", vec_json(xs[arg])},
                 {"argmin_v", vec_json(vs[arg] / fs.F(xs[arg], vs[arg]))},
                 {"infinite_samples", values.size() - finite.size()}};
  rep.notes.push_back("K_est is a sampled minimum, not a certified lower bound");
  if (std::isinf(out.K)) rep.notes.push_back("Ric_N = -inf: N = n with nonzero S-curvature");
  return out;
}

BochnerTerms bochner_terms(const WeightedGrid& wg, const GridField& u, double N, int interior_width) {
  const Grid& g = wg.grid();
  const int n = g.dim;
  check_N(N, n);
  BochnerTerms t;
  t.grad = gradient_field(wg, u);
  t.lap = nonlinear_laplacian(wg, t.grad);
  const HessianField hf = hessian_ref(wg, u, t.grad, interior_width);

  GridField f(g);
  for (std::size_t p = 0; p < g.size(); ++p) f(p) = 0.5 * t.grad.dual(p) * t.grad.dual(p);
  const FrozenMetric metric = freeze_metric(wg, t.grad, Fallback::zero_flux);
  t.lhs = laplacian_V(wg, metric, f);
  const GridField dlap = differential(t.lap);

  t.drift = GridField(g);
  t.ric_inf = GridField(g);
  t.ric_n = GridField(g);
  t.hs2 = hf.hs2;
  t.evaluated = hf.evaluated;
  for (std::size_t p = 0; p < g.size(); ++p) {
    double d = 0.0;
    for (int a = 0; a < n; ++a) d += dlap(p, a) * t.grad.grad(p, a);
    t.drift(p) = d;
    if (!t.evaluated[p]) continue;
    const Curvature c{hf.ric(p), hf.psi1(p), hf.psi2(p)};
    t.ric_inf(p) = c.ric + c.psi2;
    t.ric_n(p) = weighted_ricci(c, n, t.grad.dual(p), N);
  }
  return t;
}

Report bochner_pointwise(const WeightedGrid& wg, const GridField& u, double N, double tol, double regular_fraction) {
  const Grid& g = wg.grid();
  const bool infinite = std::isinf(N);
  const BochnerTerms t = bochner_terms(wg, u, N);

  Report rep("bochner_pointwise", wg.structure().hash_hex());
  rep.params = {{"N", num(N)}, {"regular_fraction", regular_fraction}};
  rep.resolution = resolution_of(g, 0.0);
  rep.tolerance = tol;

  double dmax = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    if (t.evaluated[p]) dmax = std::max(dmax, t.grad.dual(p));
  const double floor = regular_fraction * dmax;

  std::vector<double> all, regular;
  std::size_t evaluated = 0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!t.evaluated[p]) continue;
    ++evaluated;
    const double base = t.lhs(p) - t.drift(p);
    double value;
    if (infinite) {
      value = base - t.ric_inf(p) - t.hs2(p);
    } else {
      value = base - t.ric_n(p) - t.lap(p) * t.lap(p) / N;
    }
    all.push_back(value);
    if (t.grad.dual(p) >= floor) {
      regular.push_back(value);
      const bool bad = infinite ? std::abs(value) > tol : value < -tol;
      if (bad) ++rep.violations;
    }
  }
  const std::string key = infinite ? "residual" : "slack";
  rep.stats[key] = Stats::of(all);
  rep.stats[key + "_regular"] = Stats::of(regular);
  double worst = 0.0;
  for (double v : regular) worst = std::max(worst, infinite ? std::abs(v) : -v);
  rep.metrics = {{"evaluated_nodes", evaluated},
                 {"regular_nodes", regular.size()},
                 {"active_nodes", t.grad.active_count()},
                 {"regular_floor", floor},
                 {infinite ? "max_abs_residual" : "max_negative_slack", std::max(worst, 0.0)}};
  if (regular.empty()) {
    rep.empty = true;
    rep.notes.push_back("no node above the gradient threshold");
  }
  return rep;
}

Report bochner_refinement(const FinslerStructure& fs, const std::function<double(const Vec&)>& u, double N,
                          const std::vector<int>& levels, double regular_fraction) {
  if (levels.size() < 2) throw ValidationError("refinement needs at least two levels", "levels");
  const bool infinite = std::isinf(N);
  Report rep("bochner_refinement", fs.hash_hex());
  rep.params = {{"N", num(N)}, {"levels", levels}, {"regular_fraction", regular_fraction}};
  std::vector<double> errors, hs;
  nlohmann::json per_level = nlohmann::json::array();
  for (int level : levels) {
    const Grid g = Grid::periodic_cell(fs, level);
    const WeightedGrid wg(fs, g);
    const Report r = bochner_pointwise(wg, sample(g, u), N, discretization_tolerance(g), regular_fraction);
    const double e = r.metrics.at(infinite ? "max_abs_residual" : "max_negative_slack").get<double>();
    errors.push_back(e);
    hs.push_back(g.h.maxCoeff());
    per_level.push_back({{"nodes_per_axis", level}, {"h", g.h.maxCoeff()}, {"error", e},
                         {"regular_nodes", r.metrics.at("regular_nodes")}, {"violations", r.violations}});
    // The identity is judged by its order; only the inequality counts violations.
    rep.violations = infinite ? 0 : r.violations;
    rep.tolerance = r.tolerance;
  }
  nlohmann::json orders = nlohmann::json::array();
  double last_order = INFINITY;
  for (std::size_t i = 1; i < errors.size(); ++i) {
    // Errors at roundoff level carry no order information.
    if (errors[i] < 1e-10 || errors[i - 1] < 1e-10) {
      orders.push_back(nullptr);
      last_order = INFINITY;
      continue;
    }
    last_order = std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]);
    orders.push_back(last_order);
  }
  rep.metrics = {{"levels", per_level}, {"orders", orders}, {"final_error", errors.back()}};
  rep.resolution = {{"h", hs}};
  if (infinite && last_order < 1.8) {
    rep.failed = true;
    rep.notes.push_back("refinement order below 1.8");
  }
  return rep;
}

Report bochner_integrated(const WeightedGrid& wg, const GridField& u, const GridField& phi, double N, double tol) {
  const Grid& g = wg.grid();
  const int n = g.dim;
  if (!(phi.grid == g) || phi.comps != 1) throw ValidationError("phi must be a scalar field on the grid of u", "phi");
  for (double v : phi.values)
    if (v < 0.0 || !std::isfinite(v)) throw ValidationError("phi must be nonnegative", "phi");
  const bool infinite = std::isinf(N);
  const BochnerTerms t = bochner_terms(wg, u, N);
  for (std::size_t p = 0; p < g.size(); ++p)
    if (phi(p) != 0.0 && t.grad.active[p] && !t.evaluated[p])
      throw ValidationError("phi must vanish within 7 nodes of patch faces", "phi");

  GridField f(g);
  for (std::size_t p = 0; p < g.size(); ++p) f(p) = 0.5 * t.grad.dual(p) * t.grad.dual(p);
  const GridField dphi = differential(phi);
  const GridField df = differential(f);
  const FrozenMetric metric = freeze_metric(wg, t.grad, Fallback::zero_flux);

  double lhs = 0.0, rhs = 0.0, rhs_inf = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    double flux = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) flux += dphi(p, i) * metric.g_inv(p, i * n + j) * df(p, j);
    lhs -= flux * wg.m(p);
    if (!t.evaluated[p] || phi(p) == 0.0) continue;
    const double w = phi(p) * wg.m(p);
    const double rn = infinite ? t.ric_inf(p) : t.ric_n(p) + t.lap(p) * t.lap(p) / N;
    rhs += w * (t.drift(p) + rn);
    rhs_inf += w * (t.drift(p) + t.ric_inf(p) + t.hs2(p));
  }
  const double slack = lhs - rhs;

  Report rep("bochner_integrated", wg.structure().hash_hex());
  rep.params = {{"N", num(N)}};
  rep.resolution = resolution_of(g, 0.0);
  rep.tolerance = tol;
  rep.metrics = {{"lhs", lhs}, {"rhs", num(rhs)}, {"slack", num(slack)}, {"equality_residual", lhs - rhs_inf}};
  if (!(slack >= -tol)) rep.violations = 1;
  return rep;
}

Report bakry_emery(const WeightedGrid& wg, const Trajectory& traj, double s, double t, double K,
                   const BakryEmeryOptions& opt) {
  if (!(s <= t)) throw ValidationError("bakry_emery needs s <= t", "s");
  const Grid& g = wg.grid();
  const std::size_t is = traj.index_of(s), it = traj.index_of(t);
  const GradientField gs = gradient_field(wg, traj.fields[is], {traj.threshold_fraction});
  const GradientField gt = gradient_field(wg, traj.fields[it], {traj.threshold_fraction});
  GridField fs(g);
  for (std::size_t p = 0; p < g.size(); ++p) fs(p) = gs.dual(p) * gs.dual(p);
  const double factor = std::exp(-2.0 * K * (t - s));

  Report rep("bakry_emery", wg.structure().hash_hex());
  rep.params = {{"s", s},  {"t", t}, {"K", K}, {"fallback", to_string(opt.fallback)},
                {"alternate", to_string(opt.alternate)}, {"operator", opt.op == LinearOperator::compact ? "compact" : "wide"}};
  rep.resolution = resolution_of(g, traj.tau);
  rep.tolerance = opt.tolerance;
  rep.notes.push_back("conditional on K_est");

  GridField pf = fs;
  double delta = 0.0;
  if (it != is) {
    SemigroupOptions so;
    so.fallback = opt.fallback;
    so.op = opt.op;
    so.require_m_matrix = false;
    so.cg_tolerance = traj.cg_tolerance;
    const SemigroupResult r = linearized_semigroup(wg, traj, std::vector<GridField>{fs}, s, t, so);
    pf = r.h[0];
    rep.metrics["m_matrix"] = r.m_matrix;
    rep.metrics["min_weight"] = r.min_weight;
    rep.metrics["fallback_nodes"] = r.fallback_nodes;
    rep.metrics["steps"] = r.steps;
    if (!r.m_matrix) rep.notes.push_back("compact operator lost the M-matrix property; P is not positivity preserving");
    if (opt.alternate != Fallback::none && opt.alternate != opt.fallback) {
      so.fallback = opt.alternate;
      const GridField alt = linearized_semigroup(wg, traj, std::vector<GridField>{fs}, s, t, so).h[0];
      for (std::size_t p = 0; p < g.size(); ++p) delta = std::max(delta, factor * std::abs(alt(p) - pf(p)));
    }
  }
  std::vector<double> slack(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    slack[p] = factor * pf(p) - gt.dual(p) * gt.dual(p);
    if (slack[p] < -opt.tolerance) ++rep.violations;
  }
  rep.stats["slack"] = Stats::of(slack);
  rep.metrics["min_slack"] = signed_min(slack);
  rep.metrics["fallback_sensitivity"] = delta;
  if (delta > opt.tolerance) rep.notes.push_back("result is sensitive to the fallback reference vector");
  return rep;
}

Report lipschitz_decay(const WeightedGrid& wg, const Trajectory& traj, double K, const DistanceTable& table,
                       const LipschitzOptions& opt) {
  const Grid& g = wg.grid();
  if (traj.fields.empty()) throw ValidationError("empty trajectory", "trajectory");
  if (!(table.grid() == g)) throw ValidationError("distance table is on a different grid", "table");
  const int n = g.dim;

  // Neighbour offsets within the radius, excluding 0.
  std::vector<Index> offsets;
  const int r = std::max(opt.radius, 1);
  Index o{0, 0, 0};
  const int span = 2 * r + 1;
  int total = 1;
  for (int a = 0; a < n; ++a) total *= span;
  for (int k = 0; k < total; ++k) {
    int rem = k;
    bool zero = true;
    for (int a = 0; a < n; ++a) {
      o[a] = rem % span - r;
      rem /= span;
      zero = zero && o[a] == 0;
    }
    if (!zero) offsets.push_back(o);
  }
  Rng rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
  std::vector<std::pair<std::size_t, std::size_t>> far;
  for (std::size_t k = 0; k < opt.far_pairs; ++k) {
    const std::size_t x = pick(rng), y = pick(rng);
    if (x != y) far.emplace_back(x, y);
  }

  auto lip = [&](const GridField& u) {
    std::vector<double> local(g.size(), 0.0);
    parallel_for(g.size(), [&](std::size_t x) {
      const Index mx = g.multi(x);
      double best = 0.0;
      for (const Index& off : offsets) {
        Index my = mx;
        bool inside = true;
        for (int a = 0; a < n; ++a) {
          my[a] += off[a];
          if (!g.periodic && (my[a] < 0 || my[a] >= g.shape[a])) inside = false;
        }
        if (!inside) continue;
        const std::size_t y = g.flat(my);
        const double d = table(x, y);
        if (d > 0.0) best = std::max(best, (u(y) - u(x)) / d);
      }
      local[x] = best;
    });
    double best = *std::max_element(local.begin(), local.end());
    for (const auto& [x, y] : far) {
      const double d = table(x, y);
      if (d > 0.0) best = std::max(best, (u(y) - u(x)) / d);
    }
    return best;
  };

  const std::size_t nt = traj.times.size();
  std::vector<double> lips(nt), sups(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    lips[k] = lip(traj.fields[k]);
    const GradientField gr = gradient_field(wg, traj.fields[k], {traj.threshold_fraction});
    sups[k] = *std::max_element(gr.dual.values.begin(), gr.dual.values.end());
  }

  Report rep("lipschitz_decay", wg.structure().hash_hex());
  rep.params = {{"K", K}, {"radius", r}, {"far_pairs", far.size()}, {"seed", opt.seed}};
  rep.resolution = resolution_of(g, traj.tau);
  rep.tolerance = opt.tolerance;
  rep.notes.push_back("conditional on K_est");
  std::vector<double> slack_lip, slack_sup;
  for (std::size_t k = 1; k < nt; ++k) {
    const double step = std::exp(-K * (traj.times[k] - traj.times[k - 1]));
    const double from0 = std::exp(-K * (traj.times[k] - traj.times[0]));
    for (const double sl : {step * lips[k - 1] - lips[k], from0 * lips[0] - lips[k]}) {
      slack_lip.push_back(sl);
      if (sl < -opt.tolerance) ++rep.violations;
    }
    for (const double sl : {step * sups[k - 1] - sups[k], from0 * sups[0] - sups[k]}) {
      slack_sup.push_back(sl);
      if (sl < -opt.tolerance) ++rep.violations;
    }
  }
  rep.stats["lip_slack"] = Stats::of(slack_lip);
  rep.stats["sup_gradient_slack"] = Stats::of(slack_sup);
  rep.metrics = {{"times", traj.times}, {"lip", lips}, {"sup_gradient", sups}, {"distance_exact", table.exact()}};
  if (!table.exact()) rep.notes.push_back("graph distances overestimate d, so Lip is underestimated");
  return rep;
}

Report li_yau(const WeightedGrid& wg, const Trajectory& traj, const LiYauOptions& opt) {
  const Grid& g = wg.grid();
  const int n = g.dim;
  if (std::isnan(opt.N) || opt.N < n || std::isinf(opt.N)) throw ValidationError("N must lie in [n, inf)", "N");
  const double ct = curvature_term(opt.K, opt.theta);
  const std::size_t nt = traj.times.size();
  if (nt < 3) throw ValidationError("li_yau needs at least three snapshots", "snapshots");

  std::vector<GridField> logs(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    GridField l(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double v = traj.fields[k](p) + opt.shift;
      if (!(v > 0.0)) throw ValidationError("li_yau needs a positive solution (set a shift)", "u");
      l(p) = std::log(v);
    }
    logs[k] = std::move(l);
  }

  Report rep("li_yau", wg.structure().hash_hex());
  rep.params = {{"N", opt.N}, {"K", opt.K}, {"theta", opt.theta}, {"shift", opt.shift},
                {"time_origin", traj.time_origin}};
  rep.resolution = resolution_of(g, traj.tau);
  rep.tolerance = opt.tolerance;
  rep.notes.push_back("conditional on K_est");
  if (opt.shift != 0.0) rep.notes.push_back("u shifted by a constant to make it positive");

  std::vector<double> all;
  nlohmann::json per_time = nlohmann::json::array();
  nlohmann::json hotspot;
  double worst = INFINITY;
  double sharp_first = NAN;
  for (std::size_t k = 1; k + 1 < nt; ++k) {
    const double t = traj.time_origin + traj.times[k];
    if (!(t > 0.0)) continue;
    const double h1 = traj.times[k] - traj.times[k - 1], h2 = traj.times[k + 1] - traj.times[k];
    if (std::abs(h1 - h2) > 1e-9 * std::max(h1, h2)) continue;
    const double c = 1.0 / (h1 + h2);
    const GradientField gl = gradient_field(wg, logs[k], {traj.threshold_fraction});
    const double bound = opt.N * opt.theta * opt.theta * (1.0 / (2.0 * t) - ct);
    double tmin = INFINITY, region = 0.0;
    std::size_t region_nodes = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double dt_log = c * (logs[k + 1](p) - logs[k - 1](p));
      const double f = gl.dual(p);
      const double slack = bound - (f * f - opt.theta * dt_log);
      all.push_back(slack);
      tmin = std::min(tmin, slack);
      if (slack < worst) {
        worst = slack;
        hotspot = {{"t", t}, {"x", vec_json(g.node(p))}, {"u", traj.fields[k](p)}, {"F_grad_log_u", f}};
      }
      if (slack < -opt.tolerance) ++rep.violations;
      if (opt.center) {
        const Vec x = g.node(p);
        double d2 = 0.0;
        for (int a = 0; a < n; ++a) {
          double d = x(a) - (*opt.center)(a);
          const double L = wg.structure().periods()(a);
          if (std::isfinite(L)) d -= L * std::round(d / L);
          d2 += d * d;
        }
        if (d2 <= opt.radius * opt.radius) {
          region = std::max(region, std::abs(slack));
          ++region_nodes;
        }
      }
    }
    nlohmann::json entry = {{"t", t}, {"min_slack", tmin}};
    if (opt.center) {
      entry["region_max_abs_slack"] = region;
      entry["region_nodes"] = region_nodes;
      if (std::isnan(sharp_first)) sharp_first = region;
    }
    per_time.push_back(entry);
  }
  if (all.empty()) {
    rep.empty = true;
    rep.notes.push_back("no snapshot with t > 0 and equally spaced neighbours");
  }
  rep.stats["slack"] = Stats::of(all);
  rep.metrics = {{"per_time", per_time}, {"min_slack", all.empty() ? 0.0 : signed_min(all)}, {"hotspot", hotspot}};
  if (opt.center) rep.metrics["sharpness_first_time"] = num(sharp_first);
  return rep;
}

std::string to_string(HarnackOrientation o) { return o == HarnackOrientation::stated ? "stated" : "reversed"; }

std::vector<HarnackPair> random_harnack_pairs(const Trajectory& traj, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> usable;
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    if (traj.time_origin + traj.times[k] > 0.0) usable.push_back(k);
  if (usable.size() < 2) throw ValidationError("Harnack pairs need two snapshots with t > 0", "snapshots");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> node(0, traj.grid.size() - 1);
  std::uniform_int_distribution<std::size_t> idx(0, usable.size() - 1);
  std::vector<HarnackPair> pairs;
  pairs.reserve(count);
  while (pairs.size() < count) {
    std::size_t a = usable[idx(rng)], b = usable[idx(rng)];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs.push_back({traj.times[a], node(rng), traj.times[b], node(rng)});
  }
  return pairs;
}

Report harnack(const WeightedGrid& wg, const Trajectory& traj, const DistanceTable& table,
               const std::vector<HarnackPair>& pairs, const HarnackOptions& opt) {
  const Grid& g = wg.grid();
  if (std::isnan(opt.N) || opt.N < g.dim || std::isinf(opt.N)) throw ValidationError("N must lie in [n, inf)", "N");
  if (!(table.grid() == g)) throw ValidationError("distance table is on a different grid", "table");
  const double ct = curvature_term(opt.K, opt.theta);

  struct Eval {
    double stated, reversed;
  };
  std::vector<Eval> ev(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const HarnackPair& q = pairs[i];
    const std::string path = "pairs[" + std::to_string(i) + "]";
    if (q.x >= g.size() || q.y >= g.size()) throw ValidationError("node outside the grid", path);
    const double s = traj.time_origin + q.s, t = traj.time_origin + q.t;
    if (!(s > 0.0 && q.s < q.t)) throw ValidationError("pair needs 0 < s < t", path);
    const double us = traj.at(q.s)(q.x), ut = traj.at(q.t)(q.y);
    if (us < 0.0 || ut < 0.0) throw ValidationError("Harnack needs a nonnegative solution", path);
    const double base = 0.5 * opt.theta * opt.N * std::log(t / s) - opt.theta * ct * opt.N * (t - s);
    auto slack = [&](double d) {
      if (ut == 0.0) return -us;
      const double e = std::log(ut) + base + opt.theta * d * d / (4.0 * (t - s));
      return e > 700.0 ? INFINITY : std::exp(e) - us;
    };
    ev[i] = {slack(table(q.x, q.y)), slack(table(q.y, q.x))};
  }

  Report rep("harnack", wg.structure().hash_hex());
  rep.params = {{"N", opt.N}, {"K", opt.K}, {"theta", opt.theta}, {"orientation", to_string(opt.orientation)},
                {"pairs", pairs.size()}, {"time_origin", traj.time_origin}};
  rep.resolution = resolution_of(g, traj.tau);
  rep.tolerance = opt.tolerance;
  rep.notes.push_back("conditional on K_est");
  std::vector<double> primary, other;
  std::size_t bad_stated = 0, bad_reversed = 0;
  for (const Eval& e : ev) {
    const bool stated = opt.orientation == HarnackOrientation::stated;
    primary.push_back(stated ? e.stated : e.reversed);
    other.push_back(stated ? e.reversed : e.stated);
    if (e.stated < -opt.tolerance) ++bad_stated;
    if (e.reversed < -opt.tolerance) ++bad_reversed;
  }
  rep.violations = opt.orientation == HarnackOrientation::stated ? bad_stated : bad_reversed;
  rep.stats["slack"] = Stats::of(primary);
  rep.stats["slack_other_orientation"] = Stats::of(other);
  rep.metrics = {{"violations_stated", bad_stated},
                 {"violations_reversed", bad_reversed},
                 {"min_slack", primary.empty() ? 0.0 : signed_min(primary)},
                 {"distance_exact", table.exact()}};
  if (!table.exact()) rep.notes.push_back("graph distances overestimate d, which loosens the bound");
  return rep;
}

}  // namespace finsler
