#include "finsler/geodesic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <boost/graph/compressed_sparse_row_graph.hpp>
#include <boost/graph/dijkstra_shortest_paths.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;

std::string describe(const Vec& a) {
  std::ostringstream os;
  os.precision(10);
  os << '(';
  for (Eigen::Index i = 0; i < a.size(); ++i) os << (i ? ", " : "") << a(i);
  os << ')';
  return os.str();
}

void check_dims(const FinslerStructure& fs, const Vec& a, const Vec& b) {
  if (a.size() != fs.dim() || b.size() != fs.dim()) throw ValidationError("point and vector must have dim components");
}

Vec head(const State& y, int n, int offset) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = y[static_cast<std::size_t>(offset + i)];
  return v;
}

/// Geodesic ODE as a first-order system on (x, ẋ).
struct GeodesicSystem {
  const FinslerStructure& fs;
  int n;
  Vec* last_x;
  void operator()(const State& y, State& dy, double) const {
    const Vec x = head(y, n, 0), v = head(y, n, n);
    if (last_x) *last_x = x;
    const Vec G = spray(fs, x, v);
    for (int i = 0; i < n; ++i) {
      dy[static_cast<std::size_t>(i)] = v(i);
      dy[static_cast<std::size_t>(n + i)] = -G(i);
    }
  }
};

/// Geodesic plus variational equations J̈ = −G_x J − G_v J̇, J(0) = 0, J̇(0) = I.
struct VariationalSystem {
  const FinslerStructure& fs;
  int n;
  void operator()(const State& y, State& dy, double) const {
    const Vec x = head(y, n, 0), v = head(y, n, n);
    const SprayJet s = spray_jet(fs, x, v);
    Mat J(n, n), Jd(n, n);
    const std::size_t o = static_cast<std::size_t>(2 * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        J(i, j) = y[o + static_cast<std::size_t>(i * n + j)];
        Jd(i, j) = y[o + static_cast<std::size_t>(n * n + i * n + j)];
      }
    const Mat Jdd = -s.Gx * J - s.Gv * Jd;
    for (int i = 0; i < n; ++i) {
      dy[static_cast<std::size_t>(i)] = v(i);
      dy[static_cast<std::size_t>(n + i)] = -s.G(i);
      for (int j = 0; j < n; ++j) {
        dy[o + static_cast<std::size_t>(i * n + j)] = Jd(i, j);
        dy[o + static_cast<std::size_t>(n * n + i * n + j)] = Jdd(i, j);
      }
    }
  }
};

/// Wraps periodic components of a displacement to [−L/2, L/2).
Vec minimal_image(const FinslerStructure& fs, Vec d) {
  for (int i = 0; i < fs.dim(); ++i)
    if (fs.is_periodic(i)) {
      const double L = fs.periods()(i);
      d(i) -= L * std::floor(d(i) / L + 0.5);
    }
  return d;
}

/// F-length of the straight segment from a to a + d, 3-point Gauss-Legendre.
double segment_length(const FinslerStructure& fs, const Vec& a, const Vec& d) {
  if (d.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  if (fs.position_independent()) return fs.F(a, d);
  static const double q = std::sqrt(0.6);
  return (5.0 * fs.F(Vec(a + 0.5 * (1 - q) * d), d) + 8.0 * fs.F(Vec(a + 0.5 * d), d) +
          5.0 * fs.F(Vec(a + 0.5 * (1 + q) * d), d)) /
         18.0;
}

/// Primitive lattice offsets with components in {−2, …, 2}.
std::vector<Index> stencil(int n) {
  std::vector<Index> out;
  const int lim = 2;
  Index o{0, 0, 0};
  const int total = static_cast<int>(std::pow(2 * lim + 1, n));
  for (int c = 0; c < total; ++c) {
    int r = c, g = 0;
    bool zero = true;
    for (int i = 0; i < n; ++i) {
      o[i] = r % (2 * lim + 1) - lim;
      r /= 2 * lim + 1;
      g = std::gcd(g, std::abs(o[i]));
      zero = zero && o[i] == 0;
    }
    if (!zero && g == 1) out.push_back(o);
  }
  return out;
}

struct EdgeWeight {
  double w;
};
using CsrGraph = boost::compressed_sparse_row_graph<boost::directedS, boost::no_property, EdgeWeight>;

struct GridGraph {
  CsrGraph graph;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

/// Grid graph with edge weight = F-length of the straight move. `reversed`
/// flips every edge, so that single-source runs give distances *to* the source.
GridGraph grid_graph(const FinslerStructure& fs, const Grid& grid, bool reversed) {
  const int n = grid.dim;
  const auto offs = stencil(n);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<EdgeWeight> weights;
  edges.reserve(grid.size() * offs.size());
  weights.reserve(grid.size() * offs.size());
  for (std::size_t a = 0; a < grid.size(); ++a) {
    const Index m = grid.multi(a);
    const Vec xa = grid.node(m);
    for (const Index& o : offs) {
      Index t = m;
      bool inside = true;
      for (int i = 0; i < n; ++i) {
        t[i] += o[i];
        if (!grid.periodic && (t[i] < 0 || t[i] >= grid.shape[i])) inside = false;
      }
      if (!inside) continue;
      Vec d(n);
      for (int i = 0; i < n; ++i) d(i) = o[i] * grid.h(i);
      const std::size_t b = grid.flat(t);
      edges.emplace_back(reversed ? b : a, reversed ? a : b);
      weights.push_back({segment_length(fs, xa, d)});
    }
  }
  GridGraph g{CsrGraph(boost::edges_are_unsorted_multi_pass, edges.begin(), edges.end(), weights.begin(), grid.size()),
              std::move(edges)};
  return g;
}

std::vector<double> dijkstra(const CsrGraph& g, std::size_t source, std::vector<std::size_t>* pred = nullptr) {
  const std::size_t N = boost::num_vertices(g);
  std::vector<double> dist(N);
  std::vector<std::size_t> p(N);
  boost::dijkstra_shortest_paths(
      g, source,
      boost::weight_map(boost::get(&EdgeWeight::w, g))
          .distance_map(boost::make_iterator_property_map(dist.begin(), boost::get(boost::vertex_index, g)))
          .predecessor_map(boost::make_iterator_property_map(p.begin(), boost::get(boost::vertex_index, g))));
  if (pred) *pred = std::move(p);
  return dist;
}

std::size_t nearest_node(const Grid& grid, const Vec& x) {
  Index m{0, 0, 0};
  for (int i = 0; i < grid.dim; ++i) {
    m[i] = static_cast<int>(std::lround((x(i) - grid.origin(i)) / grid.h(i)));
    if (!grid.periodic) m[i] = std::clamp(m[i], 0, grid.shape[i] - 1);
  }
  return grid.flat(m);
}

/// Closed-form distance for position-independent norms: min over lattice
/// translates of F(y − x + kL).
DistanceResult minkowski_distance(const FinslerStructure& fs, const Vec& x, const Vec& y) {
  const int n = fs.dim();
  Vec d0 = y - x;
  std::vector<int> axes;
  for (int i = 0; i < n; ++i)
    if (fs.is_periodic(i)) {
      const double L = fs.periods()(i);
      d0(i) -= L * std::floor(d0(i) / L);
      axes.push_back(i);
    }
  DistanceResult best;
  best.value = INFINITY;
  const int span = 5;
  int total = 1;
  for (std::size_t a = 0; a < axes.size(); ++a) total *= span;
  for (int c = 0; c < total; ++c) {
    Vec d = d0;
    int r = c;
    for (int ax : axes) {
      d(ax) += (r % span - 2) * fs.periods()(ax);
      r /= span;
    }
    const double f = d.cwiseAbs().maxCoeff() == 0.0 ? 0.0 : fs.F(x, d);
    if (f < best.value) {
      best.value = f;
      best.target = x + d;
      best.velocity = d;
    }
  }
  best.status = DistanceStatus::exact;
  return best;
}

/// Gradient of the discrete energy K Σ F²(mid_i, Δ_i) with respect to interior nodes.
double energy_and_gradient(const FinslerStructure& fs, const std::vector<Vec>& p, std::vector<Vec>* grad) {
  using ad::Jet1;
  const int n = fs.dim();
  const int K = static_cast<int>(p.size()) - 1;
  double E = 0.0;
  if (grad) grad->assign(p.size(), Vec::Zero(n));
  for (int s = 0; s < K; ++s) {
    const Vec mid = 0.5 * (p[s] + p[s + 1]);
    const Vec d = p[s + 1] - p[s];
    if (!grad) {
      E += fs.F2(mid, d);
      continue;
    }
    std::array<Jet1, kMaxDim> xj, vj;
    for (int i = 0; i < n; ++i) {
      xj[i] = Jet1::variable(mid(i), i, 2 * n, 1);
      vj[i] = Jet1::variable(d(i), n + i, 2 * n, 1);
    }
    const Jet1 f = fs.F2<Jet1>(std::span<const Jet1>(xj.data(), n), std::span<const Jet1>(vj.data(), n));
    E += f.value();
    for (int i = 0; i < n; ++i) {
      (*grad)[s](i) += K * (0.5 * f.d(i) - f.d(n + i));
      (*grad)[s + 1](i) += K * (0.5 * f.d(i) + f.d(n + i));
    }
  }
  return K * E;
}

/// Solves the tridiagonal system 2K(2, −1) z = r on interior nodes (Dirichlet ends).
std::vector<Vec> sobolev_precondition(const std::vector<Vec>& r) {
  const int K = static_cast<int>(r.size()) - 1;
  const int m = K - 1;
  std::vector<Vec> z(r.size(), Vec::Zero(r[0].size()));
  if (m < 1) return z;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = 4.0 * K;
    if (i > 0) T(i, i - 1) = -2.0 * K;
    if (i + 1 < m) T(i, i + 1) = -2.0 * K;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(T);
  for (Eigen::Index c = 0; c < r[0].size(); ++c) {
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) b(i) = r[i + 1](c);
    const Eigen::VectorXd s = ldlt.solve(b);
    for (int i = 0; i < m; ++i) z[i + 1](c) = s(i);
  }
  return z;
}

void minimize_energy(const FinslerStructure& fs, std::vector<Vec>& p, int iterations) {
  std::vector<Vec> grad;
  double E = energy_and_gradient(fs, p, &grad);
  for (int it = 0; it < iterations; ++it) {
    grad.front().setZero();
    grad.back().setZero();
    const std::vector<Vec> step = sobolev_precondition(grad);
    double slope = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) slope -= grad[i].dot(step[i]);
    if (-slope <= 1e-26 * std::max(1.0, E)) break;
    double lambda = 1.0;
    std::vector<Vec> trial(p.size());
    double Et = 0.0;
    for (int tries = 0; tries < 40; ++tries) {
      for (std::size_t i = 0; i < p.size(); ++i) trial[i] = p[i] - lambda * step[i];
      Et = energy_and_gradient(fs, trial, nullptr);
      if (Et <= E + 1e-4 * lambda * slope) break;
      lambda *= 0.5;
    }
    if (!(Et < E)) break;
    p = trial;
    E = energy_and_gradient(fs, p, &grad);
  }
}

std::vector<Vec> resample(const std::vector<Vec>& path, int K) {
  std::vector<double> s(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) s[i] = s[i - 1] + (path[i] - path[i - 1]).norm();
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(K + 1));
  std::size_t seg = 0;
  for (int k = 0; k <= K; ++k) {
    const double target = s.back() * k / K;
    while (seg + 2 < path.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double w = len > 0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back((1 - w) * path[seg] + w * path[seg + 1]);
  }
  out.front() = path.front();
  out.back() = path.back();
  return out;
}

/// Newton shooting for v with exp_x(v) = target, started at v0.
std::optional<Vec> shoot(const FinslerStructure& fs, const Vec& x, const Vec& target, Vec v, const DistanceOptions& opt) {
  const double scale = std::max(1.0, (target - x).norm());
  Vec r;
  try {
    ExpDerivative e = exp_with_differential(fs, x, v);
    r = e.point - target;
    for (int it = 0; it < opt.shooting_iterations; ++it) {
      if (r.norm() <= opt.shooting_tol * scale) return v;
      const Vec step = -e.dv.partialPivLu().solve(r);
      double lambda = 1.0;
      bool accepted = false;
      for (int tries = 0; tries < 12; ++tries) {
        const Vec vt = v + lambda * step;
        if (vt.cwiseAbs().maxCoeff() > 0.0) {
          ExpDerivative et = exp_with_differential(fs, x, vt);
          const Vec rt = et.point - target;
          if (rt.norm() < r.norm()) {
            v = vt;
            e = std::move(et);
            r = rt;
            accepted = true;
            break;
          }
        }
        lambda *= 0.5;
      }
      if (!accepted) break;
    }
    if (r.norm() <= opt.shooting_tol * scale) return v;
  } catch (const DomainError&) {
  } catch (const ConvergenceError&) {
  }
  return std::nullopt;
}

}  // namespace

GeodesicPath integrate_geodesic(const FinslerStructure& fs, const Vec& x, const Vec& v, double T, int steps,
                                const GeodesicOptions& opt) {
  check_dims(fs, x, v);
  if (steps < 1) throw ValidationError("steps must be at least 1", "steps");
  if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("integration time must be positive", "T");
  if (v.cwiseAbs().maxCoeff() == 0.0) throw ValidationError("initial velocity must be nonzero", "v");
  const int n = fs.dim();
  GeodesicPath path;
  path.tolerance = opt.rel_tol;
  State y(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = x(i);
    y[static_cast<std::size_t>(n + i)] = v(i);
  }
  std::vector<double> times(static_cast<std::size_t>(steps + 1));
  for (int k = 0; k <= steps; ++k) times[static_cast<std::size_t>(k)] = T * k / steps;
  Vec last = x;
  GeodesicSystem sys{fs, n, &last};
  auto observer = [&](const State& s, double t) { path.samples.push_back({t, head(s, n, 0), head(s, n, n)}); };
  auto stepper = odeint::make_controlled(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
  try {
    path.steps_taken = static_cast<int>(odeint::integrate_times(stepper, sys, y, times.begin(), times.end(),
                                                                T / steps, observer,
                                                                odeint::max_step_checker(opt.max_steps)));
  } catch (const DomainError& e) {
    throw DomainError(std::string("geodesic left the domain near x = ") + describe(last) + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConvergenceError("geodesic step size collapsed near x = " + describe(last) + " (" + e.what() +
                           "); the structure may be close to degenerate");
  }
  const double f0 = fs.F(x, v);
  for (const auto& s : path.samples)
    path.speed_drift = std::max(path.speed_drift, std::abs(fs.F(s.x, s.xdot) - f0) / f0);
  return path;
}

std::pair<Vec, Vec> geodesic_flow_rk4(const FinslerStructure& fs, const Vec& x, const Vec& v, double T, int steps) {
  check_dims(fs, x, v);
  if (steps < 1) throw ValidationError("steps must be at least 1", "steps");
  const int n = fs.dim();
  State y(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = x(i);
    y[static_cast<std::size_t>(n + i)] = v(i);
  }
  odeint::integrate_n_steps(odeint::runge_kutta4<State>(), GeodesicSystem{fs, n, nullptr}, y, 0.0, T / steps, steps);
  return {head(y, n, 0), head(y, n, n)};
}

Vec exp_map(const FinslerStructure& fs, const Vec& x, const Vec& v, const GeodesicOptions& opt) {
  check_dims(fs, x, v);
  if (v.cwiseAbs().maxCoeff() == 0.0) return fs.reduce(x);
  if (fs.position_independent()) return fs.reduce(Vec(x + v));
  return fs.reduce(integrate_geodesic(fs, x, v, 1.0, 1, opt).samples.back().x);
}

ChartPoint exp_map(const FinslerStructure& fs, const ChartPoint& x, const TangentVector& v) {
  return {exp_map(fs, x.coords, v.comps)};
}

ExpDerivative exp_with_differential(const FinslerStructure& fs, const Vec& x, const Vec& v, const GeodesicOptions& opt) {
  check_dims(fs, x, v);
  const int n = fs.dim();
  if (fs.position_independent() || v.cwiseAbs().maxCoeff() == 0.0) {
    if (v.cwiseAbs().maxCoeff() == 0.0 && !fs.position_independent())
      throw DomainError("exponential map differential is undefined at the zero vector");
    return {Vec(x + v), Mat::Identity(n, n)};
  }
  State y(static_cast<std::size_t>(2 * n + 2 * n * n), 0.0);
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = x(i);
    y[static_cast<std::size_t>(n + i)] = v(i);
    y[static_cast<std::size_t>(2 * n + n * n + i * n + i)] = 1.0;
  }
  auto stepper = odeint::make_controlled(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
  try {
    odeint::integrate_adaptive(stepper, VariationalSystem{fs, n}, y, 0.0, 1.0, 0.05);
  } catch (const std::runtime_error& e) {
    if (dynamic_cast<const DomainError*>(&e)) throw;
    throw ConvergenceError(std::string("variational integration failed: ") + e.what());
  }
  ExpDerivative out{head(y, n, 0), Mat(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.dv(i, j) = y[static_cast<std::size_t>(2 * n + i * n + j)];
  return out;
}

std::string to_string(DistanceStatus s) {
  switch (s) {
    case DistanceStatus::exact:
      return "EXACT";
    case DistanceStatus::converged:
      return "CONVERGED";
    case DistanceStatus::upper_bound_only:
      return "UPPER_BOUND_ONLY";
  }
  return "";
}

double polyline_length(const FinslerStructure& fs, const std::vector<Vec>& nodes) {
  double L = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) L += segment_length(fs, nodes[i], Vec(nodes[i + 1] - nodes[i]));
  return L;
}

DistanceResult distance_detail(const FinslerStructure& fs, const Vec& x, const Vec& y, const DistanceOptions& opt) {
  check_dims(fs, x, y);
  const int n = fs.dim();
  const Vec xr = fs.reduce(x), yr = fs.reduce(y);
  if (fs.position_independent()) return minkowski_distance(fs, xr, yr);
  if ((minimal_image(fs, Vec(yr - xr))).cwiseAbs().maxCoeff() == 0.0)
    return {0.0, DistanceStatus::exact, xr, Vec::Zero(n)};

  // Coarse phase: shortest path on a grid graph over the cell (or a box
  // around x and y on open axes).
  Vec lo(n), hi(n);
  bool periodic = true;
  for (int i = 0; i < n; ++i) periodic = periodic && fs.is_periodic(i);
  Grid g;
  if (periodic) {
    g = Grid::periodic_cell(fs, std::max(opt.graph_nodes, 5));
  } else {
    for (int i = 0; i < n; ++i) {
      const double pad = std::max(1.0, 0.5 * std::abs(yr(i) - xr(i)));
      lo(i) = std::min(xr(i), yr(i)) - pad;
      hi(i) = std::max(xr(i), yr(i)) + pad;
    }
    Index shape{1, 1, 1};
    for (int i = 0; i < n; ++i) shape[i] = std::max(opt.graph_nodes, 5);
    g = Grid::patch(lo, hi, shape);
  }
  const GridGraph gg = grid_graph(fs, g, false);
  const std::size_t s = nearest_node(g, xr), t = nearest_node(g, yr);
  std::vector<std::size_t> pred;
  dijkstra(gg.graph, s, &pred);
  std::vector<std::size_t> chain{t};
  while (chain.back() != s) chain.push_back(pred[chain.back()]);
  std::reverse(chain.begin(), chain.end());
  std::vector<Vec> path{xr};
  Vec pos = xr + minimal_image(fs, Vec(g.node(s) - xr));
  path.push_back(pos);
  for (std::size_t k = 1; k < chain.size(); ++k) {
    pos += minimal_image(fs, Vec(g.node(chain[k]) - g.node(chain[k - 1])));
    path.push_back(pos);
  }
  const Vec target = pos + minimal_image(fs, Vec(yr - pos));
  path.push_back(target);
  path.erase(std::unique(path.begin(), path.end(), [](const Vec& a, const Vec& b) { return (a - b).norm() == 0.0; }),
             path.end());

  // Continuous refinement: discrete energy, then shooting.
  std::vector<Vec> poly = resample(path, opt.polyline_nodes);
  minimize_energy(fs, poly, opt.energy_iterations);
  const double poly_len = polyline_length(fs, poly);
  DistanceResult res{poly_len, DistanceStatus::upper_bound_only, target, Vec()};
  const Vec v0 = opt.polyline_nodes * (poly[1] - poly[0]);
  if (auto v = shoot(fs, xr, target, v0, opt)) {
    const double d = fs.F(xr, *v);
    if (d <= poly_len * (1 + 1e-9)) {
      res.value = d;
      res.status = DistanceStatus::converged;
      res.velocity = *v;
    }
  }
  return res;
}

double distance(const FinslerStructure& fs, const Vec& x, const Vec& y) { return distance_detail(fs, x, y).value; }

double distance(const FinslerStructure& fs, const ChartPoint& x, const ChartPoint& y) {
  return distance(fs, x.coords, y.coords);
}

std::uint64_t distance_table_key(const FinslerStructure& fs, const Grid& grid) {
  return fnv1a(fs.hash_hex() + grid.to_json().dump());
}

DistanceTable DistanceTable::build(const FinslerStructure& fs, const Grid& grid) {
  if (grid.dim != fs.dim()) throw ValidationError("grid dimension does not match structure", "grid");
  DistanceTable tab;
  tab.grid_ = grid;
  tab.key_ = distance_table_key(fs, grid);
  const int n = grid.dim;
  if (fs.position_independent()) {
    tab.exact_ = true;
    tab.by_offset_ = true;
    // Offsets o_i ∈ [0, N_i) for periodic grids, o_i + N_i − 1 ∈ [0, 2N_i − 1) for patches.
    Index ext{1, 1, 1};
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
      ext[i] = grid.periodic ? grid.shape[i] : 2 * grid.shape[i] - 1;
      total *= static_cast<std::size_t>(ext[i]);
    }
    tab.d_.resize(total);
    const Vec origin = Vec::Zero(n);
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t r = k;
      Vec d(n);
      for (int i = n - 1; i >= 0; --i) {
        int o = static_cast<int>(r % static_cast<std::size_t>(ext[i]));
        r /= static_cast<std::size_t>(ext[i]);
        if (!grid.periodic) o -= grid.shape[i] - 1;
        d(i) = o * grid.h(i);
      }
      tab.d_[k] = grid.periodic ? minkowski_distance(fs, origin, d).value
                                : (d.cwiseAbs().maxCoeff() == 0.0 ? 0.0 : fs.F(origin, d));
    }
    return tab;
  }
  const GridGraph gg = grid_graph(fs, grid, false);
  const std::size_t N = grid.size();
  tab.d_.resize(N * N);
#ifdef FINSLER_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(N); ++a) {
    const auto row = dijkstra(gg.graph, static_cast<std::size_t>(a));
    std::copy(row.begin(), row.end(), tab.d_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(a) * N));
  }
  return tab;
}

double DistanceTable::operator()(std::size_t from, std::size_t to) const {
  if (!by_offset_) return d_[from * grid_.size() + to];
  const Index a = grid_.multi(from), b = grid_.multi(to);
  std::size_t k = 0;
  for (int i = 0; i < grid_.dim; ++i) {
    int o = b[i] - a[i];
    int ext = grid_.shape[i];
    if (grid_.periodic) {
      if (o < 0) o += grid_.shape[i];
    } else {
      o += grid_.shape[i] - 1;
      ext = 2 * grid_.shape[i] - 1;
    }
    k = k * static_cast<std::size_t>(ext) + static_cast<std::size_t>(o);
  }
  return d_[k];
}

namespace {
constexpr char kMagic[8] = {'F', 'F', 'D', 'T', 'A', 'B', '0', '1'};
}

void DistanceTable::save(const std::filesystem::path& file) const {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw ValidationError("cannot write distance cache " + file.string(), "cache");
  const std::uint64_t count = d_.size();
  const std::uint8_t flags = static_cast<std::uint8_t>((exact_ ? 1 : 0) | (by_offset_ ? 2 : 0));
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&key_), sizeof key_);
  os.write(reinterpret_cast<const char*>(&flags), 1);
  os.write(reinterpret_cast<const char*>(&count), sizeof count);
  os.write(reinterpret_cast<const char*>(d_.data()), static_cast<std::streamsize>(count * sizeof(double)));
}

std::optional<DistanceTable> DistanceTable::load(const std::filesystem::path& file, std::uint64_t key) {
  std::ifstream is(file, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  std::uint64_t k = 0, count = 0;
  std::uint8_t flags = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&k), sizeof k);
  is.read(reinterpret_cast<char*>(&flags), 1);
  is.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0 || k != key || count > (1ull << 34)) return std::nullopt;
  DistanceTable tab;
  tab.key_ = k;
  tab.exact_ = flags & 1;
  tab.by_offset_ = flags & 2;
  tab.d_.resize(count);
  is.read(reinterpret_cast<char*>(tab.d_.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) return std::nullopt;
  return tab;
}

DistanceTable DistanceTable::cached(const FinslerStructure& fs, const Grid& grid, const std::filesystem::path& cache_dir) {
  const std::uint64_t key = distance_table_key(fs, grid);
  char name[40];
  std::snprintf(name, sizeof name, "dist_%016llx.bin", static_cast<unsigned long long>(key));
  const auto file = cache_dir / name;
  if (auto tab = load(file, key)) {
    tab->grid_ = grid;
    return *tab;
  }
  DistanceTable tab = build(fs, grid);
  std::filesystem::create_directories(cache_dir);
  tab.save(file);
  return tab;
}

JacobiFrame jacobi_frame(const FinslerStructure& fs, const Vec& x, const Vec& v, double t) {
  check_dims(fs, x, v);
  if (v.cwiseAbs().maxCoeff() == 0.0) throw DomainError("Jacobi frame is undefined at the zero vector");
  if (!(t > 0.0)) throw ValidationError("Jacobi frame time must be positive", "t");
  const int n = fs.dim();
  const int steps = std::max(8, static_cast<int>(std::ceil(t / 1e-3)));
  // g_v-orthonormal initial frame.
  const Mat g = fundamental_tensor(fs, x, v).g;
  const Mat Q = Eigen::LLT<Mat>(g).matrixU().solve(Mat::Identity(n, n));
  JacobiFrame fr;
  fr.t = t;
  fr.E.resize(n, n);
  fr.Edot.resize(n, n);
  const double h = 1e-4;
  for (int j = 0; j < n; ++j) {
    const Vec e = Q.col(j);
    auto diff = [&](double step) {
      const auto p = geodesic_flow_rk4(fs, Vec(x + step * e), v, t, steps);
      const auto m = geodesic_flow_rk4(fs, Vec(x - step * e), v, t, steps);
      return std::pair<Vec, Vec>{(p.first - m.first) / (2 * step), (p.second - m.second) / (2 * step)};
    };
    const auto d1 = diff(h), d2 = diff(h / 2);
    fr.E.col(j) = (4 * d2.first - d1.first) / 3;
    fr.Edot.col(j) = (4 * d2.second - d1.second) / 3;
  }
  const auto [xt, vt] = geodesic_flow_rk4(fs, x, v, t, steps);
  const Mat N = 0.5 * spray_jet(fs, xt, vt).Gv;
  const Eigen::JacobiSVD<Mat> svd(fr.E);
  const auto& sv = svd.singularValues();
  fr.condition = sv(0) / sv(n - 1);
  if (!(fr.condition <= 1e8))
    throw DomainError("ill-conditioned Jacobi frame (condition number " + std::to_string(fr.condition) + ")");
  fr.B = (fr.Edot + N * fr.E) * fr.E.inverse();
  return fr;
}

double jacobi_ricci_oracle(const FinslerStructure& fs, const Vec& x, const Vec& v, double T, int steps) {
  if (!(T > 0.0) || steps < 4) throw ValidationError("oracle needs T > 0 and at least 4 steps", "T");
  const double dt = std::min(1e-3, T / steps);
  auto trB = [&](double t) { return jacobi_frame(fs, x, v, t).B.trace(); };
  auto ric_at = [&](double t) {
    const JacobiFrame fr = jacobi_frame(fs, x, v, t);
    const double dtr = (trB(t + dt) - trB(t - dt)) / (2 * dt);
    return -(dtr + (fr.B * fr.B).trace());
  };
  // Cubic Lagrange extrapolation to t = 0.
  const std::array<double, 4> ts{T / 8, T / 4, T / 2, T};
  double out = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    double w = 1.0;
    for (std::size_t j = 0; j < ts.size(); ++j)
      if (j != k) w *= ts[j] / (ts[j] - ts[k]);
    out += w * ric_at(ts[k]);
  }
  return out;
}

double hopf_lax(const FinslerStructure& fs, const GridField& u, double t, const Vec& y) {
  if (!(t > 0.0)) throw ValidationError("Hopf-Lax time must be positive", "t");
  if (u.comps != 1) throw ValidationError("Hopf-Lax needs a scalar field", "u");
  const Grid& g = u.grid;
  std::vector<double> d(g.size());
  if (fs.position_independent()) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vec x = g.node(i);
      d[i] = g.periodic ? minkowski_distance(fs, x, y).value
                        : ((y - x).cwiseAbs().maxCoeff() == 0.0 ? 0.0 : fs.F(x, Vec(y - x)));
    }
  } else {
    const std::size_t k = nearest_node(g, y);
    if ((g.node(k) - y).norm() > 1e-12 * std::max(1.0, y.norm()))
      throw ValidationError("off-grid Hopf-Lax queries need a position-independent norm", "y");
    d = dijkstra(grid_graph(fs, g, true).graph, k);
  }
  double best = INFINITY;
  for (std::size_t i = 0; i < g.size(); ++i) best = std::min(best, d[i] * d[i] / (2 * t) + u.values[i]);
  return best;
}

GridField hopf_lax(const DistanceTable& table, const GridField& u, double t) {
  if (!(t > 0.0)) throw ValidationError("Hopf-Lax time must be positive", "t");
  if (!(u.grid == table.grid())) throw ValidationError("distance table grid does not match field grid", "u");
  GridField phi(u.grid);
  const std::size_t N = u.grid.size();
  for (std::size_t y = 0; y < N; ++y) {
    double best = INFINITY;
    for (std::size_t x = 0; x < N; ++x) {
      const double d = table(x, y);
      best = std::min(best, d * d / (2 * t) + u.values[x]);
    }
    phi.values[y] = best;
  }
  return phi;
}

}  // namespace finsler
