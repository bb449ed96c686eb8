#include "finsler/heat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "finsler/error.hpp"
#include "finsler/legendre.hpp"
#include "finsler/parallel.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// One row or column of a differentiation matrix along an axis: entries at
// index offsets relative to the node.
struct Stencil {
  std::array<int, 9> off{};
  std::array<double, 9> c{};
  int k = 0;
  void add(int o, double v) {
    for (int i = 0; i < k; ++i)
      if (off[i] == o) {
        c[i] += v;
        return;
      }
    off[k] = o;
    c[k] = v;
    ++k;
  }
};

struct Axis {
  int n = 0;
  std::size_t stride = 1;
  bool periodic = true;
  std::vector<Stencil> rows, cols;

  int coord(std::size_t p) const { return static_cast<int>((p / stride) % static_cast<std::size_t>(n)); }
  std::size_t shift(std::size_t p, int at, int o) const {
    int q = at + o;
    if (periodic) {
      q %= n;
      if (q < 0) q += n;
    }
    return p + static_cast<std::size_t>(static_cast<long long>(q - at) * static_cast<long long>(stride));
  }
};

Stencil row_stencil(int i, int n, bool periodic, double h) {
  static constexpr int centered_off[5] = {-2, -1, 0, 1, 2};
  static constexpr double centered[5] = {1, -8, 0, 8, -1};
  static constexpr double first[5] = {-25, 48, -36, 16, -3};
  static constexpr double second[5] = {-3, -10, 18, -6, 1};
  const double s = 1.0 / (12.0 * h);
  Stencil st;
  auto fill = [&](const double* c, int lo) {
    for (int j = 0; j < 5; ++j)
      if (c[j] != 0.0) st.add(lo + j, c[j] * s);
  };
  if (periodic || (i >= 2 && i <= n - 3)) {
    fill(centered, centered_off[0]);
  } else if (i == 0) {
    fill(first, 0);
  } else if (i == 1) {
    fill(second, -1);
  } else if (i == n - 2) {
    for (int j = 0; j < 5; ++j) st.add(1 - j, -second[j] * s);
  } else {
    for (int j = 0; j < 5; ++j) st.add(-j, -first[j] * s);
  }
  return st;
}

std::vector<Axis> make_axes(const Grid& g) {
  std::vector<Axis> axes(static_cast<std::size_t>(g.dim));
  std::size_t stride = 1;
  for (int a = g.dim - 1; a >= 0; --a) {
    Axis& ax = axes[static_cast<std::size_t>(a)];
    ax.n = g.shape[a];
    ax.stride = stride;
    ax.periodic = g.periodic;
    stride *= static_cast<std::size_t>(ax.n);
    ax.rows.resize(static_cast<std::size_t>(ax.n));
    ax.cols.resize(static_cast<std::size_t>(ax.n));
    for (int i = 0; i < ax.n; ++i) ax.rows[static_cast<std::size_t>(i)] = row_stencil(i, ax.n, g.periodic, g.h(a));
    for (int i = 0; i < ax.n; ++i) {
      const Stencil& r = ax.rows[static_cast<std::size_t>(i)];
      for (int k = 0; k < r.k; ++k) {
        int j = i + r.off[k];
        if (g.periodic) j = ((j % ax.n) + ax.n) % ax.n;
        // Column j holds D[i, j] at offset −o, the position of row i seen from j.
        ax.cols[static_cast<std::size_t>(j)].add(-r.off[k], r.c[k]);
      }
    }
  }
  return axes;
}

double derivative(const Axis& ax, const GridField& f, int comp, std::size_t p) {
  const int at = ax.coord(p);
  const Stencil& r = ax.rows[static_cast<std::size_t>(at)];
  double acc = 0.0;
  for (int k = 0; k < r.k; ++k) acc += r.c[k] * f(ax.shift(p, at, r.off[k]), comp);
  return acc;
}

double transpose_derivative(const Axis& ax, const GridField& w, int comp, std::size_t p) {
  const int at = ax.coord(p);
  const Stencil& c = ax.cols[static_cast<std::size_t>(at)];
  double acc = 0.0;
  for (int k = 0; k < c.k; ++k) acc += c.c[k] * w(ax.shift(p, at, c.off[k]), comp);
  return acc;
}

SpMat differentiation_matrix(const Grid& g, const Axis& ax) {
  const std::size_t N = g.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(N * 5);
  for (std::size_t p = 0; p < N; ++p) {
    const int at = ax.coord(p);
    const Stencil& r = ax.rows[static_cast<std::size_t>(at)];
    for (int k = 0; k < r.k; ++k)
      t.emplace_back(static_cast<int>(p), static_cast<int>(ax.shift(p, at, r.off[k])), r.c[k]);
  }
  SpMat D(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

std::string node_label(const Grid& g, std::size_t p) {
  std::ostringstream os;
  os.precision(10);
  os << "node " << p << " (x = ";
  const Vec x = g.node(p);
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ')';
  return os.str();
}

void require_scalar(const GridField& u, const Grid& g, const char* what) {
  if (u.comps != 1) throw ValidationError(std::string(what) + " must be a scalar field");
  if (!(u.grid == g)) throw ValidationError(std::string(what) + " lives on a different grid");
}

std::vector<Vec> sample_directions(int n) {
  std::vector<Vec> dirs;
  if (n == 1) return {make_vec({1.0}), make_vec({-1.0})};
  if (n == 2) {
    for (int k = 0; k < 16; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 16.0;
      dirs.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return dirs;
  }
  // Fibonacci sphere.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < 16; ++k) {
    const double z = 1.0 - (k + 0.5) * 2.0 / 16.0;
    const double r = std::sqrt(1.0 - z * z);
    dirs.push_back(make_vec({r * std::cos(golden * k), r * std::sin(golden * k), z}));
  }
  return dirs;
}

Mat metric_at(const GridField& g_inv, std::size_t p, int n) {
  Mat G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = g_inv(p, i * n + j);
  return G;
}

// Steps per interval [a, b] of nominal size τ.
std::size_t interval_steps(double a, double b, double tau) {
  const double r = (b - a) / tau;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(r * (1.0 - 1e-12))));
}

double mass_of(const WeightedGrid& wg, const GridField& u) { return wg.integral(u); }

// Wide stiffness K = Σ_ab D_aᵀ diag(m g^{ab}) D_b, so that Δ^V = −M⁻¹K.
SpMat wide_stiffness(const WeightedGrid& wg, const std::vector<SpMat>& D, const GridField& g_inv) {
  const int n = wg.grid().dim;
  const std::size_t N = wg.grid().size();
  SpMat K(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Eigen::VectorXd w(static_cast<Eigen::Index>(N));
      for (std::size_t p = 0; p < N; ++p) w(static_cast<Eigen::Index>(p)) = wg.m(p) * g_inv(p, a * n + b);
      const SpMat right = w.asDiagonal() * D[static_cast<std::size_t>(b)];
      K += SpMat(D[static_cast<std::size_t>(a)].transpose()) * right;
    }
  return K;
}

// (M + dt K) x = M h; the result is shifted by a constant so that Σ m x = Σ m h
// holds to rounding (1ᵀK = 0, so the shift only removes solver residual).
void implicit_step(const WeightedGrid& wg, const SpMat& K, double dt, GridField& h, double tol) {
  const std::size_t N = wg.grid().size();
  const auto& m = wg.weights();
  Eigen::VectorXd mv = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(N));
  SpMat A = dt * K;
  A += SpMat(mv.asDiagonal());
  Eigen::Map<Eigen::VectorXd> x(h.values.data(), static_cast<Eigen::Index>(N));
  const Eigen::VectorXd b = mv.cwiseProduct(x);
  const double mass_before = b.sum();
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::size_t>(1000, 4 * N)));
  cg.compute(A);
  const Eigen::VectorXd guess = x;
  Eigen::VectorXd sol = cg.solveWithGuess(b, guess);
  if (cg.info() != Eigen::Success)
    throw ConvergenceError("conjugate gradient stopped at relative residual " + std::to_string(cg.error()));
  sol.array() += (mass_before - mv.dot(sol)) / wg.total_mass();
  x = sol;
}

// Advances u by one step of the chosen scheme and keeps ∇u at the start of it.
class Stepper {
 public:
  Stepper(const WeightedGrid& wg, Scheme s, double cg_tol, double threshold_fraction)
      : wg_(wg), scheme_(s), cg_tol_(cg_tol), fraction_(threshold_fraction) {
    if (s == Scheme::semi_implicit) {
      for (const Axis& ax : make_axes(wg.grid())) D_.push_back(differentiation_matrix(wg.grid(), ax));
    }
  }

  void advance(GridField& u, double dt) {
    GradientOptions go;
    go.threshold_fraction = fraction_;
    go.warm_start = have_ ? &start_.grad : nullptr;
    start_ = gradient_field(wg_, u, go);
    have_ = true;
    switch (scheme_) {
      case Scheme::explicit_euler: {
        const GridField L = nonlinear_laplacian(wg_, start_);
        for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] += dt * L.values[i];
        break;
      }
      case Scheme::rk4: {
        auto stage = [&](const GridField& base, const GridField& k, double c, const GradientField& warm) {
          GridField y = base;
          for (std::size_t i = 0; i < y.values.size(); ++i) y.values[i] += c * k.values[i];
          GradientOptions o = go;
          o.warm_start = &warm.grad;
          GradientField gy = gradient_field(wg_, y, o);
          GridField L = nonlinear_laplacian(wg_, gy);
          return std::make_pair(std::move(L), std::move(gy));
        };
        const GridField k1 = nonlinear_laplacian(wg_, start_);
        auto [k2, g2] = stage(u, k1, 0.5 * dt, start_);
        auto [k3, g3] = stage(u, k2, 0.5 * dt, g2);
        auto [k4, g4] = stage(u, k3, dt, g3);
        for (std::size_t i = 0; i < u.values.size(); ++i)
          u.values[i] += dt / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
        break;
      }
      case Scheme::semi_implicit: {
        const SpMat K = wide_stiffness(wg_, D_, start_.g_inv);
        implicit_step(wg_, K, dt, u, cg_tol_);
        break;
      }
    }
  }

  const GradientField& start() const { return start_; }

 private:
  const WeightedGrid& wg_;
  Scheme scheme_;
  double cg_tol_;
  double fraction_;
  std::vector<SpMat> D_;
  GradientField start_;
  bool have_ = false;
};

SnapshotDiagnostics diagnose(const WeightedGrid& wg, const GridField& u, double fraction) {
  GradientOptions go;
  go.threshold_fraction = fraction;
  SnapshotDiagnostics d;
  d.mass = mass_of(wg, u);
  d.energy = dirichlet_energy(wg, gradient_field(wg, u, go));
  d.sup = *std::max_element(u.values.begin(), u.values.end());
  d.inf = *std::min_element(u.values.begin(), u.values.end());
  return d;
}

}  // namespace

// ---- weighted grid ----------------------------------------------------------

WeightedGrid::WeightedGrid(FinslerStructure fs, Grid grid) : fs_(std::move(fs)), grid_(std::move(grid)) {
  if (grid_.dim != fs_.dim()) throw ValidationError("grid dimension must match the structure", "grid");
  const std::size_t N = grid_.size();
  m_.assign(N, grid_.cell_volume());
  if (fs_.has_weight())
    for (std::size_t p = 0; p < N; ++p) m_[p] *= std::exp(fs_.phi(grid_.node(p)));
  for (double w : m_) total_ += w;

  const std::vector<Vec> dirs = sample_directions(fs_.dim());
  std::vector<std::size_t> nodes;
  if (fs_.position_independent()) {
    nodes.push_back(0);
  } else {
    const std::size_t step = std::max<std::size_t>(1, N / 4096);
    for (std::size_t p = 0; p < N; p += step) nodes.push_back(p);
  }
  std::vector<double> best(nodes.size(), 0.0);
  parallel_for(nodes.size(), [&](std::size_t k) {
    const Vec x = grid_.node(nodes[k]);
    for (const Vec& v : dirs) {
      const Mat g = fundamental_tensor(fs_, x, v).g;
      Eigen::SelfAdjointEigenSolver<Mat> es(g);
      best[k] = std::max(best[k], 1.0 / es.eigenvalues().minCoeff());
    }
  });
  lambda_max_ = *std::max_element(best.begin(), best.end());
}

double WeightedGrid::integral(const GridField& f) const {
  double acc = 0.0;
  for (std::size_t p = 0; p < m_.size(); ++p) acc += f(p) * m_[p];
  return acc;
}

double WeightedGrid::inner(const GridField& a, const GridField& b) const {
  double acc = 0.0;
  for (std::size_t p = 0; p < m_.size(); ++p) acc += a(p) * b(p) * m_[p];
  return acc;
}

// ---- differential and divergence --------------------------------------------

GridField differential(const GridField& u) {
  if (u.comps != 1) throw ValidationError("differential needs a scalar field");
  const Grid& g = u.grid;
  const auto axes = make_axes(g);
  GridField du(g, g.dim);
  parallel_for(g.size(), [&](std::size_t p) {
    for (int a = 0; a < g.dim; ++a) du(p, a) = derivative(axes[static_cast<std::size_t>(a)], u, 0, p);
  });
  return du;
}

GridField differential_transpose(const GridField& w) {
  const Grid& g = w.grid;
  if (w.comps != g.dim) throw ValidationError("expected a field with dim components");
  const auto axes = make_axes(g);
  GridField out(g);
  parallel_for(g.size(), [&](std::size_t p) {
    double acc = 0.0;
    for (int a = 0; a < g.dim; ++a) acc += transpose_derivative(axes[static_cast<std::size_t>(a)], w, a, p);
    out(p) = acc;
  });
  return out;
}

GridField divergence(const WeightedGrid& wg, const GridField& V) {
  if (!(V.grid == wg.grid()) || V.comps != wg.grid().dim) throw ValidationError("vector field does not match the grid");
  GridField mv = V;
  for (std::size_t p = 0; p < V.nodes(); ++p)
    for (int a = 0; a < V.comps; ++a) mv(p, a) *= wg.m(p);
  GridField out = differential_transpose(mv);
  for (std::size_t p = 0; p < out.nodes(); ++p) out(p) = -out(p) / wg.m(p);
  return out;
}

// ---- gradient ---------------------------------------------------------------

std::size_t GradientField::active_count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), char{1}));
}

GradientField gradient_field(const WeightedGrid& wg, const GridField& u, const GradientOptions& opt) {
  require_scalar(u, wg.grid(), "u");
  const Grid& g = wg.grid();
  const FinslerStructure& fs = wg.structure();
  const int n = g.dim;
  const std::size_t N = g.size();
  const GridField du = differential(u);
  GradientField out{GridField(g, n), GridField(g), GridField(g, n * n), std::vector<char>(N, 0), 0.0};
  const bool warm = opt.warm_start && opt.warm_start->grid == g && opt.warm_start->comps == n;
  parallel_for(N, [&](std::size_t p) {
    const Vec alpha = du.at(p);
    if (alpha.cwiseAbs().maxCoeff() == 0.0) return;
    const Vec x = g.node(p);
    LegendrePoint lp;
    try {
      lp = legendre_dual_point(fs, x, alpha, warm ? opt.warm_start->at(p) : Vec());
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(std::string(e.what()) + " at " + node_label(g, p));
    } catch (const DomainError& e) {
      throw DomainError(std::string(e.what()) + " at " + node_label(g, p));
    }
    out.grad.set(p, lp.v);
    out.dual(p) = std::sqrt(std::max(0.0, alpha.dot(lp.v)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.g_inv(p, i * n + j) = lp.g_inv(i, j);
  });
  double scale = 0.0;
  for (std::size_t p = 0; p < N; ++p) scale = std::max(scale, out.dual(p));
  double umax = 0.0;
  for (double v : u.values) umax = std::max(umax, std::abs(v));
  const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * umax / g.hmin() * std::sqrt(wg.lambda_max());
  out.threshold = std::max(opt.threshold_fraction * scale, roundoff);
  for (std::size_t p = 0; p < N; ++p) {
    if (scale > 0.0 && out.dual(p) > out.threshold) {
      out.active[p] = 1;
    } else {
      for (int i = 0; i < n; ++i) out.grad(p, i) = 0.0;
      for (int i = 0; i < n * n; ++i) out.g_inv(p, i) = 0.0;
    }
  }
  return out;
}

GridField nonlinear_laplacian(const WeightedGrid& wg, const GradientField& grad) { return divergence(wg, grad.grad); }

GridField nonlinear_laplacian(const WeightedGrid& wg, const GridField& u) {
  return nonlinear_laplacian(wg, gradient_field(wg, u));
}

double dirichlet_energy(const WeightedGrid& wg, const GradientField& grad) {
  double acc = 0.0;
  for (std::size_t p = 0; p < grad.dual.nodes(); ++p) acc += grad.dual(p) * grad.dual(p) * wg.m(p);
  return 0.5 * acc;
}

double dirichlet_energy(const WeightedGrid& wg, const GridField& u) { return dirichlet_energy(wg, gradient_field(wg, u)); }

// ---- linear operators with a reference vector -------------------------------

std::string to_string(Fallback f) {
  switch (f) {
    case Fallback::none: return "none";
    case Fallback::zero_flux: return "zero_flux";
    case Fallback::e1: return "e1";
    case Fallback::e2: return "e2";
  }
  return "none";
}

Fallback fallback_from_string(const std::string& s) {
  if (s == "none") return Fallback::none;
  if (s == "zero_flux") return Fallback::zero_flux;
  if (s == "e1") return Fallback::e1;
  if (s == "e2") return Fallback::e2;
  throw ValidationError("unknown fallback '" + s + "' (none|zero_flux|e1|e2)", "fallback");
}

namespace {

void apply_fallback(const WeightedGrid& wg, FrozenMetric& fm, std::size_t p) {
  const int n = wg.grid().dim;
  switch (fm.fallback) {
    case Fallback::none:
      throw DomainError("reference vector vanishes at " + node_label(wg.grid(), p) + " and no fallback is set");
    case Fallback::zero_flux:
      for (int i = 0; i < n * n; ++i) fm.g_inv(p, i) = 0.0;
      return;
    case Fallback::e1:
    case Fallback::e2: {
      Vec e = Vec::Zero(n);
      e(fm.fallback == Fallback::e2 && n > 1 ? 1 : 0) = 1.0;
      const Mat G = fundamental_tensor(wg.structure(), wg.grid().node(p), e).g_inv;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) fm.g_inv(p, i * n + j) = G(i, j);
      return;
    }
  }
}

}  // namespace

FrozenMetric freeze_metric(const WeightedGrid& wg, const GridField& V, Fallback fallback, double threshold) {
  const Grid& g = wg.grid();
  if (!(V.grid == g) || V.comps != g.dim) throw ValidationError("reference field does not match the grid");
  const int n = g.dim;
  FrozenMetric fm{GridField(g, n * n), 0, fallback};
  std::vector<char> fell(g.size(), 0);
  parallel_for(g.size(), [&](std::size_t p) {
    const Vec v = V.at(p);
    const Vec x = g.node(p);
    if (v.cwiseAbs().maxCoeff() == 0.0 || wg.structure().F(x, v) <= threshold) {
      fell[p] = 1;
      apply_fallback(wg, fm, p);
      return;
    }
    const Mat G = fundamental_tensor(wg.structure(), x, v).g_inv;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) fm.g_inv(p, i * n + j) = G(i, j);
  });
  fm.fallback_nodes = static_cast<std::size_t>(std::count(fell.begin(), fell.end(), char{1}));
  return fm;
}

FrozenMetric freeze_metric(const WeightedGrid& wg, const GradientField& grad, Fallback fallback) {
  FrozenMetric fm{grad.g_inv, 0, fallback};
  std::vector<std::size_t> inactive;
  for (std::size_t p = 0; p < grad.active.size(); ++p)
    if (!grad.active[p]) inactive.push_back(p);
  parallel_for(inactive.size(), [&](std::size_t k) { apply_fallback(wg, fm, inactive[k]); });
  fm.fallback_nodes = inactive.size();
  return fm;
}

GridField gradient_V(const FrozenMetric& metric, const GridField& h) {
  const Grid& g = h.grid;
  const int n = g.dim;
  const GridField dh = differential(h);
  GridField out(g, n);
  for (std::size_t p = 0; p < g.size(); ++p)
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += metric.g_inv(p, i * n + j) * dh(p, j);
      out(p, i) = acc;
    }
  return out;
}

GridField laplacian_V(const WeightedGrid& wg, const FrozenMetric& metric, const GridField& h) {
  require_scalar(h, wg.grid(), "h");
  return divergence(wg, gradient_V(metric, h));
}

GridField laplacian_V(const WeightedGrid& wg, const GridField& V, const GridField& h) {
  return laplacian_V(wg, freeze_metric(wg, V, Fallback::none), h);
}

// ---- Hessian ----------------------------------------------------------------

namespace {

struct SecondDerivatives {
  GridField du;
  GridField d2;  // (a, b) ↦ D_b D_a u
};

SecondDerivatives second_derivatives(const GridField& u) {
  const Grid& g = u.grid;
  const int n = g.dim;
  const auto axes = make_axes(g);
  SecondDerivatives s{differential(u), GridField(g, n * n)};
  parallel_for(g.size(), [&](std::size_t p) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) s.d2(p, a * n + b) = derivative(axes[static_cast<std::size_t>(b)], s.du, a, p);
  });
  return s;
}

struct NodeHessian {
  Mat H;
  Curvature curv;
};

NodeHessian node_hessian(const FinslerStructure& fs, const Vec& x, const Vec& v, const Vec& du, const Mat& d2) {
  const int n = fs.dim();
  NodeHessian r{d2, {}};
  if (fs.position_independent()) {
    r.curv = curvature(fs, x, v);
    return r;
  }
  const auto [pack, curv] = tensor_pack_with_curvature(fs, x, v);
  r.curv = curv;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) r.H(i, j) -= pack.Gamma(k, i, j) * du(k);
  return r;
}

}  // namespace

HessianField hessian_ref(const WeightedGrid& wg, const GridField& u, const GradientField& grad, int interior_width) {
  require_scalar(u, wg.grid(), "u");
  const Grid& g = wg.grid();
  const int n = g.dim;
  const std::size_t N = g.size();
  const SecondDerivatives sd = second_derivatives(u);
  const GridField lap = nonlinear_laplacian(wg, grad);
  HessianField out{GridField(g, n * n), GridField(g), GridField(g), GridField(g), GridField(g), GridField(g),
                   GridField(g), std::vector<char>(N, 0)};
  parallel_for(N, [&](std::size_t p) {
    if (!grad.active[p] || !g.interior(p, interior_width)) return;
    Mat d2(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) d2(a, b) = sd.d2(p, a * n + b);
    const NodeHessian nh = node_hessian(wg.structure(), g.node(p), grad.grad.at(p), sd.du.at(p), d2);
    const Mat& H = nh.H;
    const double scale = H.cwiseAbs().maxCoeff();
    out.symmetry_defect(p) = scale > 0.0 ? (H - H.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
    const Mat Hs = 0.5 * (H + H.transpose());
    const Mat E = metric_at(grad.g_inv, p, n) * Hs;
    out.hs2(p) = (E * E).trace();
    out.trace_residual(p) = lap(p) - (E.trace() - nh.curv.psi1);
    out.ric(p) = nh.curv.ric;
    out.psi1(p) = nh.curv.psi1;
    out.psi2(p) = nh.curv.psi2;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out.hess(p, a * n + b) = H(a, b);
    out.evaluated[p] = 1;
  });
  return out;
}

Mat hessian_at(const WeightedGrid& wg, const GridField& u, const GradientField& grad, std::size_t node) {
  const Grid& g = wg.grid();
  if (node >= g.size()) throw ValidationError("node index out of range");
  if (!grad.active[node])
    throw DomainError("Hessian requested below the gradient threshold at " + node_label(g, node));
  const int n = g.dim;
  const auto axes = make_axes(g);
  const GridField du = differential(u);
  Mat d2(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) d2(a, b) = derivative(axes[static_cast<std::size_t>(b)], du, a, node);
  return node_hessian(wg.structure(), g.node(node), grad.grad.at(node), du.at(node), d2).H;
}

// ---- compact operator -------------------------------------------------------

CompactLaplacian::CompactLaplacian(const WeightedGrid& wg, const FrozenMetric& metric) : wg_(&wg) {
  const Grid& g = wg.grid();
  const int n = g.dim;
  const std::size_t N = g.size();
  min_weight_ = std::numeric_limits<double>::infinity();
  const double h2 = g.hmin() * g.hmin();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(N * static_cast<std::size_t>(n * n) * 4);
  for (std::size_t p = 0; p < N; ++p) {
    const Index mi = g.multi(p);
    const Mat G = metric_at(metric.g_inv, p, n);
    // Directions as integer offsets with their split weights.
    std::vector<std::pair<std::array<int, kMaxDim>, double>> dirs;
    for (int a = 0; a < n; ++a) {
      double w = G(a, a) / (g.h(a) * g.h(a));
      for (int b = 0; b < n; ++b)
        if (b != a) w -= std::abs(G(a, b)) / (g.h(a) * g.h(b));
      std::array<int, kMaxDim> d{};
      d[static_cast<std::size_t>(a)] = 1;
      dirs.emplace_back(d, w);
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        if (G(a, b) == 0.0) continue;
        std::array<int, kMaxDim> d{};
        d[static_cast<std::size_t>(a)] = 1;
        d[static_cast<std::size_t>(b)] = G(a, b) > 0.0 ? 1 : -1;
        dirs.emplace_back(d, std::abs(G(a, b)) / (g.h(a) * g.h(b)));
      }
    for (const auto& [d, w] : dirs) {
      min_weight_ = std::min(min_weight_, w * h2);
      const double c = 0.5 * wg.m(p) * w;
      for (int sgn : {1, -1}) {
        Index q = mi;
        bool inside = true;
        for (int a = 0; a < n; ++a) {
          q[a] += sgn * d[static_cast<std::size_t>(a)];
          if (!g.periodic && (q[a] < 0 || q[a] >= g.shape[a])) inside = false;
        }
        if (!inside) continue;
        const auto pi = static_cast<int>(p);
        const auto qi = static_cast<int>(g.flat(q));
        t.emplace_back(pi, pi, c);
        t.emplace_back(qi, qi, c);
        t.emplace_back(pi, qi, -c);
        t.emplace_back(qi, pi, -c);
      }
    }
  }
  K_.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  K_.setFromTriplets(t.begin(), t.end());
}

GridField CompactLaplacian::apply(const GridField& h) const {
  require_scalar(h, wg_->grid(), "h");
  const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(h.values.data(), static_cast<Eigen::Index>(h.nodes()));
  const Eigen::VectorXd y = K_ * x;
  GridField out(h.grid);
  for (std::size_t p = 0; p < h.nodes(); ++p) out(p) = -y(static_cast<Eigen::Index>(p)) / wg_->m(p);
  return out;
}

// ---- heat flow --------------------------------------------------------------

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::explicit_euler: return "explicit";
    case Scheme::semi_implicit: return "semi-implicit";
    case Scheme::rk4: return "rk4";
  }
  return "explicit";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "explicit") return Scheme::explicit_euler;
  if (s == "semi-implicit" || s == "semi_implicit") return Scheme::semi_implicit;
  if (s == "rk4") return Scheme::rk4;
  throw ValidationError("unknown scheme '" + s + "' (explicit|semi-implicit|rk4)", "solver.scheme");
}

double stability_bound(const WeightedGrid& wg, Scheme s) {
  if (s == Scheme::semi_implicit) return std::numeric_limits<double>::infinity();
  // max over θ of ((8 sin θ − sin 2θ)/6)², the symbol of D².
  constexpr double symbol = 1.8829;
  double inv = 0.0;
  for (int a = 0; a < wg.grid().dim; ++a) inv += 1.0 / (wg.grid().h(a) * wg.grid().h(a));
  const double rho = symbol * wg.lambda_max() * inv;
  return (s == Scheme::rk4 ? 2.785 : 2.0) / rho;
}

double default_time_step(const WeightedGrid& wg, double factor) {
  const double h = wg.grid().hmin();
  return factor * h * h / wg.lambda_max();
}

std::size_t Trajectory::index_of(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
  std::ostringstream os;
  os << "time " << t << " is not a stored snapshot";
  throw ValidationError(os.str(), "time");
}

Trajectory heat_solve(const WeightedGrid& wg, const GridField& u0, const HeatOptions& opt) {
  require_scalar(u0, wg.grid(), "initial datum");
  if (!(opt.T > 0.0)) throw ValidationError("final time must be positive", "solver.T");
  if (!u0.all_finite()) throw ValidationError("initial datum must be finite", "initial");
  const double tau = opt.tau > 0.0 ? opt.tau : default_time_step(wg);
  const double bound = stability_bound(wg, opt.scheme);
  if (tau > bound) {
    std::ostringstream os;
    os << "time step " << tau << " exceeds the stability bound " << bound << " of the " << to_string(opt.scheme)
       << " scheme (h_min = " << wg.grid().hmin() << ", lambda_max = " << wg.lambda_max() << ")";
    throw StabilityError(os.str());
  }

  Trajectory tr;
  tr.grid = wg.grid();
  tr.structure_hash = wg.structure().hash_hex();
  tr.tau = tau;
  tr.scheme = opt.scheme;
  tr.time_origin = opt.time_origin;
  tr.cg_tolerance = opt.cg_tolerance;
  tr.threshold_fraction = opt.threshold_fraction;

  std::vector<double> times{0.0, opt.T};
  for (double s : opt.snapshots) {
    if (!(s > 0.0 && s < opt.T)) throw ValidationError("snapshot times must lie in (0, T)", "solver.snapshots");
    times.push_back(s);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [&](double a, double b) { return std::abs(a - b) <= 1e-12 * opt.T; }),
              times.end());

  GridField u = u0;
  Stepper stepper(wg, opt.scheme, opt.cg_tolerance, opt.threshold_fraction);
  const double mass0 = mass_of(wg, u);
  double mass_scale = 0.0;
  for (std::size_t p = 0; p < u.nodes(); ++p) mass_scale += std::abs(u(p)) * wg.m(p);
  mass_scale = std::max(mass_scale, std::numeric_limits<double>::min());
  double prev_energy = std::numeric_limits<double>::quiet_NaN();

  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.fields.push_back(u);
    tr.diagnostics.push_back(diagnose(wg, u, opt.threshold_fraction));
  };
  record(0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double a = times[k - 1], b = times[k];
    const std::size_t steps = interval_steps(a, b, tau);
    const double dt = (b - a) / static_cast<double>(steps);
    for (std::size_t s = 0; s < steps; ++s) {
      stepper.advance(u, dt);
      ++tr.steps;
      const double e = dirichlet_energy(wg, stepper.start());
      if (!std::isnan(prev_energy)) tr.energy_increase = std::max(tr.energy_increase, e - prev_energy);
      prev_energy = e;
      if (!u.all_finite()) {
        std::ostringstream os;
        os << "non-finite field at step " << tr.steps << " (t = " << a + dt * static_cast<double>(s + 1) << ")";
        throw StabilityError(os.str());
      }
      tr.mass_drift = std::max(tr.mass_drift, std::abs(mass_of(wg, u) - mass0) / mass_scale);
    }
    record(b);
    tr.energy_increase = std::max(tr.energy_increase, tr.diagnostics.back().energy - prev_energy);
  }
  return tr;
}

// ---- serialization ----------------------------------------------------------

namespace {
constexpr char kTrajMagic[8] = {'F', 'F', 'T', 'R', 'A', 'J', '0', '1'};
}

void Trajectory::save(const std::filesystem::path& file) const {
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& d : diagnostics) diag.push_back({d.mass, d.energy, d.sup, d.inf});
  const nlohmann::json header = {{"grid", grid.to_json()},
                                 {"dim", grid.dim},
                                 {"comps", fields.empty() ? 1 : fields.front().comps},
                                 {"structure_hash", structure_hash},
                                 {"tau", tau},
                                 {"scheme", to_string(scheme)},
                                 {"time_origin", time_origin},
                                 {"cg_tolerance", cg_tolerance},
                                 {"threshold_fraction", threshold_fraction},
                                 {"times", times},
                                 {"diagnostics", diag},
                                 {"steps", steps},
                                 {"mass_drift", mass_drift},
                                 {"energy_increase", energy_increase},
                                 {"metadata", metadata}};
  const std::string text = header.dump();
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os.write(kTrajMagic, sizeof kTrajMagic);
  const std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& f : fields)
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing " + file.string());
}

Trajectory Trajectory::load(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + file.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kTrajMagic, sizeof magic) != 0)
    throw ValidationError("not a trajectory container: " + file.string());
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  const auto h = nlohmann::json::parse(text);
  Trajectory tr;
  const auto& gj = h.at("grid");
  tr.grid.dim = h.at("dim").get<int>();
  tr.grid.h.resize(tr.grid.dim);
  tr.grid.origin.resize(tr.grid.dim);
  tr.grid.periodic = gj.at("periodic").get<bool>();
  for (int i = 0; i < tr.grid.dim; ++i) {
    tr.grid.shape[i] = gj.at("shape").at(i).get<int>();
    tr.grid.h(i) = gj.at("h").at(i).get<double>();
    tr.grid.origin(i) = gj.at("origin").at(i).get<double>();
  }
  tr.structure_hash = h.at("structure_hash").get<std::string>();
  tr.tau = h.at("tau").get<double>();
  tr.scheme = scheme_from_string(h.at("scheme").get<std::string>());
  tr.time_origin = h.at("time_origin").get<double>();
  tr.cg_tolerance = h.at("cg_tolerance").get<double>();
  tr.threshold_fraction = h.at("threshold_fraction").get<double>();
  tr.times = h.at("times").get<std::vector<double>>();
  tr.steps = h.at("steps").get<std::size_t>();
  tr.mass_drift = h.at("mass_drift").get<double>();
  tr.energy_increase = h.at("energy_increase").get<double>();
  tr.metadata = h.value("metadata", nlohmann::json::object());
  for (const auto& d : h.at("diagnostics")) tr.diagnostics.push_back({d[0], d[1], d[2], d[3]});
  const int comps = h.at("comps").get<int>();
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    GridField f(tr.grid, comps);
    is.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!is) throw ValidationError("truncated trajectory container: " + file.string());
    tr.fields.push_back(std::move(f));
  }
  return tr;
}

void Trajectory::write_csv(std::ostream& os, const std::vector<std::string>& header) const {
  for (const auto& line : header) os << "# " << line << '\n';
  os << "time,mass,energy,sup,inf\n";
  char buf[160];
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto& d = diagnostics[k];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", times[k], d.mass, d.energy, d.sup, d.inf);
    os << buf;
  }
}

// ---- linearized semigroup ---------------------------------------------------

SemigroupResult linearized_semigroup(const WeightedGrid& wg, const Trajectory& traj, const std::vector<GridField>& hs,
                                     double s, double t, const SemigroupOptions& opt) {
  if (!(traj.grid == wg.grid())) throw ValidationError("trajectory lives on a different grid");
  for (const auto& h : hs) require_scalar(h, wg.grid(), "h_s");
  const std::size_t is = traj.index_of(s), it = traj.index_of(t);
  if (is > it) throw ValidationError("linearized semigroup needs s ≤ t", "time");
  SemigroupResult res;
  res.h = hs;
  res.min_weight = std::numeric_limits<double>::infinity();
  if (is == it) return res;

  GridField u = traj.fields[is];
  Stepper stepper(wg, traj.scheme, traj.cg_tolerance, traj.threshold_fraction);
  std::vector<SpMat> D;
  if (opt.op == LinearOperator::wide)
    for (const Axis& ax : make_axes(wg.grid())) D.push_back(differentiation_matrix(wg.grid(), ax));
  for (std::size_t k = is + 1; k <= it; ++k) {
    const double a = traj.times[k - 1], b = traj.times[k];
    const std::size_t steps = interval_steps(a, b, traj.tau);
    const double dt = (b - a) / static_cast<double>(steps);
    for (std::size_t st = 0; st < steps; ++st) {
      stepper.advance(u, dt);
      const FrozenMetric fm = freeze_metric(wg, stepper.start(), opt.fallback);
      res.fallback_nodes += fm.fallback_nodes;
      SpMat K;
      if (opt.op == LinearOperator::compact) {
        CompactLaplacian cl(wg, fm);
        res.min_weight = std::min(res.min_weight, cl.min_weight());
        if (!cl.m_matrix()) {
          res.m_matrix = false;
          if (opt.require_m_matrix) {
            std::ostringstream os;
            os << "compact operator is not an M-matrix (smallest split weight " << cl.min_weight()
               << "·h⁻²): the grid is too coarse for the anisotropy of g";
            throw StabilityError(os.str());
          }
        }
        K = cl.stiffness();
      } else {
        K = wide_stiffness(wg, D, fm.g_inv);
      }
      for (auto& h : res.h) implicit_step(wg, K, dt, h, opt.cg_tolerance);
      ++res.steps;
    }
  }
  return res;
}

GridField linearized_semigroup(const WeightedGrid& wg, const Trajectory& traj, const GridField& hs, double s, double t,
                               const SemigroupOptions& opt) {
  return std::move(linearized_semigroup(wg, traj, std::vector<GridField>{hs}, s, t, opt).h.front());
}

}  // namespace finsler
