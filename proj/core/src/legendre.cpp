#include "finsler/legendre.hpp"

#include <cmath>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

namespace {

std::string describe(const Vec& a) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < a.size(); ++i) os << (i ? ", " : "") << a(i);
  os << ')';
  return os.str();
}

LegendrePoint solve_unit(const FinslerStructure& fs, const Vec& x, const Vec& a, Vec v, const LegendreOptions& opt) {
  auto objective = [&](const Vec& w) { return 0.5 * fs.F2(x, w) - a.dot(w); };
  FundamentalTensor t = fundamental_tensor(fs, x, v);
  Vec r = 0.5 * t.dF2 - a;
  double f = 0.5 * t.F2 - a.dot(v);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vec step = -t.g.ldlt().solve(r);
    if (r.norm() <= opt.tolerance) {
      // One polishing step once converged; g_v⁻¹α is exactly v + step.
      return {v + step, t.g_inv};
    }
    double lambda = 1.0;
    Vec trial = v + step;
    double ft = objective(trial);
    const double slope = r.dot(step);
    // Near the minimum the decrease drops below the rounding of f; take the full step.
    const bool local = -slope < 1e-10 * (1.0 + std::abs(f));
    while (!local && !(ft <= f + 1e-4 * lambda * slope) && lambda > 1e-12) {
      lambda *= 0.5;
      trial = v + lambda * step;
      ft = objective(trial);
    }
    v = trial;
    t = fundamental_tensor(fs, x, v);
    r = 0.5 * t.dF2 - a;
    f = 0.5 * t.F2 - a.dot(v);
  }
  throw ConvergenceError("Legendre transform did not converge for covector " + describe(a) + " at x = " +
                         describe(x) + " (check strong convexity)");
}

}  // namespace

Vec legendre(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  if (v.cwiseAbs().maxCoeff() == 0.0) return Vec::Zero(fs.dim());
  return 0.5 * fundamental_tensor(fs, x, v).dF2;
}

LegendrePoint legendre_dual_point(const FinslerStructure& fs, const Vec& x, const Vec& alpha, const Vec& guess,
                                  const LegendreOptions& opt) {
  const int n = fs.dim();
  if (alpha.size() != n) throw ValidationError("covector must have dim components");
  if (!alpha.allFinite()) throw ValidationError("covector must be finite");
  const double scale = alpha.norm();
  if (scale == 0.0) return {Vec::Zero(n), Mat::Zero(n, n)};
  const Vec a = alpha / scale;
  if (fs.quadratic()) {
    const Mat g_inv = fundamental_tensor(fs, x, a).g_inv;
    return {g_inv * alpha, g_inv};
  }
  Vec v0 = guess.size() == n && guess.allFinite() && guess.cwiseAbs().maxCoeff() > 0.0 ? Vec(guess / scale) : a;
  LegendrePoint p;
  try {
    p = solve_unit(fs, x, a, v0, opt);
  } catch (const DomainError&) {
    if (v0 == a) throw;
    p = solve_unit(fs, x, a, a, opt);
  }
  p.v *= scale;
  return p;
}

Vec legendre_dual(const FinslerStructure& fs, const Vec& x, const Vec& alpha, const Vec& guess,
                  const LegendreOptions& opt) {
  return legendre_dual_point(fs, x, alpha, guess, opt).v;
}

Vec legendre_dual(const FinslerStructure& fs, const Vec& x, const Vec& alpha, const LegendreOptions& opt) {
  return legendre_dual(fs, x, alpha, Vec(), opt);
}

double dual_norm(const FinslerStructure& fs, const Vec& x, const Vec& alpha) {
  if (alpha.size() == fs.dim() && alpha.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  return fs.F(x, legendre_dual(fs, x, alpha));
}

}  // namespace finsler
