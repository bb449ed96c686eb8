#pragma once

#include "finsler/structure.hpp"

namespace finsler {

/// Forward Legendre map L(v) = g_v(v, ·) = ½ ∂F²/∂v; L(0) = 0.
Vec legendre(const FinslerStructure& fs, const Vec& x, const Vec& v);

struct LegendreOptions {
  double tolerance = 1e-13;  // residual of the normalized problem
  int max_iterations = 100;
};

/// L*(α): the unique v with L(v) = α. Damped Newton on ½F²(v) − α(v),
/// started from `guess` when given (a warm start) and from α otherwise.
Vec legendre_dual(const FinslerStructure& fs, const Vec& x, const Vec& alpha, const LegendreOptions& opt = {});
Vec legendre_dual(const FinslerStructure& fs, const Vec& x, const Vec& alpha, const Vec& guess,
                  const LegendreOptions& opt = {});

/// L*(α) with g⁻¹ taken at the last Newton iterate; since g is
/// 0-homogeneous, v = g⁻¹α holds to rounding.
struct LegendrePoint {
  Vec v;
  Mat g_inv;
};
LegendrePoint legendre_dual_point(const FinslerStructure& fs, const Vec& x, const Vec& alpha, const Vec& guess = Vec(),
                                  const LegendreOptions& opt = {});

/// F*(α) = F(L*(α)).
double dual_norm(const FinslerStructure& fs, const Vec& x, const Vec& alpha);

inline TangentVector legendre_dual(const FinslerStructure& fs, const ChartPoint& x, const CotangentVector& alpha) {
  return {legendre_dual(fs, x.coords, alpha.comps)};
}

}  // namespace finsler
