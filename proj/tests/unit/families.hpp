#pragma once

// Structures shared by the unit tests.

#include <cmath>
#include <numbers>

#include "finsler/structure.hpp"

namespace testing_families {

using namespace finsler;

inline ScalarField trig(double c, std::vector<TrigMode> modes, const Vec& periods) {
  TrigField f;
  f.constant = c;
  f.modes = std::move(modes);
  f.periods = periods;
  return ScalarField(f);
}

inline TrigMode mode(int k1, int k2, double a, double b) {
  TrigMode m;
  m.k = {k1, k2, 0};
  m.cos_coeff = a;
  m.sin_coeff = b;
  return m;
}

inline Vec torus(double L = 1.0) { return Vec::Constant(2, L); }

/// Position-dependent metric on the unit torus, uniformly positive-definite.
inline MetricField periodic_metric(const Vec& P) {
  MetricField a(2, std::vector<ScalarField>(2));
  a[0][0] = trig(1.5, {mode(1, 0, 0.3, 0.0), mode(0, 1, 0.0, 0.1)}, P);
  a[1][1] = trig(1.2, {mode(1, 1, 0.25, 0.0)}, P);
  a[0][1] = trig(0.0, {mode(0, 1, 0.0, 0.2)}, P);
  a[1][0] = a[0][1];
  return a;
}

inline FinslerStructure periodic_riemannian() { return riemannian(periodic_metric(torus()), torus()); }

/// Randers torus with a periodic one-form, |b|_a ≤ 0.45.
inline FinslerStructure periodic_randers() {
  const Vec P = torus();
  OneFormField b{trig(0.1, {mode(0, 1, 0.2, 0.0)}, P), trig(0.0, {mode(1, 0, 0.0, 0.25)}, P)};
  return randers(periodic_metric(P), b, P);
}

inline FinslerStructure constant_randers(double b1 = 0.5, double b2 = 0.0, double L = 100.0) {
  return randers(identity_metric(2), constant_one_form(make_vec({b1, b2})), Vec::Constant(2, L));
}

inline FinslerStructure quartic(double eps = 0.1) { return quartic_minkowski(2, eps, torus()); }

/// Round sphere of curvature 1 in stereographic coordinates.
inline FinslerStructure sphere(bool with_volume = false) {
  MetricField a(2, std::vector<ScalarField>(2));
  a[0][0] = ScalarField(ConformalSphereField{1.0});
  a[1][1] = a[0][0];
  a[0][1] = ScalarField::constant(0.0);
  a[1][0] = a[0][1];
  return riemannian(a, open_chart(2), with_volume ? ScalarField(SphereLogField{1.0, 1.0}) : ScalarField());
}

}  // namespace testing_families
