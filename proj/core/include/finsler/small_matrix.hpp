#pragma once

// Fixed-capacity matrices over a generic scalar (double or jet), for the
// n ≤ 3 linear algebra done inside differentiated expressions.

#include <array>

#include "finsler/ad/jet.hpp"
#include "finsler/error.hpp"
#include "finsler/types.hpp"

namespace finsler {

template <class S>
struct SmallMat {
  int n = 0;
  std::array<S, kMaxDim * kMaxDim> a{};

  explicit SmallMat(int dim = 0) : n(dim) {
    for (auto& e : a) e = S(0.0);
  }
  S& operator()(int i, int j) { return a[i * kMaxDim + j]; }
  const S& operator()(int i, int j) const { return a[i * kMaxDim + j]; }
};

template <class S>
S determinant(const SmallMat<S>& m) {
  switch (m.n) {
    case 1:
      return m(0, 0);
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default:
      throw ValidationError("small matrices support n = 1..3");
  }
}

/// Inverse by cofactors; exact rational expression, so it differentiates
/// cleanly through jets.
template <class S>
SmallMat<S> inverse(const SmallMat<S>& m) {
  const S det = determinant(m);
  if (ad::scalar_value(det) == 0.0) throw DomainError("singular matrix");
  const S inv = S(1.0) / det;
  SmallMat<S> r(m.n);
  switch (m.n) {
    case 1:
      r(0, 0) = inv;
      break;
    case 2:
      r(0, 0) = m(1, 1) * inv;
      r(1, 1) = m(0, 0) * inv;
      r(0, 1) = -(m(0, 1) * inv);
      r(1, 0) = -(m(1, 0) * inv);
      break;
    case 3:
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int r0 = (j + 1) % 3, r1 = (j + 2) % 3;
          const int c0 = (i + 1) % 3, c1 = (i + 2) % 3;
          r(i, j) = (m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0)) * inv;
        }
      break;
  }
  return r;
}

}  // namespace finsler
