#pragma once

#include <cmath>
#include <random>

#include "finsler/structure.hpp"

namespace finsler {

using Rng = std::mt19937_64;

/// Uniform point of the periodic cell; open axes sample [−1, 1].
inline Vec random_point(const FinslerStructure& fs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(fs.dim());
  for (int i = 0; i < fs.dim(); ++i) {
    const double L = fs.periods()(i);
    x(i) = std::isfinite(L) ? L * u(rng) : 2.0 * u(rng) - 1.0;
  }
  return x;
}

/// Uniform direction on the Euclidean unit sphere.
inline Vec random_direction(int n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = g(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

}  // namespace finsler
