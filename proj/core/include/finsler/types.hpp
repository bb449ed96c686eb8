#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string_view>

namespace finsler {

/// Largest supported manifold dimension. Jets seed 2n variables, so this is
/// tied to ad::kMaxVars.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Point of the chart; on a torus coordinates live in the cell [0, L_i).
struct ChartPoint {
  Vec coords;
};

/// Tangent vector v ∈ T_xM in chart components.
struct TangentVector {
  Vec comps;
};

/// Covector α ∈ T*_xM in chart components.
struct CotangentVector {
  Vec comps;
};

inline std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

/// 64-bit FNV-1a, used for structure and scenario fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace finsler
