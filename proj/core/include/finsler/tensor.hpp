#pragma once

// Pointwise tensor apparatus at (x, v) ∈ TM∖0, all derived from jets of F².

#include <array>
#include <functional>
#include <limits>
#include <span>

#include "finsler/ad/seed.hpp"
#include "finsler/small_matrix.hpp"
#include "finsler/structure.hpp"

namespace finsler {

struct Tensor3 {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};

  explicit Tensor3(int dim = 0) : n(dim) {}
  double& operator()(int i, int j, int k) { return a[(i * kMaxDim + j) * kMaxDim + k]; }
  double operator()(int i, int j, int k) const { return a[(i * kMaxDim + j) * kMaxDim + k]; }
};

struct TensorPack {
  int n = 0;
  Vec x, v;
  double F = 0.0;
  Mat g, g_inv;
  Tensor3 A;      // Cartan tensor A_ijk
  Tensor3 gamma;  // formal Christoffel γ^i_jk
  Vec G;          // spray, ẍ + G(ẋ) = 0
  Mat N;          // N^i_j = ½ ∂G^i/∂v^j
  Tensor3 Gamma;  // Chern connection Γ^i_jk
};

/// Fundamental tensor and first v-derivatives of F², from order-2 jets in v.
struct FundamentalTensor {
  double F2 = 0.0;
  Vec dF2;  // ∂F²/∂v = 2·L(v)
  Mat g, g_inv;
};

FundamentalTensor fundamental_tensor(const FinslerStructure& fs, const Vec& x, const Vec& v);

/// Spray coefficients G^i(x, v); G(x, 0) = 0.
Vec spray(const FinslerStructure& fs, const Vec& x, const Vec& v);

/// Spray with its first derivatives, for variational equations.
struct SprayJet {
  Vec G;
  Mat Gx;  // ∂G^i/∂x^j
  Mat Gv;  // ∂G^i/∂v^j
};

SprayJet spray_jet(const FinslerStructure& fs, const Vec& x, const Vec& v);

TensorPack tensor_pack(const FinslerStructure& fs, const Vec& x, const Vec& v);

/// X(x) evaluated on jets: writes n components.
using JetVectorField = std::function<void(std::span<const ad::Jet1> x, std::span<ad::Jet1> out)>;

/// D_v^w X(x) with reference vector w.
Vec covariant_derivative(const FinslerStructure& fs, const JetVectorField& X, const Vec& x, const Vec& v,
                         const Vec& w);

/// Ricci curvature and the derivatives of Ψ along the geodesic η̇(0) = v, where
/// m = e^{−Ψ} vol_{η̇}. One nested jet evaluation yields all three.
struct Curvature {
  double ric = 0.0;
  double psi1 = 0.0;  // (Ψ∘η)'(0), the S-curvature
  double psi2 = 0.0;  // (Ψ∘η)''(0)
};

Curvature curvature(const FinslerStructure& fs, const Vec& x, const Vec& v);
/// Tensor pack and curvature from the same evaluation.
std::pair<TensorPack, Curvature> tensor_pack_with_curvature(const FinslerStructure& fs, const Vec& x, const Vec& v);

double ricci(const FinslerStructure& fs, const Vec& x, const Vec& v);
double s_curvature(const FinslerStructure& fs, const Vec& x, const Vec& v);

/// Ψ(x, v) = log √det g_v − Φ(x).
double psi(const FinslerStructure& fs, const Vec& x, const Vec& v);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Ric_N(v) for N ∈ [n, ∞]; returns −∞ for N = n with nonzero S-curvature.
double weighted_ricci(const FinslerStructure& fs, const Vec& x, const Vec& v, double N);
/// Same, from curvature data already evaluated at v with F(v) = speed.
double weighted_ricci(const Curvature& c, int n, double speed, double N);

}  // namespace finsler
