#pragma once

// Numerical checks of the Bochner-Weitzenböck formulas and of the gradient,
// Li-Yau and Harnack estimates along the heat flow.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "finsler/geodesic.hpp"
#include "finsler/heat.hpp"
#include "finsler/report.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

/// C in tol = C·(h² + τ), calibrated on the Euclidean Bochner checks.
inline constexpr double kToleranceConstant = 4.5;

/// scale·C·(h_max² + τ).
double discretization_tolerance(const Grid& g, double tau = 0.0, double scale = 1.0);

struct RicciEstimate {
  double K = 0.0;
  Report report;
};

/// K_est = min Ric_N(v) over sampled points and F-unit vectors. A sampled
/// estimate, not a certified bound; −∞ when N = n meets nonzero S-curvature.
RicciEstimate ricci_lower_bound(const FinslerStructure& fs, double N, int samples, std::uint64_t seed);

/// Terms of the pointwise Bochner formula at every evaluated node.
struct BochnerTerms {
  GradientField grad;
  GridField lap;       // Δu
  GridField lhs;       // Δ^{∇u}(F(∇u)²/2)
  GridField drift;     // D(Δu)(∇u)
  GridField ric_inf;   // Ric_∞(∇u)
  GridField ric_n;     // Ric_N(∇u), −∞ allowed
  GridField hs2;       // ‖∇²u‖²_HS(∇u)
  std::vector<char> evaluated;
};

/// Nodes within `interior_width` of a patch face are skipped.
BochnerTerms bochner_terms(const WeightedGrid& wg, const GridField& u, double N, int interior_width = 7);

/// N = ∞: residual lhs − drift − Ric_∞ − HS² (violation when |residual| > tol
/// on the regular set F(∇u) ≥ regular_fraction·max F(∇u)). Finite N: slack
/// lhs − drift − Ric_N − (Δu)²/N, violation when slack < −tol on the same set.
Report bochner_pointwise(const WeightedGrid& wg, const GridField& u, double N, double tol,
                         double regular_fraction = 0.5);

/// Pointwise check on periodic grids with the given nodes per axis; records
/// the max |residual| (or max negative slack) on the regular set per level
/// and the empirical orders between consecutive levels.
Report bochner_refinement(const FinslerStructure& fs, const std::function<double(const Vec&)>& u, double N,
                          const std::vector<int>& levels, double regular_fraction = 0.5);

/// −Σ Dφ(∇^{∇u}(F(∇u)²/2))·m against Σ φ{D(Δu)(∇u) + Ric_N(∇u) + (Δu)²/N}·m,
/// with the integrand set to zero on inactive nodes. Slack must be ≥ −tol; for
/// N = ∞ the equality residual (with HS² in place of (Δu)²/N) is also reported.
Report bochner_integrated(const WeightedGrid& wg, const GridField& u, const GridField& phi, double N, double tol);

struct BakryEmeryOptions {
  double tolerance = 1e-6;
  Fallback fallback = Fallback::e1;
  /// Second fallback for the sensitivity delta; none skips it.
  Fallback alternate = Fallback::e2;
  LinearOperator op = LinearOperator::compact;
};

/// Nodewise slack e^{−2K(t−s)} P_{s,t}(F(∇u_s)²) − F(∇u_t)².
Report bakry_emery(const WeightedGrid& wg, const Trajectory& traj, double s, double t, double K,
                   const BakryEmeryOptions& opt = {});

struct LipschitzOptions {
  double tolerance = 1e-6;
  int radius = 3;               // all node pairs within this many cells
  std::size_t far_pairs = 20000;  // plus random pairs across the cell
  std::uint64_t seed = 1;
};

/// Lip(u) = max (u(y) − u(x))/d(x, y) over the sampled ordered pairs, at every
/// snapshot; checks Lip(u_t) ≤ e^{−K(t−s)} Lip(u_s) and the same for
/// ‖F(∇u)‖_∞ between consecutive snapshots and from time 0.
Report lipschitz_decay(const WeightedGrid& wg, const Trajectory& traj, double K, const DistanceTable& table,
                       const LipschitzOptions& opt = {});

struct LiYauOptions {
  double N = 2.0;
  double K = 0.0;
  double theta = 1.0;
  double tolerance = 1e-4;
  /// Replace u by u + shift (still a solution) when u is not positive.
  double shift = 0.0;
  /// Region for the sharpness statistic: nodes within `radius` (coordinate
  /// distance, periodic) of `center`.
  std::optional<Vec> center;
  double radius = 0.0;
};

/// Slack Nθ²(1/(2t) − K′/(4(θ − 1))) − [F(∇log u)² − θ ∂_t log u] at interior
/// snapshots, t measured from the trajectory's time origin, ∂_t by the
/// centered difference over neighbouring snapshots. Only snapshots whose two
/// neighbours are equally spaced are evaluated.
Report li_yau(const WeightedGrid& wg, const Trajectory& traj, const LiYauOptions& opt);

struct HarnackPair {
  double s = 0.0;
  std::size_t x = 0;
  double t = 0.0;
  std::size_t y = 0;
};

/// Which distance enters the Harnack bound for the pair (s, x, t, y).
enum class HarnackOrientation {
  stated,    // d(x, y)
  reversed,  // d(y, x) = d̄(x, y)
};

std::string to_string(HarnackOrientation o);

struct HarnackOptions {
  double N = 2.0;
  double K = 0.0;
  double theta = 1.0;
  double tolerance = 1e-6;
  HarnackOrientation orientation = HarnackOrientation::stated;
};

/// Random pairs with s < t drawn from the stored snapshot times (s > 0 on the
/// trajectory clock) and uniformly from the nodes.
std::vector<HarnackPair> random_harnack_pairs(const Trajectory& traj, std::size_t count, std::uint64_t seed);

/// Slack u(t,y)(t/s)^{θN/2} exp(θd²/(4(t − s)) − θK′N(t − s)/(4(θ − 1))) − u(s,x).
Report harnack(const WeightedGrid& wg, const Trajectory& traj, const DistanceTable& table,
               const std::vector<HarnackPair>& pairs, const HarnackOptions& opt);

}  // namespace finsler
