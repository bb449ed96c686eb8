#pragma once

// Discrete weighted calculus on grids (differential, gradient, divergence,
// Laplacians, Hessian), the nonlinear heat flow and its linearization.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "finsler/grid.hpp"
#include "finsler/structure.hpp"

namespace finsler {

/// A grid with the node weights m(x) = e^{Φ(x)} Π h_i of the discrete measure.
class WeightedGrid {
 public:
  WeightedGrid(FinslerStructure fs, Grid grid);

  const FinslerStructure& structure() const { return fs_; }
  const Grid& grid() const { return grid_; }
  const std::vector<double>& weights() const { return m_; }
  double m(std::size_t node) const { return m_[node]; }
  double total_mass() const { return total_; }

  /// Σ f·m, summed in node order.
  double integral(const GridField& f) const;
  double inner(const GridField& a, const GridField& b) const;

  /// Largest eigenvalue of g_v⁻¹ over the nodes and 16 sampled directions
  /// per node (every node when F depends on x, up to 4096 of them).
  double lambda_max() const { return lambda_max_; }

 private:
  FinslerStructure fs_;
  Grid grid_;
  std::vector<double> m_;
  double total_ = 0.0;
  double lambda_max_ = 0.0;
};

/// Du: fourth-order centered differences per axis (periodic wrap; one-sided
/// fourth-order rows at patch faces). Result has dim components.
GridField differential(const GridField& u);
/// Σ_a D_aᵀ w_a for a dim-component field w.
GridField differential_transpose(const GridField& w);
/// div_m V = −M⁻¹ Dᵀ(mV), the negative m-adjoint of the differential.
GridField divergence(const WeightedGrid& wg, const GridField& V);

struct GradientOptions {
  /// ε_grad as a fraction of max_x F*(Du); never below the roundoff level
  /// of Du, 64·eps·max|u|·√λ_max/h_min.
  double threshold_fraction = 1e-8;
  /// Previous gradient, used as the Newton starting point.
  const GridField* warm_start = nullptr;
};

struct GradientField {
  GridField grad;   // ∇u = L*(Du), zero on inactive nodes
  GridField dual;   // F*(Du) = F(∇u)
  GridField g_inv;  // g^{ij}(∇u), dim² components, zero on inactive nodes
  std::vector<char> active;
  double threshold = 0.0;

  std::size_t active_count() const;
};

GradientField gradient_field(const WeightedGrid& wg, const GridField& u, const GradientOptions& opt = {});

/// Δu = div_m(∇u).
GridField nonlinear_laplacian(const WeightedGrid& wg, const GridField& u);
GridField nonlinear_laplacian(const WeightedGrid& wg, const GradientField& grad);

/// ½ Σ F*(Du)²·m.
double dirichlet_energy(const WeightedGrid& wg, const GradientField& grad);
double dirichlet_energy(const WeightedGrid& wg, const GridField& u);

/// Replacement for the reference vector where it vanishes.
enum class Fallback {
  none,       // zero reference vector is an error
  zero_flux,  // g^{ij} := 0
  e1,         // g^{ij}(e₁)
  e2,         // g^{ij}(e₂) (e₁ when dim = 1)
};

std::string to_string(Fallback f);
Fallback fallback_from_string(const std::string& s);

/// g^{ij}(V) sampled per node.
struct FrozenMetric {
  GridField g_inv;  // dim² components
  std::size_t fallback_nodes = 0;
  Fallback fallback = Fallback::none;
};

/// Nodes with F(V) ≤ threshold use the fallback.
FrozenMetric freeze_metric(const WeightedGrid& wg, const GridField& V, Fallback fallback, double threshold = 0.0);
FrozenMetric freeze_metric(const WeightedGrid& wg, const GradientField& grad, Fallback fallback);

/// ∇^V h = g^{ij}(V) ∂_j h ∂_i.
GridField gradient_V(const FrozenMetric& metric, const GridField& h);
/// Δ^V h = div_m(∇^V h).
GridField laplacian_V(const WeightedGrid& wg, const FrozenMetric& metric, const GridField& h);
GridField laplacian_V(const WeightedGrid& wg, const GridField& V, const GridField& h);

/// Per-node Hessian with reference vector ∇u and the curvature data at ∇u.
struct HessianField {
  GridField hess;             // H_ij = ∂_i∂_j u − Γ^k_ij(∇u) ∂_k u, dim² components
  GridField hs2;              // ‖∇²u‖²_HS(∇u) = tr((g⁻¹H)²)
  GridField symmetry_defect;  // max |H_ij − H_ji| / max |H_ij|
  GridField trace_residual;   // Δu − (tr g⁻¹H − S(∇u))
  GridField ric, psi1, psi2;  // Ric(∇u), (Ψ∘η)', (Ψ∘η)'' along η̇ = ∇u
  std::vector<char> evaluated;
};

/// Evaluates at active nodes at least `interior_width` away from patch faces;
/// other nodes are left at zero with evaluated = 0.
HessianField hessian_ref(const WeightedGrid& wg, const GridField& u, const GradientField& grad, int interior_width = 4);
/// H_ij at one node; DomainError below the gradient threshold.
Mat hessian_at(const WeightedGrid& wg, const GridField& u, const GradientField& grad, std::size_t node);

/// Second-order operator built from positive edge weights: on every node
/// g^{ij}∂_i∂_j is split as Σ_a w_a ∂_a² + Σ_{a<b} w_ab (∂_a ± ∂_b)²,
/// giving K = Σ_edges c_e (δ_e)(δ_e)ᵀ and Δ_c = −M⁻¹K. It is m-symmetric and
/// conservative; all weights ≥ 0 makes M + τK an M-matrix.
class CompactLaplacian {
 public:
  CompactLaplacian(const WeightedGrid& wg, const FrozenMetric& metric);

  bool m_matrix() const { return min_weight_ >= 0.0; }
  /// Smallest split weight over nodes, scaled by h².
  double min_weight() const { return min_weight_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return K_; }
  GridField apply(const GridField& h) const;

 private:
  const WeightedGrid* wg_;
  Eigen::SparseMatrix<double> K_;
  double min_weight_ = 0.0;
};

enum class Scheme { explicit_euler, semi_implicit, rk4 };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Spectral bound c·h²/λ_max for the explicit schemes; infinite for semi-implicit.
double stability_bound(const WeightedGrid& wg, Scheme s);
/// τ = factor·h_min²/λ_max.
double default_time_step(const WeightedGrid& wg, double factor = 0.2);

struct HeatOptions {
  double T = 0.0;
  double tau = 0.0;  // 0 selects default_time_step
  Scheme scheme = Scheme::explicit_euler;
  /// Extra snapshot times in (0, T); 0 and T are always stored.
  std::vector<double> snapshots;
  /// Time of the initial datum on the clock used by time-dependent checks.
  double time_origin = 0.0;
  double cg_tolerance = 1e-11;
  double threshold_fraction = 1e-8;
};

struct SnapshotDiagnostics {
  double mass = 0.0;
  double energy = 0.0;
  double sup = 0.0;
  double inf = 0.0;
};

struct Trajectory {
  Grid grid;
  std::string structure_hash;
  double tau = 0.0;
  Scheme scheme = Scheme::explicit_euler;
  double time_origin = 0.0;
  double cg_tolerance = 1e-11;
  double threshold_fraction = 1e-8;
  std::vector<double> times;
  std::vector<GridField> fields;
  std::vector<SnapshotDiagnostics> diagnostics;
  std::size_t steps = 0;
  /// Largest relative mass change and largest energy increase over all steps.
  double mass_drift = 0.0;
  double energy_increase = 0.0;
  /// Free-form annotations stored in the container header.
  nlohmann::json metadata = nlohmann::json::object();

  /// Index of a stored time (within 1e-12 relative); throws otherwise.
  std::size_t index_of(double t) const;
  const GridField& at(double t) const { return fields[index_of(t)]; }

  void save(const std::filesystem::path& file) const;
  static Trajectory load(const std::filesystem::path& file);
  /// time,mass,energy,sup,inf, preceded by `header` comment lines.
  void write_csv(std::ostream& os, const std::vector<std::string>& header = {}) const;
};

Trajectory heat_solve(const WeightedGrid& wg, const GridField& u0, const HeatOptions& opt);

enum class LinearOperator { compact, wide };

struct SemigroupOptions {
  Fallback fallback = Fallback::e1;
  LinearOperator op = LinearOperator::compact;
  /// Throw StabilityError when the compact operator loses the M-matrix property.
  bool require_m_matrix = true;
  double cg_tolerance = 1e-11;
};

struct SemigroupResult {
  std::vector<GridField> h;
  bool m_matrix = true;
  double min_weight = 0.0;
  std::size_t fallback_nodes = 0;  // summed over steps
  std::size_t steps = 0;
};

/// P_{s,t}: solves ∂_r h = Δ^{V_r} h from r = s to r = t, V_r = ∇u_r, by
/// frozen-coefficient implicit steps (M + dτ K_r) h⁺ = M h. u is
/// re-integrated from the snapshot at s with the trajectory's own steps, so
/// s and t must be stored times.
SemigroupResult linearized_semigroup(const WeightedGrid& wg, const Trajectory& traj, const std::vector<GridField>& hs,
                                     double s, double t, const SemigroupOptions& opt = {});
GridField linearized_semigroup(const WeightedGrid& wg, const Trajectory& traj, const GridField& hs, double s, double t,
                               const SemigroupOptions& opt = {});

}  // namespace finsler
