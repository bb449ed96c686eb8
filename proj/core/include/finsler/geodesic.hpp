#pragma once

// Geodesics, exponential map, nonsymmetric distance, the Jacobi-field Ricci
// oracle and the Hopf-Lax transform.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "finsler/grid.hpp"
#include "finsler/structure.hpp"

namespace finsler {

struct GeodesicSample {
  double t = 0.0;
  Vec x;     // unwrapped chart coordinates
  Vec xdot;
};

struct GeodesicPath {
  std::vector<GeodesicSample> samples;
  double tolerance = 0.0;    // requested local error bound
  double speed_drift = 0.0;  // max |F(ẋ(t)) − F(ẋ(0))| / F(ẋ(0))
  int steps_taken = 0;
};

struct GeodesicOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_steps = 200000;
};

/// Solves ẍ + G(ẋ) = 0 on [0, T] with adaptive Dormand-Prince 5(4), recording
/// steps + 1 equally spaced samples. Coordinates are not reduced.
GeodesicPath integrate_geodesic(const FinslerStructure& fs, const Vec& x, const Vec& v, double T, int steps,
                                const GeodesicOptions& opt = {});

/// Fixed-step classical RK4 flow: (x(T), ẋ(T)). Smooth in (x, v), which the
/// finite-difference oracles rely on.
std::pair<Vec, Vec> geodesic_flow_rk4(const FinslerStructure& fs, const Vec& x, const Vec& v, double T, int steps);

/// exp_x(v), reduced to the periodic cell.
Vec exp_map(const FinslerStructure& fs, const Vec& x, const Vec& v, const GeodesicOptions& opt = {});
ChartPoint exp_map(const FinslerStructure& fs, const ChartPoint& x, const TangentVector& v);

/// exp_x(v) in unwrapped coordinates together with D(exp_x)_v, from the
/// variational equations.
struct ExpDerivative {
  Vec point;
  Mat dv;
};
ExpDerivative exp_with_differential(const FinslerStructure& fs, const Vec& x, const Vec& v,
                                    const GeodesicOptions& opt = {});

enum class DistanceStatus { exact, converged, upper_bound_only };

std::string to_string(DistanceStatus s);

struct DistanceResult {
  double value = 0.0;
  DistanceStatus status = DistanceStatus::exact;
  Vec target;    // the lattice translate of y reached
  Vec velocity;  // initial velocity of the minimizing geodesic on [0, 1], when known
};

struct DistanceOptions {
  int graph_nodes = 24;       // per axis, coarse graph phase
  int polyline_nodes = 16;
  int energy_iterations = 300;
  int shooting_iterations = 30;
  double shooting_tol = 1e-11;
};

/// Nonsymmetric distance d(x, y): infimum of F-lengths of curves from x to y.
DistanceResult distance_detail(const FinslerStructure& fs, const Vec& x, const Vec& y, const DistanceOptions& opt = {});
double distance(const FinslerStructure& fs, const Vec& x, const Vec& y);
double distance(const FinslerStructure& fs, const ChartPoint& x, const ChartPoint& y);

/// F-length of a polyline, 3-point Gauss-Legendre per segment.
double polyline_length(const FinslerStructure& fs, const std::vector<Vec>& nodes);

/// All-pairs distances between grid nodes. Position-independent norms use the
/// closed form and store one value per node offset; otherwise a
/// 16-neighbour graph metric on the grid is used, which is an upper estimate.
class DistanceTable {
 public:
  static DistanceTable build(const FinslerStructure& fs, const Grid& grid);
  /// Loads from `cache_dir` when a table with the same key exists, else builds
  /// and stores it.
  static DistanceTable cached(const FinslerStructure& fs, const Grid& grid, const std::filesystem::path& cache_dir);

  double operator()(std::size_t from, std::size_t to) const;
  const Grid& grid() const { return grid_; }
  bool exact() const { return exact_; }
  std::uint64_t key() const { return key_; }

  void save(const std::filesystem::path& file) const;
  static std::optional<DistanceTable> load(const std::filesystem::path& file, std::uint64_t key);

 private:
  Grid grid_;
  bool exact_ = false;
  bool by_offset_ = false;
  std::uint64_t key_ = 0;
  std::vector<double> d_;
};

std::uint64_t distance_table_key(const FinslerStructure& fs, const Grid& grid);

/// Jacobi fields E_i(t) = D(T_t)(e_i) of T_t(y) = exp_y(tV(y)) for the field V
/// with constant components v, and B(t) = (Ė + N E)E⁻¹.
struct JacobiFrame {
  double t = 0.0;
  Mat E, Edot, B;
  double condition = 1.0;
};

JacobiFrame jacobi_frame(const FinslerStructure& fs, const Vec& x, const Vec& v, double t);

/// Ric(v) = −[(tr B)' + tr B²] at t → 0⁺, cubic extrapolation from
/// t ∈ {T/8, T/4, T/2, T}.
double jacobi_ricci_oracle(const FinslerStructure& fs, const Vec& x, const Vec& v, double T = 0.02, int steps = 40);

/// φ_t(y) = min_x d(x, y)²/(2t) + u(x) over grid nodes x.
double hopf_lax(const FinslerStructure& fs, const GridField& u, double t, const Vec& y);
/// φ_t at every node of u's grid, from a distance table on the same grid.
GridField hopf_lax(const DistanceTable& table, const GridField& u, double t);

}  // namespace finsler
