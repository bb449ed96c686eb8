#pragma once

// Uniform grids over the periodic cell or over a rectangular patch of an
// open chart, and fields sampled on them.

#include <array>
#include <cstddef>
#include <nlohmann/json.hpp>
#include <vector>

#include "finsler/structure.hpp"

namespace finsler {

using Index = std::array<int, kMaxDim>;

struct Grid {
  int dim = 0;
  Index shape{1, 1, 1};
  Vec h;
  Vec origin;
  bool periodic = true;

  /// N nodes per axis over [0, L_i), spacing L_i / N.
  static Grid periodic_cell(const FinslerStructure& fs, int nodes_per_axis);
  static Grid periodic_cell(const FinslerStructure& fs, const Index& shape);
  /// Closed box [lo, hi] with both ends sampled.
  static Grid patch(const Vec& lo, const Vec& hi, const Index& shape);

  std::size_t size() const;
  Index multi(std::size_t flat) const;
  /// Flat index; periodic grids wrap, patches require in-range indices.
  std::size_t flat(Index m) const;
  Vec node(std::size_t flat) const;
  Vec node(const Index& m) const;
  /// Patch nodes at least `width` away from every face; every node of a periodic grid.
  bool interior(std::size_t flat, int width) const;
  double cell_volume() const { return h.prod(); }
  /// Smallest spacing.
  double hmin() const { return h.minCoeff(); }

  nlohmann::json to_json() const;
  bool operator==(const Grid& o) const;
};

/// Scalar (comps = 1) or vector-valued samples, node-major.
struct GridField {
  Grid grid;
  int comps = 1;
  std::vector<double> values;

  GridField() = default;
  GridField(Grid g, int components = 1, double fill = 0.0)
      : grid(std::move(g)), comps(components), values(grid.size() * static_cast<std::size_t>(components), fill) {}

  std::size_t nodes() const { return grid.size(); }
  double& operator()(std::size_t node, int c = 0) { return values[node * static_cast<std::size_t>(comps) + c]; }
  double operator()(std::size_t node, int c = 0) const { return values[node * static_cast<std::size_t>(comps) + c]; }
  Vec at(std::size_t node) const;
  void set(std::size_t node, const Vec& v);
  bool all_finite() const;
};

/// Samples f at every node.
template <class Fn>
GridField sample(const Grid& g, Fn&& f) {
  GridField u(g);
  for (std::size_t i = 0; i < g.size(); ++i) u.values[i] = f(g.node(i));
  return u;
}

}  // namespace finsler
