#pragma once

// Initial data presets, as functions of position and sampled on grids.

#include <cstdint>
#include <functional>

#include "finsler/grid.hpp"
#include "finsler/structure.hpp"

namespace finsler {

using Datum = std::function<double(const Vec&)>;

/// floor + amplitude·exp(−|x − c|²/width²), |·| the coordinate distance to
/// the nearest periodic image of c.
Datum gaussian_bump_datum(const FinslerStructure& fs, const Vec& center, double width, double amplitude = 1.0,
                          double floor = 0.0);
GridField gaussian_bump(const FinslerStructure& fs, const Grid& g, const Vec& center, double width,
                        double amplitude = 1.0, double floor = 0.0);

/// floor + t0^{−n/2} exp(−F(c − x)²/(4 t0)) over the nearest periodic image
/// of c, the Minkowski heat kernel from c at time t0 (F evaluated at x).
Datum heat_kernel_function(const FinslerStructure& fs, const Vec& center, double t0, double floor = 0.0);
GridField heat_kernel_datum(const FinslerStructure& fs, const Grid& g, const Vec& center, double t0,
                            double floor = 0.0);

/// amplitude·sin(2π k·x / L); needs finite periods.
Datum sine_mode_datum(const FinslerStructure& fs, const Index& k, double amplitude = 1.0);
GridField sine_mode(const FinslerStructure& fs, const Grid& g, const Index& k, double amplitude = 1.0);

/// Σ_{0 < |k|∞ ≤ kmax} (a_k cos + b_k sin)(2π k·x / L) with a_k, b_k uniform in
/// [−1, 1]/|k|², scaled by amplitude. One term per ±k pair.
Datum random_smooth_datum(const FinslerStructure& fs, std::uint64_t seed, int kmax = 2, double amplitude = 1.0);
GridField random_smooth(const FinslerStructure& fs, const Grid& g, std::uint64_t seed, int kmax = 2,
                        double amplitude = 1.0);

}  // namespace finsler
