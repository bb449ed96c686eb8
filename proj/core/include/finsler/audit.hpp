#pragma once

#include <cstdint>

#include "finsler/report.hpp"
#include "finsler/structure.hpp"

namespace finsler {

/// Samples (x, v) with v on the Euclidean unit sphere (always including ±e_i)
/// and reports the smallest eigenvalue of g_v, the 1-homogeneity defect and
/// the reversibility defect sup |F(v) − F(−v)|. Fails with the located
/// counterexample when F ≤ 0 or g_v is not positive-definite.
Report audit_structure(const FinslerStructure& fs, int samples, std::uint64_t seed);

}  // namespace finsler
