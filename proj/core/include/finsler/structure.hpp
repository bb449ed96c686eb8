#pragma once

// Weighted Finsler structures (M, F, m) on a flat chart with per-axis
// periods, dm = e^Φ dx.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/ad/seed.hpp"
#include "finsler/field.hpp"
#include "finsler/types.hpp"

namespace finsler {

/// Evaluator of F² over every scalar type the library differentiates with.
/// F² rather than F is the primitive: it is smooth on TM∖0 and polynomial
/// for the Riemannian family.
class NormModel {
 public:
  virtual ~NormModel() = default;
  virtual double sq(std::span<const double> x, std::span<const double> v) const = 0;
  virtual ad::Jet1 sq(std::span<const ad::Jet1> x, std::span<const ad::Jet1> v) const = 0;
  virtual ad::Jet2 sq(std::span<const ad::Jet2> x, std::span<const ad::Jet2> v) const = 0;
  /// Signed F itself. Differs from sqrt(F²) only for inadmissible Randers data.
  virtual double norm(std::span<const double> x, std::span<const double> v) const;
  /// True when F(x, v) does not depend on x (a Minkowski norm).
  virtual bool position_independent() const = 0;
  /// True when F² is quadratic in v (the Riemannian family).
  virtual bool quadratic() const { return false; }
};

using MetricField = std::vector<std::vector<ScalarField>>;  // n×n, symmetric
using OneFormField = std::vector<ScalarField>;             // n components

class FinslerStructure {
 public:
  FinslerStructure(int dim, Vec periods, std::shared_ptr<const NormModel> model, ScalarField phi,
                   bool reversible, nlohmann::json spec);

  int dim() const noexcept { return dim_; }
  const Vec& periods() const noexcept { return periods_; }
  bool is_periodic(int axis) const { return std::isfinite(periods_(axis)); }
  bool reversible() const noexcept { return reversible_; }
  bool position_independent() const { return model_->position_independent(); }
  bool quadratic() const { return model_->quadratic(); }
  bool has_weight() const { return !phi_.is_zero(); }

  double F(const Vec& x, const Vec& v) const { return model_->norm(as_span(x), as_span(v)); }
  double F(const ChartPoint& x, const TangentVector& v) const { return F(x.coords, v.comps); }
  double F2(const Vec& x, const Vec& v) const { return model_->sq(as_span(x), as_span(v)); }

  template <class S>
  S F2(std::span<const S> x, std::span<const S> v) const {
    return model_->sq(x, v);
  }
  template <class S>
  S phi(std::span<const S> x) const {
    return phi_.eval<S>(x);
  }
  double phi(const Vec& x) const { return phi_.eval<double>(as_span(x)); }
  const ScalarField& phi_field() const noexcept { return phi_; }

  /// Canonical representative in the periodic cell [0, L_i) on finite axes.
  Vec reduce(const Vec& x) const;
  ChartPoint reduce(const ChartPoint& x) const { return {reduce(x.coords)}; }

  /// Declarative description this structure was built from.
  const nlohmann::json& spec() const noexcept { return spec_; }
  std::uint64_t hash() const noexcept { return hash_; }
  std::string hash_hex() const;

  const std::shared_ptr<const NormModel>& model() const noexcept { return model_; }

 private:
  int dim_;
  Vec periods_;
  std::shared_ptr<const NormModel> model_;
  ScalarField phi_;
  bool reversible_;
  nlohmann::json spec_;
  std::uint64_t hash_;
};

// ---- built-in families ----------------------------------------------------

/// Infinite periods on every axis (non-compact chart).
Vec open_chart(int dim);

FinslerStructure euclidean(int dim, Vec periods, ScalarField phi = {});
FinslerStructure riemannian(MetricField metric, Vec periods, ScalarField phi = {});
/// F = √(a(v,v)) + b(v). Admissibility (|b|_a < 1) is checked by the audit,
/// not here, so broken structures can still be inspected.
FinslerStructure randers(MetricField metric, OneFormField b, Vec periods, ScalarField phi = {});
/// F² = |v|² + ε Σ(v^i)⁴ / |v|².
FinslerStructure quartic_minkowski(int dim, double epsilon, Vec periods, ScalarField phi = {});

/// Identity metric field.
MetricField identity_metric(int dim);
/// Constant one-form.
OneFormField constant_one_form(const Vec& b);

/// F̄(x, v) = F(x, −v), same measure.
FinslerStructure reverse_structure(const FinslerStructure& fs);

/// Builds a structure from its declarative description (family, dim,
/// periods, phi, metric, b, epsilon, reverse).
FinslerStructure structure_from_json(const nlohmann::json& spec);

}  // namespace finsler
