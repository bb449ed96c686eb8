#pragma once

// Smooth coefficient fields on the chart: measure weights Φ, metric
// components a_ij, Randers one-forms b_i. Each field evaluates on plain
// doubles and on jets so the tensor layer can differentiate through it.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "finsler/ad/jet.hpp"
#include "finsler/types.hpp"

namespace finsler {

struct ConstantField {
  double value = 0.0;
};

struct TrigMode {
  std::array<int, kMaxDim> k{};
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

/// c0 + Σ_modes [a cos(2π k·x/L) + b sin(2π k·x/L)], periodic by construction.
struct TrigField {
  double constant = 0.0;
  std::vector<TrigMode> modes;
  Vec periods;
};

/// c0 + b·x + ½ xᵀQx; used on non-compact test charts.
struct QuadraticField {
  double c0 = 0.0;
  Vec linear;
  Mat hessian;
};

/// 4 / (1 + K|x|²)², the conformal factor of the constant-curvature-K metric
/// in stereographic coordinates.
struct ConformalSphereField {
  double curvature = 1.0;
};

/// power · log(4 / (1 + K|x|²)²). With power n/2 this is the log-density of
/// the Riemannian volume of the conformal sphere metric.
struct SphereLogField {
  double curvature = 1.0;
  double power = 1.0;
};

class ScalarField {
 public:
  using Variant = std::variant<ConstantField, TrigField, QuadraticField, ConformalSphereField, SphereLogField>;

  ScalarField() : f_(ConstantField{}) {}
  ScalarField(Variant f) : f_(std::move(f)) {}  // NOLINT
  static ScalarField constant(double c) { return ScalarField(ConstantField{c}); }

  template <class S>
  S eval(std::span<const S> x) const {
    return std::visit([&](const auto& f) { return eval_impl<S>(f, x); }, f_);
  }

  bool is_constant() const { return std::holds_alternative<ConstantField>(f_); }
  bool is_zero() const { return is_constant() && std::get<ConstantField>(f_).value == 0.0; }
  const Variant& variant() const { return f_; }

  nlohmann::json to_json() const;
  /// `periods` supplies the trigonometric period lengths.
  static ScalarField from_json(const nlohmann::json& j, const Vec& periods, int dim);

 private:
  template <class S>
  static S eval_impl(const ConstantField& f, std::span<const S>) {
    return S(f.value);
  }
  template <class S>
  static S eval_impl(const TrigField& f, std::span<const S> x) {
    using std::cos;
    using std::sin;
    using ad::cos;
    using ad::sin;
    S acc(f.constant);
    for (const auto& m : f.modes) {
      S theta(0.0);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (m.k[i] != 0) theta = theta + (2.0 * std::numbers::pi * m.k[i] / f.periods(static_cast<Eigen::Index>(i))) * x[i];
      if (m.cos_coeff != 0.0) acc = acc + m.cos_coeff * cos(theta);
      if (m.sin_coeff != 0.0) acc = acc + m.sin_coeff * sin(theta);
    }
    return acc;
  }
  template <class S>
  static S eval_impl(const QuadraticField& f, std::span<const S> x) {
    S acc(f.c0);
    const auto n = static_cast<Eigen::Index>(x.size());
    for (Eigen::Index i = 0; i < n && i < f.linear.size(); ++i)
      if (f.linear(i) != 0.0) acc = acc + f.linear(i) * x[i];
    if (f.hessian.size() == 0) return acc;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (f.hessian(i, j) != 0.0) acc = acc + (0.5 * f.hessian(i, j)) * (x[i] * x[j]);
    return acc;
  }
  template <class S>
  static S eval_impl(const ConformalSphereField& f, std::span<const S> x) {
    S r2(0.0);
    for (const auto& xi : x) r2 = r2 + xi * xi;
    const S denom = S(1.0) + f.curvature * r2;
    return S(4.0) / (denom * denom);
  }
  template <class S>
  static S eval_impl(const SphereLogField& f, std::span<const S> x) {
    using std::log;
    using ad::log;
    S r2(0.0);
    for (const auto& xi : x) r2 = r2 + xi * xi;
    const S denom = S(1.0) + f.curvature * r2;
    return f.power * (std::log(4.0) - 2.0 * log(denom));
  }

  Variant f_;
};

}  // namespace finsler
