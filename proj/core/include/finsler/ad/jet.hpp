#pragma once

// Forward-mode truncated Taylor arithmetic.
//
// A Jet<T> carries a value together with the first and (optionally) second
// partial derivatives with respect to a declared set of seed variables. The
// coefficient type T is either double or another Jet, so Jet<Jet<double>>
// delivers mixed partials up to total order four: the outer level
// differentiates the inner one.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "finsler/error.hpp"

namespace finsler::ad {

inline constexpr int kMaxVars = 6;
inline constexpr int kMaxHess = kMaxVars * (kMaxVars + 1) / 2;

/// Packed index of the symmetric pair (i, j).
constexpr int sym_index(int i, int j) noexcept {
  return i <= j ? j * (j + 1) / 2 + i : i * (i + 1) / 2 + j;
}

template <class T>
class Jet;

template <class T>
struct is_jet : std::false_type {};
template <class T>
struct is_jet<Jet<T>> : std::true_type {};
template <class T>
inline constexpr bool is_jet_v = is_jet<T>::value;

/// The plain real value at the seed point, recursing through nesting levels.
inline double scalar_value(double x) noexcept { return x; }
template <class T>
double scalar_value(const Jet<T>& x) noexcept {
  return scalar_value(x.value());
}

template <class T>
class Jet {
 public:
  using value_type = T;

  Jet() : value_(T(0.0)) {}
  Jet(double c) : value_(T(c)) {}  // NOLINT: constants promote implicitly
  template <class U = T, class = std::enable_if_t<!std::is_same_v<U, double>>>
  Jet(const T& c) : value_(c) {}  // NOLINT

  /// Independent variable occupying slot `slot` of an `nvars`-variable seed set.
  static Jet variable(const T& value, int slot, int nvars, int order) {
    if (order < 1 || order > 2) throw ValidationError("jet order must be 1 or 2");
    if (nvars < 1 || nvars > kMaxVars)
      throw ValidationError("jet supports 1.." + std::to_string(kMaxVars) + " seed variables");
    if (slot < 0 || slot >= nvars) throw ValidationError("seed slot out of range");
    Jet j(value);
    j.nv_ = static_cast<std::uint8_t>(nvars);
    j.order_ = static_cast<std::uint8_t>(order);
    j.d_[slot] = T(1.0);
    return j;
  }

  const T& value() const noexcept { return value_; }
  T& value() noexcept { return value_; }
  int nvars() const noexcept { return nv_; }
  /// 0 for constants, otherwise the highest derivative order carried.
  int order() const noexcept { return order_; }
  bool is_constant() const noexcept { return nv_ == 0; }

  /// First partial with respect to slot i (zero for constants).
  T d(int i) const { return i < nv_ ? d_[i] : T(0.0); }
  /// Second partial with respect to slots (i, j).
  T d2(int i, int j) const {
    if (i >= nv_ || j >= nv_) return T(0.0);
    if (order_ < 2) throw DomainError("second derivative requested from an order-1 jet");
    return h_[sym_index(i, j)];
  }

  T& raw_d(int i) noexcept { return d_[i]; }
  T& raw_h(int i, int j) noexcept { return h_[sym_index(i, j)]; }
  const T& raw_d(int i) const noexcept { return d_[i]; }
  const T& raw_h(int i, int j) const noexcept { return h_[sym_index(i, j)]; }

  Jet operator-() const {
    Jet r = shaped_like(*this);
    r.value_ = -value_;
    for (int i = 0; i < nv_; ++i) r.d_[i] = -d_[i];
    if (order_ == 2)
      for (int k = 0; k < nh(); ++k) r.h_[k] = -h_[k];
    return r;
  }

  Jet& operator+=(const Jet& o) { return *this = *this + o; }
  Jet& operator-=(const Jet& o) { return *this = *this - o; }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r = combined(a, b);
    r.value_ = a.value_ + b.value_;
    for (int i = 0; i < r.nv_; ++i) r.d_[i] = a.dd(i) + b.dd(i);
    if (r.order_ == 2)
      for (int k = 0; k < r.nh(); ++k) r.h_[k] = a.hh(k) + b.hh(k);
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r = combined(a, b);
    r.value_ = a.value_ - b.value_;
    for (int i = 0; i < r.nv_; ++i) r.d_[i] = a.dd(i) - b.dd(i);
    if (r.order_ == 2)
      for (int k = 0; k < r.nh(); ++k) r.h_[k] = a.hh(k) - b.hh(k);
    return r;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    if (a.nv_ == 0) return a.value_ * b;
    if (b.nv_ == 0) return a * b.value_;
    Jet r = combined(a, b);
    r.value_ = a.value_ * b.value_;
    for (int i = 0; i < r.nv_; ++i) r.d_[i] = a.value_ * b.d_[i] + a.d_[i] * b.value_;
    if (r.order_ == 2) {
      for (int j = 0; j < r.nv_; ++j)
        for (int i = 0; i <= j; ++i) {
          const int k = sym_index(i, j);
          r.h_[k] = a.value_ * b.h_[k] + a.d_[i] * b.d_[j] + a.d_[j] * b.d_[i] + a.h_[k] * b.value_;
        }
    }
    return r;
  }
  friend Jet operator/(const Jet& a, const Jet& b) {
    if (b.nv_ == 0) {
      if (scalar_value(b.value_) == 0.0) throw DomainError("division by zero in jet arithmetic");
      return a * (T(1.0) / b.value_);
    }
    return a * reciprocal(b);
  }

  // Scalar-coefficient forms avoid promoting T to a full jet.
  friend Jet operator*(const T& s, const Jet& b) {
    Jet r = shaped_like(b);
    r.value_ = s * b.value_;
    for (int i = 0; i < b.nv_; ++i) r.d_[i] = s * b.d_[i];
    if (b.order_ == 2)
      for (int k = 0; k < b.nh(); ++k) r.h_[k] = s * b.h_[k];
    return r;
  }
  friend Jet operator*(const Jet& b, const T& s) { return s * b; }
  friend Jet operator*(double s, const Jet& b)
    requires(!std::is_same_v<T, double>)
  {
    return T(s) * b;
  }
  friend Jet operator*(const Jet& b, double s)
    requires(!std::is_same_v<T, double>)
  {
    return T(s) * b;
  }

  /// Apply a scalar function given its value and first two derivatives at
  /// the current value.
  Jet chain(const T& f0, const T& f1, const T& f2) const {
    Jet r = shaped_like(*this);
    r.value_ = f0;
    for (int i = 0; i < nv_; ++i) r.d_[i] = f1 * d_[i];
    if (order_ == 2) {
      for (int j = 0; j < nv_; ++j)
        for (int i = 0; i <= j; ++i) {
          const int k = sym_index(i, j);
          r.h_[k] = f1 * h_[k] + f2 * (d_[i] * d_[j]);
        }
    }
    return r;
  }

  friend Jet reciprocal(const Jet& a) {
    if (scalar_value(a.value_) == 0.0) throw DomainError("division by zero in jet arithmetic");
    const T inv = T(1.0) / a.value_;
    const T inv2 = inv * inv;
    return a.chain(inv, -inv2, 2.0 * (inv2 * inv));
  }

 private:
  int nh() const noexcept { return nv_ * (nv_ + 1) / 2; }
  T dd(int i) const { return i < nv_ ? d_[i] : T(0.0); }
  T hh(int k) const { return k < nh() ? h_[k] : T(0.0); }

  static Jet shaped_like(const Jet& a) {
    Jet r;
    r.nv_ = a.nv_;
    r.order_ = a.order_;
    return r;
  }
  static Jet combined(const Jet& a, const Jet& b) {
    if (a.nv_ != 0 && b.nv_ != 0 && a.nv_ != b.nv_)
      throw ValidationError("jets seeded over different variable sets cannot be combined");
    Jet r;
    r.nv_ = a.nv_ > b.nv_ ? a.nv_ : b.nv_;
    if (a.nv_ == 0)
      r.order_ = b.order_;
    else if (b.nv_ == 0)
      r.order_ = a.order_;
    else
      r.order_ = a.order_ < b.order_ ? a.order_ : b.order_;
    return r;
  }

  T value_;
  std::array<T, kMaxVars> d_{};
  std::array<T, kMaxHess> h_{};
  std::uint8_t nv_ = 0;
  std::uint8_t order_ = 0;
};

// ---- elementary functions -------------------------------------------------
// Each overload set covers plain doubles through ADL-free calls in generic
// code: `using std::sqrt; sqrt(x)` resolves to these for jets.

template <class T>
Jet<T> sqrt(const Jet<T>& a) {
  using std::sqrt;
  const double v = scalar_value(a);
  if (a.is_constant()) {
    if (v < 0.0) throw DomainError("sqrt of a negative value");
    return Jet<T>(T(sqrt(a.value())));
  }
  if (v <= 0.0) throw DomainError("sqrt is not differentiable at a nonpositive value");
  const T s = sqrt(a.value());
  const T inv = T(1.0) / s;
  return a.chain(s, 0.5 * inv, -0.25 * (inv / a.value()));
}

template <class T>
Jet<T> exp(const Jet<T>& a) {
  using std::exp;
  const T e = exp(a.value());
  return a.chain(e, e, e);
}

template <class T>
Jet<T> log(const Jet<T>& a) {
  using std::log;
  if (scalar_value(a) <= 0.0) throw DomainError("log of a nonpositive value");
  const T inv = T(1.0) / a.value();
  return a.chain(log(a.value()), inv, -(inv * inv));
}

template <class T>
Jet<T> pow(const Jet<T>& a, double p) {
  using std::pow;
  const double v = scalar_value(a);
  if (a.is_constant()) return Jet<T>(T(pow(a.value(), p)));
  if (v <= 0.0) throw DomainError("pow is only differentiated at positive base values");
  const T f0 = pow(a.value(), p);
  const T f1 = p * pow(a.value(), p - 1.0);
  const T f2 = (p * (p - 1.0)) * pow(a.value(), p - 2.0);
  return a.chain(f0, f1, f2);
}

template <class T>
Jet<T> sin(const Jet<T>& a) {
  using std::cos;
  using std::sin;
  const T s = sin(a.value());
  return a.chain(s, cos(a.value()), -s);
}

template <class T>
Jet<T> cos(const Jet<T>& a) {
  using std::cos;
  using std::sin;
  const T c = cos(a.value());
  return a.chain(c, -sin(a.value()), -c);
}

}  // namespace finsler::ad
