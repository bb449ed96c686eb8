#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "finsler/ad/jet.hpp"

namespace finsler::ad {

using Jet1 = Jet<double>;
using Jet2 = Jet<Jet<double>>;

/// A declared seed set: variable ids in slot order.
class Seeding {
 public:
  Seeding() = default;
  Seeding(std::vector<int> ids, int order) : ids_(std::move(ids)), order_(order) {
    if (order_ < 1 || order_ > 2) throw ValidationError("seed order must be 1 or 2");
    if (ids_.empty()) throw ValidationError("seed direction set must be nonempty");
    if (static_cast<int>(ids_.size()) > kMaxVars)
      throw ValidationError("at most " + std::to_string(kMaxVars) + " seed variables");
    auto sorted = ids_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ValidationError("duplicate variable id in seed set");
  }

  int size() const noexcept { return static_cast<int>(ids_.size()); }
  int order() const noexcept { return order_; }
  const std::vector<int>& ids() const noexcept { return ids_; }

  int slot(int id) const {
    auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) throw ValidationError("variable id " + std::to_string(id) + " is not seeded");
    return static_cast<int>(it - ids_.begin());
  }

  std::vector<int> slots(std::span<const int> multi_index) const {
    std::vector<int> out;
    out.reserve(multi_index.size());
    for (int id : multi_index) out.push_back(slot(id));
    return out;
  }

 private:
  std::vector<int> ids_;
  int order_ = 1;
};

/// Independent-variable jets at `point` for the variables `ids`.
inline std::vector<Jet1> seed(std::span<const double> point, std::span<const int> ids, int order) {
  Seeding s(std::vector<int>(ids.begin(), ids.end()), order);
  if (point.size() != ids.size()) throw ValidationError("seed point and id list differ in length");
  std::vector<Jet1> out;
  out.reserve(point.size());
  for (int k = 0; k < s.size(); ++k) out.push_back(Jet1::variable(point[k], k, s.size(), order));
  return out;
}

/// Jet-of-jet variables: both levels seeded over the same slots, so
/// extraction reaches total order outer_order + inner_order.
inline std::vector<Jet2> seed_nested(std::span<const double> point, int outer_order, int inner_order) {
  const int n = static_cast<int>(point.size());
  std::vector<Jet2> out;
  out.reserve(point.size());
  for (int k = 0; k < n; ++k)
    out.push_back(Jet2::variable(Jet1::variable(point[k], k, n, inner_order), k, n, outer_order));
  return out;
}

namespace detail {

template <class T>
T coefficient(const Jet<T>& j, std::span<const int> slots) {
  switch (slots.size()) {
    case 0:
      return j.value();
    case 1:
      return j.d(slots[0]);
    default:
      return j.d2(slots[0], slots[1]);
  }
}

}  // namespace detail

inline double extract(double x, std::span<const int> slots) {
  if (!slots.empty())
    throw DomainError("derivative of order " + std::to_string(slots.size()) +
                      " requested from a plain value (order 0)");
  return x;
}

/// Mixed partial derivative at the seed point; `slots` lists one slot index
/// per differentiation. Any split between nesting levels gives the same
/// result because mixed partials commute.
template <class T>
double extract(const Jet<T>& j, std::span<const int> slots) {
  const int want = static_cast<int>(slots.size());
  if (j.is_constant()) {
    // Constants carry zero derivatives of every order.
    return want == 0 ? scalar_value(j) : 0.0;
  }
  const int here = std::min(want, j.order());
  if (want > here && !is_jet_v<T>)
    throw DomainError("derivative of order " + std::to_string(want) + " exceeds jet order " +
                      std::to_string(j.order()));
  for (int s : slots)
    if (s < 0 || s >= j.nvars()) throw ValidationError("multi-index slot out of range");
  const T c = detail::coefficient(j, slots.first(here));
  return extract(c, slots.subspan(here));
}

inline double extract(const Jet1& j, std::initializer_list<int> slots) {
  return extract(j, std::span<const int>(slots.begin(), slots.size()));
}
inline double extract(const Jet2& j, std::initializer_list<int> slots) {
  return extract(j, std::span<const int>(slots.begin(), slots.size()));
}

}  // namespace finsler::ad
