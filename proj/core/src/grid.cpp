#include "finsler/grid.hpp"

#include <cmath>

#include "finsler/error.hpp"

namespace finsler {

Grid Grid::periodic_cell(const FinslerStructure& fs, int nodes_per_axis) {
  Index s{1, 1, 1};
  for (int i = 0; i < fs.dim(); ++i) s[i] = nodes_per_axis;
  return periodic_cell(fs, s);
}

Grid Grid::periodic_cell(const FinslerStructure& fs, const Index& shape) {
  Grid g;
  g.dim = fs.dim();
  g.h.resize(g.dim);
  g.origin = Vec::Zero(g.dim);
  g.periodic = true;
  for (int i = 0; i < g.dim; ++i) {
    if (!fs.is_periodic(i)) throw ValidationError("periodic grid needs a periodic axis", "grid.shape");
    if (shape[i] < 5) throw ValidationError("need at least 5 nodes per axis", "grid.shape");
    g.shape[i] = shape[i];
    g.h(i) = fs.periods()(i) / shape[i];
  }
  return g;
}

Grid Grid::patch(const Vec& lo, const Vec& hi, const Index& shape) {
  Grid g;
  g.dim = static_cast<int>(lo.size());
  if (hi.size() != lo.size() || g.dim < 1 || g.dim > kMaxDim) throw ValidationError("patch corners must match", "grid");
  g.h.resize(g.dim);
  g.origin = lo;
  g.periodic = false;
  for (int i = 0; i < g.dim; ++i) {
    if (shape[i] < 5) throw ValidationError("need at least 5 nodes per axis", "grid.shape");
    if (!(hi(i) > lo(i))) throw ValidationError("patch must have positive extent", "grid");
    g.shape[i] = shape[i];
    g.h(i) = (hi(i) - lo(i)) / (shape[i] - 1);
  }
  return g;
}

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int i = 0; i < dim; ++i) s *= static_cast<std::size_t>(shape[i]);
  return s;
}

Index Grid::multi(std::size_t flat) const {
  Index m{0, 0, 0};
  for (int i = dim - 1; i >= 0; --i) {
    m[i] = static_cast<int>(flat % static_cast<std::size_t>(shape[i]));
    flat /= static_cast<std::size_t>(shape[i]);
  }
  return m;
}

std::size_t Grid::flat(Index m) const {
  std::size_t f = 0;
  for (int i = 0; i < dim; ++i) {
    int k = m[i];
    if (periodic) {
      k %= shape[i];
      if (k < 0) k += shape[i];
    }
    f = f * static_cast<std::size_t>(shape[i]) + static_cast<std::size_t>(k);
  }
  return f;
}

Vec Grid::node(const Index& m) const {
  Vec x(dim);
  for (int i = 0; i < dim; ++i) x(i) = origin(i) + m[i] * h(i);
  return x;
}

Vec Grid::node(std::size_t flat) const { return node(multi(flat)); }

bool Grid::interior(std::size_t flat, int width) const {
  if (periodic) return true;
  const Index m = multi(flat);
  for (int i = 0; i < dim; ++i)
    if (m[i] < width || m[i] > shape[i] - 1 - width) return false;
  return true;
}

nlohmann::json Grid::to_json() const {
  nlohmann::json s = nlohmann::json::array(), hh = nlohmann::json::array(), o = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) {
    s.push_back(shape[i]);
    hh.push_back(h(i));
    o.push_back(origin(i));
  }
  return {{"shape", s}, {"h", hh}, {"origin", o}, {"periodic", periodic}};
}

bool Grid::operator==(const Grid& o) const {
  if (dim != o.dim || periodic != o.periodic) return false;
  for (int i = 0; i < dim; ++i)
    if (shape[i] != o.shape[i] || h(i) != o.h(i) || origin(i) != o.origin(i)) return false;
  return true;
}

Vec GridField::at(std::size_t node) const {
  Vec v(comps);
  for (int c = 0; c < comps; ++c) v(c) = (*this)(node, c);
  return v;
}

void GridField::set(std::size_t node, const Vec& v) {
  for (int c = 0; c < comps; ++c) (*this)(node, c) = v(c);
}

bool GridField::all_finite() const {
  for (double x : values)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace finsler
