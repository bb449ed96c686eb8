#include "finsler/data.hpp"

#include <cmath>
#include <numbers>

#include "finsler/error.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

namespace {

/// c − x shifted to the nearest periodic image.
Vec nearest_offset(const Vec& periods, const Vec& x, const Vec& c) {
  Vec d = c - x;
  for (int i = 0; i < d.size(); ++i)
    if (std::isfinite(periods(i))) d(i) = std::remainder(d(i), periods(i));
  return d;
}

void require_periods(const FinslerStructure& fs, const char* what) {
  for (int i = 0; i < fs.dim(); ++i)
    if (!fs.is_periodic(i)) throw ValidationError(std::string(what) + " needs finite periods", "initial.kind");
}

void require_periodic_grid(const Grid& g, const char* what) {
  if (!g.periodic) throw ValidationError(std::string(what) + " needs a periodic grid", "initial.kind");
}

void require_center(const FinslerStructure& fs, const Vec& c) {
  if (c.size() != fs.dim()) throw ValidationError("center has the wrong dimension", "initial.center");
}

}  // namespace

Datum gaussian_bump_datum(const FinslerStructure& fs, const Vec& center, double width, double amplitude,
                          double floor) {
  require_center(fs, center);
  if (!(width > 0.0)) throw ValidationError("width must be positive", "initial.width");
  return [periods = fs.periods(), center, width, amplitude, floor](const Vec& x) {
    return floor + amplitude * std::exp(-nearest_offset(periods, x, center).squaredNorm() / (width * width));
  };
}

GridField gaussian_bump(const FinslerStructure& fs, const Grid& g, const Vec& center, double width, double amplitude,
                        double floor) {
  return sample(g, gaussian_bump_datum(fs, center, width, amplitude, floor));
}

Datum heat_kernel_function(const FinslerStructure& fs, const Vec& center, double t0, double floor) {
  require_center(fs, center);
  if (!(t0 > 0.0)) throw ValidationError("t0 must be positive", "initial.t0");
  const double norm = std::pow(t0, -0.5 * fs.dim());
  return [fs, center, t0, floor, norm](const Vec& x) {
    const Vec d = nearest_offset(fs.periods(), x, center);
    const double f = d.norm() > 0.0 ? fs.F(x, d) : 0.0;
    return floor + norm * std::exp(-f * f / (4.0 * t0));
  };
}

GridField heat_kernel_datum(const FinslerStructure& fs, const Grid& g, const Vec& center, double t0, double floor) {
  return sample(g, heat_kernel_function(fs, center, t0, floor));
}

Datum sine_mode_datum(const FinslerStructure& fs, const Index& k, double amplitude) {
  require_periods(fs, "sine mode");
  return [periods = fs.periods(), k, amplitude](const Vec& x) {
    double ph = 0.0;
    for (int i = 0; i < x.size(); ++i) ph += 2.0 * std::numbers::pi * k[i] * x(i) / periods(i);
    return amplitude * std::sin(ph);
  };
}

GridField sine_mode(const FinslerStructure& fs, const Grid& g, const Index& k, double amplitude) {
  require_periodic_grid(g, "sine mode");
  return sample(g, sine_mode_datum(fs, k, amplitude));
}

Datum random_smooth_datum(const FinslerStructure& fs, std::uint64_t seed, int kmax, double amplitude) {
  require_periods(fs, "random smooth datum");
  if (kmax < 1) throw ValidationError("kmax must be at least 1", "initial.kmax");
  const int n = fs.dim();
  struct Term {
    Index k;
    double a, b;
  };
  Rng rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<Term> terms;
  const int span = 2 * kmax + 1;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= span;
  for (int c = 0; c < total; ++c) {
    Index k{0, 0, 0};
    int rem = c, k2 = 0;
    for (int i = 0; i < n; ++i) {
      k[i] = rem % span - kmax;
      rem /= span;
      k2 += k[i] * k[i];
    }
    int lead = 0;
    for (int i = n - 1; i >= 0 && lead == 0; --i) lead = k[i];
    if (lead <= 0) continue;
    const double a = U(rng) / k2, b = U(rng) / k2;
    terms.push_back({k, a, b});
  }
  return [periods = fs.periods(), terms = std::move(terms), amplitude, n](const Vec& x) {
    double s = 0.0;
    for (const auto& t : terms) {
      double ph = 0.0;
      for (int i = 0; i < n; ++i) ph += 2.0 * std::numbers::pi * t.k[i] * x(i) / periods(i);
      s += t.a * std::cos(ph) + t.b * std::sin(ph);
    }
    return amplitude * s;
  };
}

GridField random_smooth(const FinslerStructure& fs, const Grid& g, std::uint64_t seed, int kmax, double amplitude) {
  require_periodic_grid(g, "random smooth datum");
  return sample(g, random_smooth_datum(fs, seed, kmax, amplitude));
}

}  // namespace finsler
