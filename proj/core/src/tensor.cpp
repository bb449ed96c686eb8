#include "finsler/tensor.hpp"

#include <cmath>
#include <string>

#include "finsler/error.hpp"

namespace finsler {

using ad::Jet1;
using ad::Jet2;

namespace {

void require_nonzero(const Vec& v, const char* what) {
  if (v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0)
    throw DomainError(std::string(what) + " is undefined at the zero vector");
}

void check_point(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  if (x.size() != fs.dim() || v.size() != fs.dim()) throw ValidationError("point and vector must have dim components");
}

double inner_coeff(const Jet1& c, int a, int b) {
  if (a < 0) return c.value();
  if (b < 0) return c.d(a);
  return c.d2(a, b);
}

/// Inner-level coefficient of a jet-of-jet as a jet over the outer slots.
Jet1 lift_coeff(const Jet2& r, int nvars, int a, int b = -1) {
  Jet1 out = Jet1::variable(inner_coeff(r.value(), a, b), 0, nvars, 2);
  for (int i = 0; i < nvars; ++i) {
    out.raw_d(i) = inner_coeff(r.d(i), a, b);
    for (int j = 0; j <= i; ++j) out.raw_h(i, j) = inner_coeff(r.d2(i, j), a, b);
  }
  return out;
}

/// g, G and Φ as functions of (x, v) carried to second order, so that
/// curvature and connection terms come out of a single F² evaluation.
struct Lifted {
  int n = 0;
  double F2 = 0.0;
  SmallMat<Jet1> g;
  std::array<Jet1, kMaxDim> G;
  Jet1 phi;
};

Lifted lift(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  const int n = fs.dim();
  const int m = 2 * n;
  std::array<double, 2 * kMaxDim> z{};
  for (int i = 0; i < n; ++i) {
    z[i] = x(i);
    z[n + i] = v(i);
  }
  const auto Z = ad::seed_nested(std::span<const double>(z.data(), m), 2, 2);
  const Jet2 R = fs.F2<Jet2>(std::span<const Jet2>(Z.data(), n), std::span<const Jet2>(Z.data() + n, n));

  Lifted L;
  L.n = n;
  L.F2 = ad::scalar_value(R);
  L.g = SmallMat<Jet1>(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      L.g(i, j) = 0.5 * lift_coeff(R, m, n + i, n + j);
      L.g(j, i) = L.g(i, j);
    }
  const SmallMat<Jet1> ginv = inverse(L.g);
  std::array<Jet1, kMaxDim> rhs;
  std::array<Jet1, kMaxDim> vj;
  for (int k = 0; k < n; ++k) vj[k] = Jet1::variable(v(k), n + k, m, 2);
  for (int l = 0; l < n; ++l) {
    Jet1 acc = -lift_coeff(R, m, l);
    for (int k = 0; k < n; ++k) acc = acc + lift_coeff(R, m, k, n + l) * vj[k];
    rhs[l] = acc;
  }
  for (int i = 0; i < n; ++i) {
    Jet1 acc(0.0);
    for (int l = 0; l < n; ++l) acc = acc + ginv(i, l) * rhs[l];
    L.G[i] = 0.5 * acc;
  }
  std::array<Jet1, kMaxDim> xj;
  for (int k = 0; k < n; ++k) xj[k] = Jet1::variable(x(k), k, m, 2);
  L.phi = fs.phi<Jet1>(std::span<const Jet1>(xj.data(), n));
  return L;
}

TensorPack pack_from(const Lifted& L, const Vec& x, const Vec& v) {
  const int n = L.n;
  TensorPack p;
  p.n = n;
  p.x = x;
  p.v = v;
  p.F = std::sqrt(L.F2);
  p.g.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.g(i, j) = L.g(i, j).value();
  p.g_inv = p.g.inverse();
  p.A = Tensor3(n);
  p.gamma = Tensor3(n);
  p.Gamma = Tensor3(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) p.A(i, j, k) = 0.5 * p.F * L.g(i, j).d(n + k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l)
          acc += p.g_inv(i, l) * (L.g(j, l).d(k) + L.g(l, k).d(j) - L.g(j, k).d(l));
        p.gamma(i, j, k) = 0.5 * acc;
      }
  p.G.resize(n);
  p.N.resize(n, n);
  for (int i = 0; i < n; ++i) {
    p.G(i) = L.G[i].value();
    for (int j = 0; j < n; ++j) p.N(i, j) = 0.5 * L.G[i].d(n + j);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double corr = 0.0;
        for (int l = 0; l < n; ++l) {
          double t = 0.0;
          for (int mm = 0; mm < n; ++mm)
            t += p.A(j, l, mm) * p.N(mm, k) + p.A(l, k, mm) * p.N(mm, j) - p.A(j, k, mm) * p.N(mm, l);
          corr += p.g_inv(i, l) * t;
        }
        p.Gamma(i, j, k) = p.gamma(i, j, k) - corr / p.F;
      }
  return p;
}

Curvature curvature_from(const Lifted& L, const Vec& v) {
  const int n = L.n;
  Curvature c;

  // Spray curvature in the convention ẍ + 2Gs = 0.
  double ric = 0.0;
  for (int i = 0; i < n; ++i) {
    const Jet1& Gi = L.G[i];
    double r = Gi.d(i);  // 2 ∂Gs^i/∂x^i
    for (int j = 0; j < n; ++j) {
      r -= 0.5 * v(j) * Gi.d2(j, n + i);
      r += 0.5 * L.G[j].value() * Gi.d2(n + j, n + i);
      r -= 0.25 * Gi.d(n + j) * L.G[j].d(n + i);
    }
    ric += r;
  }
  c.ric = ric;

  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = L.g(i, j).value();
  const Mat ginv = g.inverse();
  Vec a(n), adot(n);
  for (int k = 0; k < n; ++k) a(k) = -L.G[k].value();
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int l = 0; l < n; ++l) s += L.G[k].d(l) * v(l) + L.G[k].d(n + l) * a(l);
    adot(k) = -s;
  }
  Mat gd(n, n), gdd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Jet1& e = L.g(i, j);
      double d1 = 0.0, d2 = 0.0;
      for (int k = 0; k < n; ++k) {
        d1 += e.d(k) * v(k) + e.d(n + k) * a(k);
        d2 += e.d(k) * a(k) + e.d(n + k) * adot(k);
        for (int l = 0; l < n; ++l)
          d2 += e.d2(k, l) * v(k) * v(l) + 2.0 * e.d2(k, n + l) * v(k) * a(l) + e.d2(n + k, n + l) * a(k) * a(l);
      }
      gd(i, j) = d1;
      gdd(i, j) = d2;
    }
  const Mat ga = ginv * gd;
  double phi1 = 0.0, phi2 = 0.0;
  for (int k = 0; k < n; ++k) {
    phi1 += L.phi.d(k) * v(k);
    phi2 += L.phi.d(k) * a(k);
    for (int l = 0; l < n; ++l) phi2 += L.phi.d2(k, l) * v(k) * v(l);
  }
  c.psi1 = 0.5 * ga.trace() - phi1;
  c.psi2 = 0.5 * (ginv * gdd).trace() - 0.5 * (ga * ga).trace() - phi2;
  return c;
}

}  // namespace

FundamentalTensor fundamental_tensor(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  check_point(fs, x, v);
  const int n = fs.dim();
  std::array<Jet1, kMaxDim> xc, vj;
  for (int i = 0; i < n; ++i) {
    xc[i] = Jet1(x(i));
    vj[i] = Jet1::variable(v(i), i, n, 2);
  }
  const Jet1 f = fs.F2<Jet1>(std::span<const Jet1>(xc.data(), n), std::span<const Jet1>(vj.data(), n));
  FundamentalTensor t;
  t.F2 = f.value();
  t.dF2.resize(n);
  t.g.resize(n, n);
  for (int i = 0; i < n; ++i) {
    t.dF2(i) = f.d(i);
    for (int j = 0; j < n; ++j) t.g(i, j) = 0.5 * f.d2(i, j);
  }
  t.g_inv = t.g.inverse();
  return t;
}

Vec spray(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  check_point(fs, x, v);
  const int n = fs.dim();
  if (v.cwiseAbs().maxCoeff() == 0.0) return Vec::Zero(n);
  if (fs.position_independent()) return Vec::Zero(n);
  const int m = 2 * n;
  std::array<Jet1, kMaxDim> xj, vj;
  for (int i = 0; i < n; ++i) {
    xj[i] = Jet1::variable(x(i), i, m, 2);
    vj[i] = Jet1::variable(v(i), n + i, m, 2);
  }
  const Jet1 f = fs.F2<Jet1>(std::span<const Jet1>(xj.data(), n), std::span<const Jet1>(vj.data(), n));
  Mat g(n, n);
  Vec rhs(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = 0.5 * f.d2(n + i, n + j);
    double acc = -f.d(i);
    for (int k = 0; k < n; ++k) acc += f.d2(k, n + i) * v(k);
    rhs(i) = acc;
  }
  return 0.5 * g.ldlt().solve(rhs);
}

SprayJet spray_jet(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  check_point(fs, x, v);
  const int n = fs.dim();
  SprayJet s{Vec::Zero(n), Mat::Zero(n, n), Mat::Zero(n, n)};
  if (fs.position_independent()) return s;
  require_nonzero(v, "spray derivative");
  const Lifted L = lift(fs, x, v);
  for (int i = 0; i < n; ++i) {
    s.G(i) = L.G[i].value();
    for (int j = 0; j < n; ++j) {
      s.Gx(i, j) = L.G[i].d(j);
      s.Gv(i, j) = L.G[i].d(n + j);
    }
  }
  return s;
}

TensorPack tensor_pack(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  check_point(fs, x, v);
  require_nonzero(v, "tensor pack");
  return pack_from(lift(fs, x, v), x, v);
}

Curvature curvature(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  check_point(fs, x, v);
  require_nonzero(v, "curvature");
  return curvature_from(lift(fs, x, v), v);
}

std::pair<TensorPack, Curvature> tensor_pack_with_curvature(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  check_point(fs, x, v);
  require_nonzero(v, "curvature");
  const Lifted L = lift(fs, x, v);
  return {pack_from(L, x, v), curvature_from(L, v)};
}

double ricci(const FinslerStructure& fs, const Vec& x, const Vec& v) { return curvature(fs, x, v).ric; }

double s_curvature(const FinslerStructure& fs, const Vec& x, const Vec& v) { return curvature(fs, x, v).psi1; }

double psi(const FinslerStructure& fs, const Vec& x, const Vec& v) {
  const FundamentalTensor t = fundamental_tensor(fs, x, v);
  return 0.5 * std::log(t.g.determinant()) - fs.phi(x);
}

Vec covariant_derivative(const FinslerStructure& fs, const JetVectorField& X, const Vec& x, const Vec& v,
                         const Vec& w) {
  check_point(fs, x, v);
  require_nonzero(w, "covariant derivative reference vector");
  const int n = fs.dim();
  std::array<Jet1, kMaxDim> xj, out;
  for (int i = 0; i < n; ++i) xj[i] = Jet1::variable(x(i), i, n, 1);
  X(std::span<const Jet1>(xj.data(), n), std::span<Jet1>(out.data(), n));
  const TensorPack p = tensor_pack(fs, x, w);
  Vec r = Vec::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      r(i) += v(j) * out[i].d(j);
      for (int k = 0; k < n; ++k) r(i) += p.Gamma(i, j, k) * v(j) * out[k].value();
    }
  return r;
}

double weighted_ricci(const Curvature& c, int n, double speed, double N) {
  if (std::isnan(N) || N < n) throw ValidationError("weighted Ricci needs N >= n");
  const double s2 = speed * speed;
  // Unit-speed quantities.
  const double ric = c.ric / s2;
  const double p1 = c.psi1 / speed;
  const double p2 = c.psi2 / s2;
  double value;
  if (std::isinf(N)) {
    value = ric + p2;
  } else if (N == n) {
    if (std::abs(p1) > 1e-9) return -kInf;
    value = ric + p2;
  } else {
    value = ric + p2 - p1 * p1 / (N - n);
  }
  return s2 * value;
}

double weighted_ricci(const FinslerStructure& fs, const Vec& x, const Vec& v, double N) {
  if (std::isnan(N) || N < fs.dim()) throw ValidationError("weighted Ricci needs N >= n");
  const Curvature c = curvature(fs, x, v);
  return weighted_ricci(c, fs.dim(), fs.F(x, v), N);
}

}  // namespace finsler
