#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "families.hpp"
#include "finsler/sampling.hpp"
#include "finsler/tensor.hpp"

using namespace finsler;
using namespace testing_families;
using ad::Jet1;

namespace {

std::vector<FinslerStructure> all_families() {
  return {euclidean(2, torus()), periodic_riemannian(), periodic_randers(), constant_randers(), quartic(), sphere()};
}

/// Classical Christoffel symbols Γ^i_jk of a Riemannian metric field, from
/// jets of the coefficient fields only.
Tensor3 classical_christoffel(const MetricField& a, const Vec& x) {
  const int n = static_cast<int>(x.size());
  std::array<Jet1, 3> xj;
  for (int i = 0; i < n; ++i) xj[i] = Jet1::variable(x(i), i, n, 1);
  Mat A(n, n);
  double dA[3][3][3];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Jet1 e = a[i][j].eval<Jet1>(std::span<const Jet1>(xj.data(), n));
      A(i, j) = e.value();
      for (int k = 0; k < n; ++k) dA[i][j][k] = e.d(k);
    }
  const Mat Ai = A.inverse();
  Tensor3 G(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int l = 0; l < n; ++l) s += Ai(i, l) * (dA[j][l][k] + dA[l][k][j] - dA[j][k][l]);
        G(i, j, k) = 0.5 * s;
      }
  return G;
}

/// Classical Ricci tensor contraction Ric(v, v), derivatives of Γ by central differences.
double classical_ricci(const MetricField& a, const Vec& x, const Vec& v) {
  const int n = static_cast<int>(x.size());
  const double h = 1e-5;
  const Tensor3 G = classical_christoffel(a, x);
  std::vector<Tensor3> dG;
  for (int m = 0; m < n; ++m) {
    Vec xp = x, xm = x;
    xp(m) += h;
    xm(m) -= h;
    const Tensor3 Gp = classical_christoffel(a, xp), Gm = classical_christoffel(a, xm);
    Tensor3 d(n);
    for (std::size_t q = 0; q < d.a.size(); ++q) d.a[q] = (Gp.a[q] - Gm.a[q]) / (2 * h);
    dG.push_back(d);
  }
  // R_jl = ∂_k Γ^k_lj − ∂_l Γ^k_kj + Γ^k_km Γ^m_lj − Γ^k_lm Γ^m_kj
  double ric = 0;
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      double r = 0;
      for (int k = 0; k < n; ++k) {
        r += dG[k](k, l, j) - dG[l](k, k, j);
        for (int m = 0; m < n; ++m) r += G(k, k, m) * G(m, l, j) - G(k, l, m) * G(m, k, j);
      }
      ric += r * v(j) * v(l);
    }
  return ric;
}

}  // namespace

TEST(TensorPack, EuclideanIsFlat) {
  const auto fs = euclidean(2, torus());
  const TensorPack p = tensor_pack(fs, make_vec({0.3, 0.7}), make_vec({0.4, -1.2}));
  EXPECT_TRUE(p.g.isIdentity(1e-15));
  for (double e : p.A.a) EXPECT_EQ(e, 0.0);
  for (double e : p.gamma.a) EXPECT_EQ(e, 0.0);
  for (double e : p.Gamma.a) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(p.G.norm(), 0.0);
  EXPECT_EQ(p.N.norm(), 0.0);
}

TEST(TensorPack, RejectsZeroVector) {
  EXPECT_THROW(tensor_pack(quartic(), make_vec({0, 0}), make_vec({0, 0})), DomainError);
  EXPECT_THROW(ricci(quartic(), make_vec({0, 0}), make_vec({0, 0})), DomainError);
}

TEST(TensorPack, ConstantRandersFundamentalTensor) {
  const auto fs = constant_randers();
  const Vec x = make_vec({0, 0}), v = make_vec({1, 0});
  const TensorPack p = tensor_pack(fs, x, v);
  EXPECT_NEAR(p.g(0, 0), 2.25, 1e-14);
  EXPECT_NEAR(p.g(1, 1), 1.5, 1e-14);
  EXPECT_NEAR(p.g(0, 1), 0.0, 1e-14);
  // Central finite differences of F²/2.
  const double h = 1e-4;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Vec e = Vec::Zero(2), f = Vec::Zero(2);
      e(i) = h;
      f(j) = h;
      const double fd = 0.5 *
                        (fs.F2(x, Vec(v + e + f)) - fs.F2(x, Vec(v + e - f)) - fs.F2(x, Vec(v - e + f)) +
                         fs.F2(x, Vec(v - e - f))) /
                        (4 * h * h);
      EXPECT_NEAR(p.g(i, j), fd, 1e-7);
    }
}

TEST(TensorPack, RiemannianChernMatchesClassicalChristoffel) {
  const auto a = periodic_metric(torus());
  const auto fs = riemannian(a, torus());
  Rng rng(8);
  for (int k = 0; k < 20; ++k) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng);
    const TensorPack p = tensor_pack(fs, x, v);
    const Tensor3 c = classical_christoffel(a, x);
    for (std::size_t q = 0; q < c.a.size(); ++q) EXPECT_NEAR(p.Gamma.a[q], c.a[q], 1e-9);
  }
}

TEST(TensorPack, InvariantsOnEveryFamily) {
  for (const auto& fs : all_families()) {
    Rng rng(12);
    for (int s = 0; s < 1000; ++s) {
      const Vec x = random_point(fs, rng);
      const Vec v = random_direction(2, rng) * (0.3 + 0.002 * s);
      const TensorPack p = tensor_pack(fs, x, v);
      const double F = p.F;
      EXPECT_LE((p.g - p.g.transpose()).norm(), 1e-12 * p.g.norm());
      EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(p.g).eigenvalues().minCoeff(), 0.0);
      EXPECT_LE((p.g * p.g_inv - Mat::Identity(2, 2)).norm(), 1e-12);
      double ascale = 1e-300;
      for (double e : p.A.a) ascale = std::max(ascale, std::abs(e));
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          for (int k = 0; k < 2; ++k) {
            EXPECT_NEAR(p.A(i, j, k), p.A(j, i, k), 1e-12 * ascale);
            EXPECT_NEAR(p.A(i, j, k), p.A(i, k, j), 1e-12 * ascale);
          }
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          double c = 0;
          for (int i = 0; i < 2; ++i) c += p.A(i, j, k) * v(i);
          EXPECT_LE(std::abs(c), 1e-10 * std::max(ascale * v.norm(), F * 1e-3));
        }
      const Vec Nv = p.N * v;
      EXPECT_LE((Nv - p.G).norm(), 1e-10 * std::max(1e-12, p.G.norm()) + 1e-14 * F * F);
    }
  }
}

TEST(TensorPack, HomogeneityOfSprayConnectionAndChern) {
  const auto fs = periodic_randers();
  Rng rng(13);
  for (int s = 0; s < 100; ++s) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng);
    const double c = 0.2 + 0.05 * s;
    const TensorPack p = tensor_pack(fs, x, v), q = tensor_pack(fs, x, Vec(c * v));
    EXPECT_LE((q.G - c * c * p.G).norm(), 1e-9 * c * c * p.G.norm());
    EXPECT_LE((q.N - c * p.N).norm(), 1e-9 * c * p.N.norm());
    for (std::size_t k = 0; k < p.Gamma.a.size(); ++k)
      EXPECT_NEAR(q.Gamma.a[k], p.Gamma.a[k], 1e-9 * std::max(1.0, std::abs(p.Gamma.a[k])));
    const double r1 = ricci(fs, x, v), rc = ricci(fs, x, Vec(c * v));
    EXPECT_NEAR(rc, c * c * r1, 1e-8 * std::max(1.0, std::abs(c * c * r1)));
  }
}

TEST(Spray, FastPathMatchesPack) {
  for (const auto& fs : all_families()) {
    Rng rng(14);
    for (int s = 0; s < 50; ++s) {
      const Vec x = random_point(fs, rng), v = random_direction(2, rng) * 1.3;
      EXPECT_LE((spray(fs, x, v) - tensor_pack(fs, x, v).G).norm(), 1e-12 * std::max(1.0, v.squaredNorm()));
    }
  }
}

TEST(CovariantDerivative, EuclideanFields) {
  const auto fs = euclidean(2, torus());
  const Vec x = make_vec({0.2, 0.4});
  JetVectorField constant = [](std::span<const Jet1>, std::span<Jet1> out) {
    out[0] = Jet1(1.0);
    out[1] = Jet1(-2.0);
  };
  JetVectorField position = [](std::span<const Jet1> y, std::span<Jet1> out) {
    out[0] = y[0];
    out[1] = y[1];
  };
  EXPECT_EQ(covariant_derivative(fs, constant, x, make_vec({1, 0}), make_vec({0.3, 1})).norm(), 0.0);
  const Vec d = covariant_derivative(fs, position, x, make_vec({1, 0}), make_vec({0.3, 1}));
  EXPECT_EQ(d(0), 1.0);
  EXPECT_EQ(d(1), 0.0);
  EXPECT_THROW(covariant_derivative(fs, position, x, make_vec({1, 0}), make_vec({0, 0})), DomainError);
}

TEST(Ricci, FlatStructuresVanish) {
  for (const auto& fs : {euclidean(2, torus()), quartic(), constant_randers()}) {
    Rng rng(15);
    for (int s = 0; s < 50; ++s) {
      const Vec x = random_point(fs, rng), v = random_direction(2, rng);
      EXPECT_EQ(ricci(fs, x, v), 0.0);
    }
  }
}

TEST(Ricci, RoundSphereUnitVectors) {
  const auto fs = sphere();
  Rng rng(16);
  for (int s = 0; s < 50; ++s) {
    const Vec x = random_point(fs, rng);
    Vec v = random_direction(2, rng);
    v /= fs.F(x, v);
    EXPECT_NEAR(ricci(fs, x, v), 1.0, 1e-10);
  }
}

TEST(Ricci, RiemannianMatchesClassicalRicciTensor) {
  const auto a = periodic_metric(torus());
  const auto fs = riemannian(a, torus());
  Rng rng(17);
  for (int s = 0; s < 20; ++s) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng);
    EXPECT_NEAR(ricci(fs, x, v), classical_ricci(a, x, v), 1e-6);
  }
}

TEST(SCurvature, MinkowskiWithLebesgueVanishes) {
  for (const auto& fs : {quartic(), constant_randers()}) {
    Rng rng(18);
    for (int s = 0; s < 50; ++s) {
      const Vec x = random_point(fs, rng), v = random_direction(2, rng);
      EXPECT_NEAR(s_curvature(fs, x, v), 0.0, 1e-14);
    }
  }
}

TEST(SCurvature, LinearWeight) {
  QuadraticField q;
  q.linear = make_vec({-1.0, 0.0});
  q.hessian = Mat::Zero(2, 2);
  const auto fs = euclidean(2, open_chart(2), ScalarField(q));
  EXPECT_NEAR(s_curvature(fs, make_vec({0.3, -0.2}), make_vec({0.7, 0.1})), 0.7, 1e-15);
}

TEST(WeightedRicci, GaussianWeightGivesUnitBakryEmery) {
  QuadraticField q;
  q.linear = Vec::Zero(2);
  q.hessian = -Mat::Identity(2, 2);
  const auto fs = euclidean(2, open_chart(2), ScalarField(q));
  Rng rng(19);
  for (int s = 0; s < 20; ++s) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng) * (0.5 + s * 0.1);
    EXPECT_NEAR(weighted_ricci(fs, x, v, kInf), v.squaredNorm(), 1e-12);
  }
}

TEST(WeightedRicci, FlatMinkowskiAnyN) {
  const auto fs = quartic();
  for (double N : {2.0, 3.0, 10.0, kInf}) EXPECT_EQ(weighted_ricci(fs, make_vec({0.1, 0.2}), make_vec({1, 2}), N), 0.0);
  EXPECT_THROW(weighted_ricci(fs, make_vec({0.1, 0.2}), make_vec({1, 2}), 1.5), ValidationError);
}

TEST(WeightedRicci, DimensionalBranchAndMonotonicity) {
  const auto P = torus();
  const auto fs = euclidean(2, P, trig(0.0, {mode(1, 0, 0.3, 0.1), mode(1, 1, 0.0, 0.2)}, P));
  Rng rng(20);
  for (int s = 0; s < 50; ++s) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng);
    ASSERT_GT(std::abs(s_curvature(fs, x, v)), 1e-6);
    EXPECT_EQ(weighted_ricci(fs, x, v, 2.0), -kInf);
    double prev = -kInf;
    for (double N : {2.5, 3.0, 5.0, 20.0, 1e6, kInf}) {
      const double r = weighted_ricci(fs, x, v, N);
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(WeightedRicci, RiemannianReducesToBakryEmeryTensor) {
  const auto P = torus();
  const auto a = periodic_metric(P);
  const ScalarField phi = trig(0.0, {mode(1, 0, 0.2, 0.1), mode(0, 1, 0.0, 0.3)}, P);
  const auto fs = riemannian(a, P, phi);
  // V = ½ log det a − Φ, so m = e^{−V} vol_a; derivatives by central differences.
  auto V = [&](const Vec& y) {
    Mat A(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) A(i, j) = a[i][j].eval<double>(as_span(y));
    return 0.5 * std::log(A.determinant()) - fs.phi(y);
  };
  // Central differences with one Richardson step.
  auto derivatives = [&](const Vec& x, double h, Vec& dV, Mat& HV) {
    for (int i = 0; i < 2; ++i) {
      Vec e = Vec::Zero(2);
      e(i) = h;
      dV(i) = (V(Vec(x + e)) - V(Vec(x - e))) / (2 * h);
      for (int j = 0; j < 2; ++j) {
        Vec f = Vec::Zero(2);
        f(j) = h;
        HV(i, j) = (V(Vec(x + e + f)) - V(Vec(x + e - f)) - V(Vec(x - e + f)) + V(Vec(x - e - f))) / (4 * h * h);
      }
    }
  };
  Rng rng(21);
  for (int s = 0; s < 20; ++s) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng);
    Vec dV(2), dV2(2);
    Mat HV(2, 2), HV2(2, 2);
    derivatives(x, 2e-3, dV, HV);
    derivatives(x, 1e-3, dV2, HV2);
    dV = (4 * dV2 - dV) / 3;
    HV = (4 * HV2 - HV) / 3;
    const Tensor3 G = classical_christoffel(a, x);
    double hess = v.dot(HV * v);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) hess -= G(k, i, j) * v(i) * v(j) * dV(k);
    const double ric = classical_ricci(a, x, v);
    EXPECT_NEAR(weighted_ricci(fs, x, v, kInf), ric + hess, 1e-6);
    const double N = 5.0;
    EXPECT_NEAR(weighted_ricci(fs, x, v, N), ric + hess - std::pow(dV.dot(v), 2) / (N - 2), 1e-6);
  }
}

TEST(WeightedRicci, SphereWithVolumeMeasure) {
  const auto fs = sphere(true);
  Rng rng(22);
  for (int s = 0; s < 20; ++s) {
    const Vec x = random_point(fs, rng);
    Vec v = random_direction(2, rng);
    v /= fs.F(x, v);
    EXPECT_NEAR(s_curvature(fs, x, v), 0.0, 1e-12);
    EXPECT_NEAR(weighted_ricci(fs, x, v, kInf), 1.0, 1e-10);
    EXPECT_NEAR(weighted_ricci(fs, x, v, 2.0), 1.0, 1e-10);
  }
}
