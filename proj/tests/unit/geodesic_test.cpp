#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "families.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/legendre.hpp"
#include "finsler/sampling.hpp"
#include "finsler/tensor.hpp"

using namespace finsler;
using namespace testing_families;

namespace {

Vec unit(const FinslerStructure& fs, const Vec& x, const Vec& v) { return v / fs.F(x, v); }

}  // namespace

TEST(Geodesic, EuclideanStraightLine) {
  const auto fs = euclidean(2, torus());
  const Vec x = make_vec({0.2, 0.3}), v = make_vec({1.5, -0.7});
  const GeodesicPath p = integrate_geodesic(fs, x, v, 2.0, 10);
  ASSERT_EQ(p.samples.size(), 11u);
  for (const auto& s : p.samples) {
    EXPECT_LE((s.x - (x + s.t * v)).norm(), 1e-13);
    EXPECT_LE((s.xdot - v).norm(), 1e-13);
  }
  EXPECT_LE(p.speed_drift, 1e-14);
}

TEST(Geodesic, ConstantMinkowskiStraightLine) {
  const auto fs = quartic();
  const Vec x = make_vec({0.9, 0.1}), v = make_vec({-0.4, 2.0});
  const GeodesicPath p = integrate_geodesic(fs, x, v, 1.0, 4);
  EXPECT_LE((p.samples.back().x - (x + v)).norm(), 1e-13);
}

TEST(Geodesic, RejectsBadArguments) {
  const auto fs = quartic();
  EXPECT_THROW(integrate_geodesic(fs, make_vec({0, 0}), make_vec({0, 0}), 1.0, 4), ValidationError);
  EXPECT_THROW(integrate_geodesic(fs, make_vec({0, 0}), make_vec({1, 0}), 1.0, 0), ValidationError);
  EXPECT_THROW(integrate_geodesic(fs, make_vec({0, 0}), make_vec({1, 0}), -1.0, 4), ValidationError);
}

TEST(Geodesic, SphereGreatCirclePeriod) {
  // Stereographic image of a great circle through (0.5, 0) and its antipode (−2, 0).
  const auto fs = sphere();
  const Vec x = make_vec({0.5, 0.0});
  const Vec v = unit(fs, x, make_vec({0.0, 1.0}));
  const GeodesicPath p = integrate_geodesic(fs, x, v, 2 * std::numbers::pi, 8);
  EXPECT_LE((p.samples.back().x - x).norm(), 1e-6);
  EXPECT_LE((p.samples.back().xdot - v).norm(), 1e-6);
  EXPECT_NEAR(p.samples[4].x(0), -2.0, 1e-6);
  EXPECT_NEAR(p.samples[4].x(1), 0.0, 1e-6);
  for (const auto& s : p.samples) EXPECT_NEAR((s.x - make_vec({-0.75, 0.0})).norm(), 1.25, 1e-7);
  EXPECT_LE(p.speed_drift, 1e-8);
}

TEST(Geodesic, ConstantSpeedOnPeriodicFamilies) {
  for (const auto& fs : {periodic_randers(), periodic_riemannian()}) {
    Rng rng(41);
    for (int k = 0; k < 5; ++k) {
      const Vec x = random_point(fs, rng), v = random_direction(2, rng) * 1.3;
      EXPECT_LE(integrate_geodesic(fs, x, v, 3.0, 30).speed_drift, 1e-8);
    }
  }
}

TEST(Geodesic, GeodesicIsAutoparallel) {
  // D_η̇ η̇ = η̈ + N(η̇)η̇ with η̈ from differences of the sampled velocity.
  const auto fs = periodic_randers();
  const Vec x = make_vec({0.1, 0.6}), v = make_vec({0.8, 0.5});
  const double dt = 1e-3;
  const GeodesicPath p = integrate_geodesic(fs, x, v, 0.5, 500);
  for (std::size_t k = 50; k < 500; k += 50) {
    const Vec acc = (8 * (p.samples[k + 1].xdot - p.samples[k - 1].xdot) - (p.samples[k + 2].xdot - p.samples[k - 2].xdot)) /
                    (12 * dt);
    const TensorPack t = tensor_pack(fs, p.samples[k].x, p.samples[k].xdot);
    EXPECT_LE((acc + t.N * p.samples[k].xdot).norm(), 1e-8);
  }
}

TEST(ExpMap, ZeroAndEuclidean) {
  const auto fs = euclidean(2, torus());
  const Vec x = make_vec({0.2, 0.9});
  EXPECT_EQ(exp_map(fs, x, make_vec({0, 0})), x);
  const Vec y = exp_map(fs, x, make_vec({1.3, 0.4}));
  EXPECT_NEAR(y(0), 0.5, 1e-14);
  EXPECT_NEAR(y(1), 0.3, 1e-14);
  const auto pr = periodic_randers();
  EXPECT_EQ(exp_map(pr, x, make_vec({0, 0})), x);
}

TEST(ExpMap, DifferentialMatchesFiniteDifferences) {
  const auto fs = periodic_randers();
  Rng rng(42);
  for (int k = 0; k < 5; ++k) {
    const Vec x = random_point(fs, rng), v = random_direction(2, rng) * 0.8;
    const ExpDerivative e = exp_with_differential(fs, x, v);
    const double h = 1e-5;
    for (int j = 0; j < 2; ++j) {
      Vec dv = Vec::Zero(2);
      dv(j) = h;
      const auto p = integrate_geodesic(fs, x, Vec(v + dv), 1.0, 1).samples.back().x;
      const auto m = integrate_geodesic(fs, x, Vec(v - dv), 1.0, 1).samples.back().x;
      EXPECT_LE((e.dv.col(j) - (p - m) / (2 * h)).norm(), 1e-5);
    }
    EXPECT_LE((e.point - integrate_geodesic(fs, x, v, 1.0, 1).samples.back().x).norm(), 1e-10);
  }
}

TEST(Distance, EuclideanTorus) {
  const auto fs = euclidean(2, torus(10.0));
  EXPECT_NEAR(distance(fs, make_vec({0, 0}), make_vec({1, 2})), std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(distance(fs, make_vec({0, 0}), make_vec({9, 9})), std::sqrt(2.0), 1e-13);
  EXPECT_EQ(distance(fs, make_vec({3, 4}), make_vec({3, 4})), 0.0);
}

TEST(Distance, ConstantRandersIsNonsymmetric) {
  const auto fs = constant_randers();
  EXPECT_NEAR(distance(fs, make_vec({0, 0}), make_vec({1, 0})), 1.5, 1e-14);
  EXPECT_NEAR(distance(fs, make_vec({1, 0}), make_vec({0, 0})), 0.5, 1e-14);
  const auto rev = reverse_structure(fs);
  EXPECT_NEAR(distance(rev, make_vec({0, 0}), make_vec({1, 0})), 0.5, 1e-14);
}

TEST(Distance, PeriodicRandersRefinement) {
  const auto fs = periodic_randers();
  const auto rev = reverse_structure(fs);
  Rng rng(43);
  for (int k = 0; k < 6; ++k) {
    const Vec x = random_point(fs, rng), y = random_point(fs, rng);
    const DistanceResult f = distance_detail(fs, x, y);
    ASSERT_EQ(f.status, DistanceStatus::converged);
    EXPECT_EQ(distance(fs, x, x), 0.0);
    // The shooting endpoint is the requested point, and d is the geodesic's speed.
    EXPECT_LE((fs.reduce(exp_map(fs, x, f.velocity)) - fs.reduce(y)).norm(), 1e-9);
    // Reverse structure swaps the orientation.
    EXPECT_NEAR(distance(rev, y, x), f.value, 1e-6);
  }
}

TEST(Distance, InfimumOverRandomPolylines) {
  const auto fs = periodic_randers();
  const Vec x = make_vec({0.1, 0.2}), y = make_vec({0.6, 0.45});
  const DistanceResult d = distance_detail(fs, x, y);
  ASSERT_EQ(d.status, DistanceStatus::converged);
  Rng rng(44);
  std::normal_distribution<double> N(0.0, 0.15);
  for (int k = 0; k < 100; ++k) {
    std::vector<Vec> poly{x};
    for (int j = 1; j < 8; ++j) poly.push_back(x + (d.target - x) * j / 8.0 + make_vec({N(rng), N(rng)}));
    poly.push_back(d.target);
    EXPECT_LE(d.value, polyline_length(fs, poly) + 1e-12);
  }
}

TEST(Distance, TriangleInequalityAndRiemannianSymmetry) {
  const auto fs = periodic_riemannian();
  Rng rng(45);
  for (int k = 0; k < 3; ++k) {
    const Vec x = random_point(fs, rng), y = random_point(fs, rng), z = random_point(fs, rng);
    const double xy = distance(fs, x, y), yz = distance(fs, y, z), xz = distance(fs, x, z);
    EXPECT_LE(xz, xy + yz + 1e-9);
    EXPECT_NEAR(distance(fs, y, x), xy, 1e-8);
  }
}

TEST(DistanceTable, ClosedFormMatchesPointwiseDistance) {
  const auto fs = constant_randers(0.4, 0.2, 1.0);
  const Grid g = Grid::periodic_cell(fs, 8);
  const DistanceTable tab = DistanceTable::build(fs, g);
  EXPECT_TRUE(tab.exact());
  for (std::size_t a = 0; a < g.size(); a += 7)
    for (std::size_t b = 0; b < g.size(); b += 5)
      EXPECT_NEAR(tab(a, b), distance(fs, g.node(a), g.node(b)), 1e-14);
}

TEST(DistanceTable, GraphTableIsUpperEstimateAndCaches) {
  const auto fs = periodic_randers();
  const Grid g = Grid::periodic_cell(fs, 12);
  const auto dir = std::filesystem::temp_directory_path() / "finsler_table_test";
  std::filesystem::remove_all(dir);
  const DistanceTable tab = DistanceTable::cached(fs, g, dir);
  EXPECT_FALSE(tab.exact());
  const DistanceTable again = DistanceTable::cached(fs, g, dir);
  for (std::size_t a = 0; a < g.size(); a += 11)
    for (std::size_t b = 0; b < g.size(); b += 13) EXPECT_EQ(tab(a, b), again(a, b));
  const Vec x = g.node(std::size_t{3}), y = g.node(std::size_t{77});
  const double d = distance(fs, x, y);
  EXPECT_GE(tab(3, 77), d - 1e-12);
  EXPECT_LE(tab(3, 77), 1.1 * d);
  std::filesystem::remove_all(dir);
}

TEST(JacobiOracle, EuclideanIsFlat) {
  const auto fs = euclidean(2, torus());
  EXPECT_LE(std::abs(jacobi_ricci_oracle(fs, make_vec({0.3, 0.3}), make_vec({0.6, 0.8}))), 1e-8);
}

TEST(JacobiOracle, RoundSphere) {
  const auto fs = sphere();
  Rng rng(46);
  for (int k = 0; k < 3; ++k) {
    const Vec x = random_point(fs, rng);
    const Vec v = unit(fs, x, random_direction(2, rng));
    EXPECT_NEAR(jacobi_ricci_oracle(fs, x, v), 1.0, 1e-3);
    EXPECT_NEAR(ricci(fs, x, v), 1.0, 1e-10);
  }
}

TEST(JacobiOracle, AgreesWithSprayCurvatureOnRanders) {
  const auto fs = periodic_randers();
  Rng rng(47);
  for (int k = 0; k < 5; ++k) {
    const Vec x = random_point(fs, rng);
    const Vec v = unit(fs, x, random_direction(2, rng));
    const double a = ricci(fs, x, v), b = jacobi_ricci_oracle(fs, x, v);
    EXPECT_LE(std::abs(a - b), 1e-4 * std::max(1.0, std::abs(a))) << a << " vs " << b;
  }
}

TEST(JacobiOracle, FrameStartsOrthonormal) {
  const auto fs = periodic_randers();
  const Vec x = make_vec({0.2, 0.7}), v = make_vec({0.3, -0.9});
  const JacobiFrame fr = jacobi_frame(fs, x, v, 1e-3);
  const Mat g = fundamental_tensor(fs, x, v).g;
  EXPECT_LE((fr.E.transpose() * g * fr.E - Mat::Identity(2, 2)).norm(), 1e-2);
  EXPECT_THROW(jacobi_frame(fs, x, make_vec({0, 0}), 0.1), DomainError);
}

TEST(HopfLax, ConstantDatum) {
  const auto fs = quartic();
  const Grid g = Grid::periodic_cell(fs, 16);
  const GridField u = sample(g, [](const Vec&) { return 2.5; });
  EXPECT_DOUBLE_EQ(hopf_lax(fs, u, 0.3, g.node(std::size_t{37})), 2.5);
  // Off-grid queries see the nearest node at positive distance.
  EXPECT_GT(hopf_lax(fs, u, 0.3, make_vec({0.37, 0.81})), 2.5);
  const GridField phi = hopf_lax(DistanceTable::build(fs, g), u, 0.3);
  for (double p : phi.values) EXPECT_DOUBLE_EQ(p, 2.5);
}

TEST(HopfLax, EuclideanQuadraticPatch) {
  const auto fs = euclidean(2, open_chart(2));
  const double t = 0.5;
  double prev = INFINITY;
  for (int N : {21, 41, 81}) {
    const Grid g = Grid::patch(make_vec({-2, -2}), make_vec({2, 2}), {N, N, 1});
    const GridField u = sample(g, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
    double err = 0.0;
    for (const Vec& y : {make_vec({0.3, -0.2}), make_vec({0.5, 0.5}), make_vec({-0.1, 0.7})}) {
      const double phi = hopf_lax(fs, u, t, y);
      EXPECT_LE(phi, 0.5 * y.squaredNorm());
      err = std::max(err, std::abs(phi - y.squaredNorm() / (2 * (1 + t))));
    }
    EXPECT_LE(err, g.h(0) * g.h(0));
    EXPECT_LE(err, prev);
    prev = err;
  }
}

TEST(HopfLax, SubsolutionBound) {
  const auto fs = periodic_randers();
  const Grid g = Grid::periodic_cell(fs, 12);
  const GridField u = sample(g, [](const Vec& x) { return std::sin(2 * std::numbers::pi * x(0)) + x(1) * x(1); });
  const GridField phi = hopf_lax(DistanceTable::build(fs, g), u, 0.1);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(phi.values[i], u.values[i]);
}

TEST(HopfLax, HamiltonJacobiResidualShrinks) {
  // ∂_tφ + F*(Dφ)²/2 at interior points, centered differences in t and x.
  const auto fs = constant_randers(0.3, 0.1, 1.0);
  const double t = 0.05, dt = 0.005;
  double prev = INFINITY;
  for (int N : {24, 48}) {
    const Grid g = Grid::periodic_cell(fs, N);
    const GridField u = sample(g, [](const Vec& x) {
      return std::cos(2 * std::numbers::pi * x(0)) + 0.5 * std::sin(2 * std::numbers::pi * x(1));
    });
    const DistanceTable tab = DistanceTable::build(fs, g);
    const GridField p0 = hopf_lax(tab, u, t - dt), p1 = hopf_lax(tab, u, t + dt), pm = hopf_lax(tab, u, t);
    double res = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < g.size(); i += 7) {
      const Index m = g.multi(i);
      Vec D(2);
      for (int a = 0; a < 2; ++a) {
        Index p = m, q = m;
        p[a] += 1;
        q[a] -= 1;
        D(a) = (pm.values[g.flat(p)] - pm.values[g.flat(q)]) / (2 * g.h(a));
      }
      const double dual = dual_norm(fs, g.node(i), D);
      res += std::abs((p1.values[i] - p0.values[i]) / (2 * dt) + 0.5 * dual * dual);
      ++count;
    }
    res /= count;
    EXPECT_LT(res, prev);
    prev = res;
  }
}
