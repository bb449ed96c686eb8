#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "families.hpp"
#include "finsler/data.hpp"
#include "finsler/error.hpp"
#include "finsler/verification.hpp"

using namespace finsler;
using namespace testing_families;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec big_torus() { return Vec::Constant(2, kTwoPi); }

FinslerStructure flat_quartic(double eps = 0.1) { return quartic_minkowski(2, eps, big_torus()); }

FinslerStructure flat_randers(double b1 = 0.5) {
  return randers(identity_metric(2), constant_one_form(make_vec({b1, 0.0})), big_torus());
}

/// Bump centred half a cell off the grid so no node is an exact critical point.
GridField off_node_bump(const FinslerStructure& fs, const Grid& g, double width = 0.8) {
  const Vec c = Vec::Constant(2, kTwoPi / 2) + 0.5 * g.h;
  return gaussian_bump(fs, g, c, width, 1.0, 0.1);
}

Trajectory flow(const WeightedGrid& wg, const GridField& u0, double T, int snapshots, Scheme s = Scheme::explicit_euler) {
  HeatOptions ho;
  ho.T = T;
  ho.scheme = s;
  for (int k = 1; k < snapshots; ++k) ho.snapshots.push_back(T * k / snapshots);
  return heat_solve(wg, u0, ho);
}

/// Exact snapshots of t^{−1} exp(−F(c − x)²/(4t)) at the given times.
Trajectory kernel_trajectory(const FinslerStructure& fs, const Grid& g, const Vec& c, const std::vector<double>& times) {
  Trajectory tr;
  tr.grid = g;
  tr.structure_hash = fs.hash_hex();
  tr.times = times;
  for (double t : times) {
    tr.fields.push_back(heat_kernel_datum(fs, g, c, t));
    tr.diagnostics.push_back({});
  }
  return tr;
}

}  // namespace

// ---- ricci_lower_bound ---------------------------------------------------------

TEST(RicciLowerBound, ConstantMinkowskiIsFlat) {
  const RicciEstimate r = ricci_lower_bound(quartic(0.2), kInf, 300, 1);
  EXPECT_NEAR(r.K, 0.0, 1e-8);
  EXPECT_EQ(r.report.check, "ricci_lower_bound");
  EXPECT_EQ(r.report.stats.at("ric_N").count, 300u);
}

TEST(RicciLowerBound, GaussianWeightGivesOne) {
  QuadraticField q;
  q.linear = Vec::Zero(2);
  q.hessian = -Mat::Identity(2, 2);
  const RicciEstimate r = ricci_lower_bound(euclidean(2, open_chart(2), ScalarField(q)), kInf, 200, 2);
  EXPECT_NEAR(r.K, 1.0, 1e-6);
}

TEST(RicciLowerBound, RoundSphere) {
  const RicciEstimate r = ricci_lower_bound(sphere(true), kInf, 200, 3);
  EXPECT_NEAR(r.K, 1.0, 1e-3);
}

TEST(RicciLowerBound, MinusInfinityForNEqualsNWithSCurvature) {
  QuadraticField q;
  q.linear = make_vec({-1.0, 0.0});
  q.hessian = Mat::Zero(2, 2);
  const RicciEstimate r = ricci_lower_bound(euclidean(2, open_chart(2), ScalarField(q)), 2.0, 50, 4);
  EXPECT_TRUE(std::isinf(r.K) && r.K < 0);
  EXPECT_THROW(ricci_lower_bound(quartic(), 1.5, 10, 1), ValidationError);
}

// ---- bochner_pointwise -----------------------------------------------------------

TEST(BochnerPointwise, EuclideanMatchesClassicalIdentity) {
  const auto fs = euclidean(2, big_torus());
  double prev = 0.0;
  for (int n : {32, 64}) {
    const Grid g = Grid::periodic_cell(fs, n);
    const WeightedGrid wg(fs, g);
    const GridField u = sample(g, [](const Vec& x) { return std::sin(x(0)) * std::sin(x(1)); });
    const BochnerTerms t = bochner_terms(wg, u, kInf);
    // ½Δ|∇u|² − ∇u·∇Δu = ‖Hess u‖² with Ric = 0.
    double err = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (!t.evaluated[p]) continue;
      const Vec x = g.node(p);
      const double s0 = std::sin(x(0)), s1 = std::sin(x(1)), c0 = std::cos(x(0)), c1 = std::cos(x(1));
      const double hs = 2.0 * (s0 * s0 * s1 * s1 + c0 * c0 * c1 * c1);
      EXPECT_NEAR(t.ric_inf(p), 0.0, 1e-12);
      err = std::max(err, std::abs(t.hs2(p) - hs));
      err = std::max(err, std::abs(t.lhs(p) - t.drift(p) - hs));
    }
    if (prev > 0.0) EXPECT_GT(std::log2(prev / err), 3.0);
    prev = err;
  }
  EXPECT_LT(prev, 5e-4);
}

TEST(BochnerPointwise, RandersResidualConvergesOnRegularSet) {
  const Report r = bochner_refinement(periodic_randers(), [](const Vec& x) {
    return std::sin(2 * std::numbers::pi * x(0)) + 0.5 * std::cos(2 * std::numbers::pi * x(1));
  }, kInf, {32, 64, 128});
  ASSERT_FALSE(r.failed) << r.to_text();
  for (const auto& o : r.metrics.at("orders")) EXPECT_GE(o.get<double>(), 1.8);
}

TEST(BochnerPointwise, RadialEuclideanSaturatesAtNEqualsN) {
  const auto fs = euclidean(2, open_chart(2));
  const Grid g = Grid::patch(make_vec({-1.0, -1.0}), make_vec({1.0, 1.0}), {41, 41, 1});
  const WeightedGrid wg(fs, g);
  const GridField u = sample(g, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
  const Report r = bochner_pointwise(wg, u, 2.0, 1e-6, 0.1);
  ASSERT_FALSE(r.empty);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_LE(std::abs(r.stats.at("slack_regular").max), 1e-8);
  EXPECT_LE(std::abs(r.stats.at("slack_regular").min), 1e-8);
}

TEST(BochnerPointwise, FiniteNSlackIsMonotoneInN) {
  const auto fs = flat_quartic(0.2);
  const Grid g = Grid::periodic_cell(fs, 32);
  const WeightedGrid wg(fs, g);
  const GridField u = random_smooth(fs, g, 5);
  std::vector<GridField> slacks;
  for (double N : {2.0, 3.0, 6.0, 50.0}) {
    const BochnerTerms t = bochner_terms(wg, u, N);
    GridField s(g);
    for (std::size_t p = 0; p < g.size(); ++p) s(p) = t.lhs(p) - t.drift(p) - t.ric_n(p) - t.lap(p) * t.lap(p) / N;
    slacks.push_back(s);
  }
  for (std::size_t k = 1; k < slacks.size(); ++k)
    for (std::size_t p = 0; p < g.size(); ++p) EXPECT_LE(slacks[k - 1](p), slacks[k](p) + 1e-12);
}

TEST(BochnerPointwise, ConstantFieldGivesEmptyReport) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  const Report r = bochner_pointwise(wg, GridField(wg.grid(), 1, 3.0), kInf, 1e-6);
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.violations, 0u);
}

// ---- bochner_integrated ----------------------------------------------------------

TEST(BochnerIntegrated, UnitTestFunctionReducesToIntegrationByParts) {
  for (const auto& fs : {euclidean(2, big_torus()), flat_quartic(0.2)}) {
    const Grid g = Grid::periodic_cell(fs, 32);
    const WeightedGrid wg(fs, g);
    const GridField u = random_smooth(fs, g, 7);
    const Report r = bochner_integrated(wg, u, GridField(g, 1, 1.0), 3.0, 1e-6);
    EXPECT_NEAR(r.metrics.at("lhs").get<double>(), 0.0, 1e-12);
    EXPECT_TRUE(r.passed());
    // Σ D(Δu)(∇u) m = −Σ (Δu)² m.
    const BochnerTerms t = bochner_terms(wg, u, kInf);
    double a = 0.0, b = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      a += t.drift(p) * wg.m(p);
      b += t.lap(p) * t.lap(p) * wg.m(p);
    }
    EXPECT_NEAR(a, -b, 1e-10 * b);
  }
}

TEST(BochnerIntegrated, QuarticRandomPairsHaveNonnegativeSlack) {
  const auto fs = flat_quartic(0.2);
  const Grid g = Grid::periodic_cell(fs, 48);
  const WeightedGrid wg(fs, g);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const GridField u = random_smooth(fs, g, 30 + seed);
    GridField phi = random_smooth(fs, g, 60 + seed);
    const double lo = *std::min_element(phi.values.begin(), phi.values.end());
    for (double& v : phi.values) v -= lo;
    const Report r = bochner_integrated(wg, u, phi, 2.0 + seed, 1e-6);
    EXPECT_TRUE(r.passed()) << r.to_text();
  }
}

TEST(BochnerIntegrated, EuclideanEqualityResidualConverges) {
  const auto fs = euclidean(2, big_torus());
  double prev = 0.0;
  for (int n : {32, 64}) {
    const Grid g = Grid::periodic_cell(fs, n);
    const WeightedGrid wg(fs, g);
    GridField phi = random_smooth(fs, g, 9);
    for (double& v : phi.values) v += 3.0;
    const Report r = bochner_integrated(wg, random_smooth(fs, g, 8), phi, kInf, 1e-6);
    const double e = std::abs(r.metrics.at("equality_residual").get<double>());
    if (prev > 0.0) EXPECT_GT(std::log2(prev / e), 1.8);
    prev = e;
  }
}

TEST(BochnerIntegrated, RejectsNegativeTestFunction) {
  const auto fs = flat_quartic();
  const Grid g = Grid::periodic_cell(fs, 16);
  const WeightedGrid wg(fs, g);
  GridField phi(g, 1, 1.0);
  phi(3) = -0.1;
  EXPECT_THROW(bochner_integrated(wg, random_smooth(fs, g, 1), phi, kInf, 1e-6), ValidationError);
}

// ---- bakry_emery -----------------------------------------------------------------

TEST(BakryEmery, EqualTimesGiveZeroSlack) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 24));
  const Trajectory tr = flow(wg, off_node_bump(fs, wg.grid()), 0.1, 4);
  const Report r = bakry_emery(wg, tr, 0.05, 0.05, 0.0);
  EXPECT_EQ(r.stats.at("slack").min, 0.0);
  EXPECT_EQ(r.stats.at("slack").max, 0.0);
  EXPECT_THROW(bakry_emery(wg, tr, 0.075, 0.05, 0.0), ValidationError);
}

TEST(BakryEmery, FlatQuarticBump) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 32));
  const Trajectory tr = flow(wg, off_node_bump(fs, wg.grid()), 0.2, 4);
  const Report r = bakry_emery(wg, tr, 0.05, 0.2, 0.0);
  EXPECT_TRUE(r.passed()) << r.to_text();
  EXPECT_TRUE(r.metrics.at("m_matrix").get<bool>());
  EXPECT_LE(r.metrics.at("fallback_sensitivity").get<double>(), 1e-6);
}

TEST(BakryEmery, WeightedEuclideanWithSampledK) {
  const Vec P = big_torus();
  const auto fs = euclidean(2, P, trig(0.0, {mode(1, 0, 0.3, 0.1), mode(0, 1, 0.0, 0.2)}, P));
  const double K = ricci_lower_bound(fs, kInf, 400, 11).K;
  EXPECT_LT(K, 0.0);
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 32));
  const Trajectory tr = flow(wg, off_node_bump(fs, wg.grid()), 0.2, 4);
  BakryEmeryOptions opt;
  opt.tolerance = 1e-5;
  const Report r = bakry_emery(wg, tr, 0.05, 0.2, K, opt);
  EXPECT_TRUE(r.passed()) << r.to_text();
}

// ---- lipschitz_decay -------------------------------------------------------------

TEST(LipschitzDecay, ConstantHasZeroLipschitzConstant) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  const Trajectory tr = flow(wg, GridField(wg.grid(), 1, 2.0), 0.1, 3);
  const Report r = lipschitz_decay(wg, tr, 0.0, DistanceTable::build(fs, wg.grid()));
  for (const auto& v : r.metrics.at("lip")) EXPECT_EQ(v.get<double>(), 0.0);
  EXPECT_TRUE(r.passed());
}

TEST(LipschitzDecay, FlatRandersNonincreasing) {
  const auto fs = flat_randers(0.3);
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 32));
  const Trajectory tr = flow(wg, off_node_bump(fs, wg.grid()), 0.2, 10);
  const Report r = lipschitz_decay(wg, tr, 0.0, DistanceTable::build(fs, wg.grid()));
  EXPECT_TRUE(r.passed()) << r.to_text();
  EXPECT_EQ(r.metrics.at("lip").size(), 11u);
}

// ---- li_yau ----------------------------------------------------------------------

TEST(LiYau, ConstantSolutionHasSlackNOverTwoT) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  HeatOptions ho;
  ho.T = 0.3;
  ho.snapshots = {0.1, 0.2};
  const Trajectory tr = heat_solve(wg, GridField(wg.grid(), 1, 1.5), ho);
  LiYauOptions opt;
  opt.N = 2.0;
  const Report r = li_yau(wg, tr, opt);
  for (const auto& e : r.metrics.at("per_time"))
    EXPECT_NEAR(e.at("min_slack").get<double>(), 1.0 / e.at("t").get<double>(), 1e-12);
}

TEST(LiYau, RejectsNonpositiveSolutionUnlessShifted) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  const Trajectory tr = flow(wg, sine_mode(fs, wg.grid(), {1, 0, 0}), 0.3, 3);
  LiYauOptions opt;
  EXPECT_THROW(li_yau(wg, tr, opt), ValidationError);
  opt.shift = 2.0;
  const Report r = li_yau(wg, tr, opt);
  EXPECT_FALSE(r.empty);
  EXPECT_EQ(r.notes.size(), 2u);
}

TEST(LiYau, ThetaOneNeedsNonnegativeK) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  const Trajectory tr = flow(wg, GridField(wg.grid(), 1, 1.0), 0.3, 3);
  LiYauOptions opt;
  opt.K = -0.5;
  EXPECT_THROW(li_yau(wg, tr, opt), ValidationError);
  opt.theta = 2.0;
  EXPECT_NO_THROW(li_yau(wg, tr, opt));
}

TEST(LiYau, ExactKernelIsSharp) {
  const auto fs = flat_randers(0.4);
  const Grid g = Grid::periodic_cell(fs, 128);
  const WeightedGrid wg(fs, g);
  const Vec c = Vec::Constant(2, kTwoPi / 2);
  const double dt = 1e-5;
  const Trajectory tr = kernel_trajectory(fs, g, c, {0.3 - dt, 0.3, 0.3 + dt});
  LiYauOptions opt;
  opt.N = 2.0;
  opt.center = c;
  opt.radius = kTwoPi / 4;
  const Report r = li_yau(wg, tr, opt);
  EXPECT_LE(r.metrics.at("sharpness_first_time").get<double>(), 5e-3);
}

// ---- harnack ---------------------------------------------------------------------

TEST(Harnack, ConstantSolutionAlwaysSatisfied) {
  const auto fs = flat_randers(0.3);
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  const Trajectory tr = flow(wg, GridField(wg.grid(), 1, 1.0), 0.2, 4);
  const auto pairs = random_harnack_pairs(tr, 100, 3);
  for (const auto& q : pairs) EXPECT_LT(q.s, q.t);
  const Report r = harnack(wg, tr, DistanceTable::build(fs, wg.grid()), pairs, {});
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.stats.at("slack").min, 0.0);
}

TEST(Harnack, FlatQuarticBumpSolution) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 32));
  const Trajectory tr = flow(wg, off_node_bump(fs, wg.grid()), 0.2, 10);
  HarnackOptions opt;
  opt.N = 2.0;
  const Report r = harnack(wg, tr, DistanceTable::build(fs, wg.grid()), random_harnack_pairs(tr, 200, 5), opt);
  EXPECT_TRUE(r.passed()) << r.to_text();
}

TEST(Harnack, StatedOrientationFailsOnRandersKernel) {
  // u(s, c) ≤ u(t, y)(t/s) exp(d²/(4(t − s))) with y = c − r e₁: d(c, y) = (1 − b)r
  // is too small, d(y, c) = (1 + b)r is enough.
  const auto fs = flat_randers(0.5);
  const Grid g = Grid::periodic_cell(fs, 64);
  const WeightedGrid wg(fs, g);
  Index mc{32, 32, 0};
  const Vec c = g.node(mc);
  const Trajectory tr = kernel_trajectory(fs, g, c, {0.05, 0.3});
  std::vector<HarnackPair> pairs;
  for (int r = 1; r <= 12; ++r) {
    Index my = mc;
    my[0] -= r;
    pairs.push_back({0.05, g.flat(mc), 0.3, g.flat(my)});
  }
  const DistanceTable table = DistanceTable::build(fs, g);
  HarnackOptions opt;
  opt.N = 2.0;
  opt.orientation = HarnackOrientation::stated;
  const Report stated = harnack(wg, tr, table, pairs, opt);
  EXPECT_EQ(stated.violations, pairs.size());
  opt.orientation = HarnackOrientation::reversed;
  const Report reversed = harnack(wg, tr, table, pairs, opt);
  EXPECT_EQ(reversed.violations, 0u);
  EXPECT_EQ(reversed.metrics.at("violations_stated").get<std::size_t>(), pairs.size());
}

TEST(Harnack, RejectsPairsOutsideTrajectory) {
  const auto fs = flat_quartic();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 16));
  const Trajectory tr = flow(wg, GridField(wg.grid(), 1, 1.0), 0.2, 4);
  const DistanceTable table = DistanceTable::build(fs, wg.grid());
  EXPECT_THROW(harnack(wg, tr, table, {{0.05, 0, 0.3, 1}}, {}), ValidationError);
  EXPECT_THROW(harnack(wg, tr, table, {{0.0, 0, 0.1, 1}}, {}), ValidationError);
  EXPECT_THROW(harnack(wg, tr, table, {{0.1, 0, 0.05, 1}}, {}), ValidationError);
  EXPECT_THROW(harnack(wg, tr, table, {{0.05, 9999, 0.1, 1}}, {}), ValidationError);
}
