#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "finsler/ad/seed.hpp"

using namespace finsler;
using namespace finsler::ad;

TEST(Seed, SquareFirstDerivative) {
  const std::vector<double> p{3.0};
  const std::vector<int> ids{3};
  auto v = seed(p, ids, 1);
  const Jet1 f = v[0] * v[0];
  EXPECT_DOUBLE_EQ(extract(f, {0}), 6.0);
}

TEST(Seed, BilinearMixedPartial) {
  const std::vector<double> p{1.0, 2.0};
  const std::vector<int> ids{0, 1};
  auto v = seed(p, ids, 2);
  const Jet1 f = v[0] * v[1];
  EXPECT_DOUBLE_EQ(extract(f, {0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(extract(f, {0, 0}), 0.0);
}

TEST(Seed, IndependentVariablesAreUnitVectors) {
  const std::vector<double> p{0.5, -1.0, 2.0};
  const std::vector<int> ids{4, 7, 9};
  auto v = seed(p, ids, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(extract(v[i], {j}), i == j ? 1.0 : 0.0);
      for (int k = 0; k < 3; ++k) EXPECT_EQ(extract(v[i], {j, k}), 0.0);
    }
}

TEST(Seed, RejectsBadOrderAndDuplicates) {
  const std::vector<double> p{1.0, 2.0};
  EXPECT_THROW(seed(p, std::vector<int>{0, 1}, 3), ValidationError);
  EXPECT_THROW(seed(p, std::vector<int>{0, 1}, 0), ValidationError);
  EXPECT_THROW(seed(p, std::vector<int>{1, 1}, 1), ValidationError);
  EXPECT_THROW(seed(std::vector<double>{}, std::vector<int>{}, 1), ValidationError);
}

TEST(Extract, ConstantHasZeroDerivatives) {
  const Jet1 c(5.0);
  EXPECT_EQ(extract(c, {0}), 0.0);
  EXPECT_EQ(extract(c, {0, 1}), 0.0);
  const Jet2 cc(5.0);
  EXPECT_EQ(extract(cc, {0, 1, 2, 3}), 0.0);
}

TEST(Extract, EuclideanNormGradient) {
  const std::vector<double> p{3.0, 4.0};
  auto v = seed(p, std::vector<int>{0, 1}, 2);
  const Jet1 f = sqrt(v[0] * v[0] + v[1] * v[1]);
  EXPECT_NEAR(extract(f, {0}), 0.6, 1e-15);
  EXPECT_NEAR(extract(f, {1}), 0.8, 1e-15);
  // ∂²|v|/∂v¹∂v¹ = (v²)²/|v|³
  EXPECT_NEAR(extract(f, {0, 0}), 16.0 / 125.0, 1e-15);
}

TEST(Extract, OrderOverflowIsRejected) {
  const std::vector<double> p{1.0};
  auto v = seed(p, std::vector<int>{0}, 1);
  const Jet1 f = v[0] * v[0];
  try {
    extract(f, {0, 0});
    FAIL() << "expected an order error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("exceeds jet order 1"), std::string::npos);
  }
  const std::vector<double> q{1.0, 2.0};
  auto w = seed_nested(q, 2, 2);
  EXPECT_THROW(extract(w[0] * w[1], {0, 0, 1, 1, 0}), DomainError);
}

TEST(Nested, FourthCrossDerivativeMatchesFiniteDifferences) {
  // f = (x¹v¹ + x²v²)², variables ordered (x¹, x², v¹, v²).
  auto f = [](long double x1, long double x2, long double v1, long double v2) {
    const long double s = x1 * v1 + x2 * v2;
    return s * s;
  };
  const std::vector<double> p{0.7, -0.3, 1.1, 0.4};
  auto z = seed_nested(p, 2, 2);
  const Jet2 s = z[0] * z[2] + z[1] * z[3];
  const Jet2 F = s * s;
  const double ad4 = extract(F, {0, 1, 2, 3});

  // Oracle: nested central differences with step 1e-3 on each variable,
  // in extended precision to keep cancellation below the comparison.
  const long double h = 1e-3L;
  long double acc = 0.0L;
  for (int a = -1; a <= 1; a += 2)
    for (int b = -1; b <= 1; b += 2)
      for (int c = -1; c <= 1; c += 2)
        for (int d = -1; d <= 1; d += 2)
          acc += a * b * c * d * f(p[0] + a * h, p[1] + b * h, p[2] + c * h, p[3] + d * h);
  const double fd = static_cast<double>(acc / (16.0L * h * h * h * h));
  EXPECT_NEAR(ad4, fd, 1e-6 * std::abs(fd));
  EXPECT_DOUBLE_EQ(ad4, 2.0);  // only the cross term 2x¹v¹x²v² contributes
  // Split across levels does not matter.
  EXPECT_DOUBLE_EQ(extract(F, {2, 3, 0, 1}), ad4);
  EXPECT_DOUBLE_EQ(extract(F, {0, 2, 1, 3}), ad4);
}

TEST(Extract, LogExpCompositionAgainstHandDerivatives) {
  // f(a, b) = log(1 + a²) · exp(b/2) + pow(a, 1.5) / b
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.3, 2.0);
  for (int k = 0; k < 20; ++k) {
    const double a = U(rng), b = U(rng);
    auto v = seed(std::vector<double>{a, b}, std::vector<int>{0, 1}, 2);
    const Jet1 f = log(1.0 + v[0] * v[0]) * exp(v[1] / 2.0) + pow(v[0], 1.5) / v[1];
    const double L = std::log(1 + a * a), E = std::exp(b / 2);
    const double fa = 2 * a / (1 + a * a) * E + 1.5 * std::sqrt(a) / b;
    const double fb = 0.5 * L * E - std::pow(a, 1.5) / (b * b);
    const double faa = 2 * (1 - a * a) / ((1 + a * a) * (1 + a * a)) * E + 0.75 / (std::sqrt(a) * b);
    const double fab = a / (1 + a * a) * E - 1.5 * std::sqrt(a) / (b * b);
    const double fbb = 0.25 * L * E + 2 * std::pow(a, 1.5) / (b * b * b);
    auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); };
    EXPECT_LE(rel(f.value(), L * E + std::pow(a, 1.5) / b), 1e-12);
    EXPECT_LE(rel(extract(f, {0}), fa), 1e-12);
    EXPECT_LE(rel(extract(f, {1}), fb), 1e-12);
    EXPECT_LE(rel(extract(f, {0, 0}), faa), 1e-12);
    EXPECT_LE(rel(extract(f, {0, 1}), fab), 1e-12);
    EXPECT_LE(rel(extract(f, {1, 1}), fbb), 1e-12);
  }
}

TEST(Jet, DomainErrors) {
  auto v = seed(std::vector<double>{0.0, 1.0}, std::vector<int>{0, 1}, 2);
  EXPECT_THROW(sqrt(v[0] * v[0]), DomainError);
  EXPECT_THROW(log(v[0]), DomainError);
  EXPECT_THROW(v[1] / v[0], DomainError);
  EXPECT_THROW(v[1] / Jet1(0.0), DomainError);
  EXPECT_THROW(pow(v[0], 0.5), DomainError);
}

TEST(Jet, MismatchedSeedSetsAreRejected) {
  auto a = seed(std::vector<double>{1.0}, std::vector<int>{0}, 1);
  auto b = seed(std::vector<double>{1.0, 2.0}, std::vector<int>{0, 1}, 1);
  EXPECT_THROW(a[0] + b[0], ValidationError);
}

TEST(Properties, LinearityWithDyadicCoefficients) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> I(-64, 64);
  for (int k = 0; k < 50; ++k) {
    const double a = I(rng) / 8.0, b = I(rng) / 16.0;
    const std::vector<double> p{I(rng) / 32.0, I(rng) / 32.0};
    auto v = seed(p, std::vector<int>{0, 1}, 2);
    const Jet1 f = v[0] * v[0] * v[1];
    const Jet1 g = v[1] * v[1] - 3.0 * v[0];
    const Jet1 h = a * f + b * g;
    for (int i = 0; i < 2; ++i) {
      EXPECT_EQ(extract(h, {i}), a * extract(f, {i}) + b * extract(g, {i}));
      for (int j = 0; j < 2; ++j) EXPECT_EQ(extract(h, {i, j}), a * extract(f, {i, j}) + b * extract(g, {i, j}));
    }
  }
}

TEST(Properties, MixedPartialsAreSymmetric) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> p{U(rng), U(rng), U(rng)};
    auto v = seed(p, std::vector<int>{0, 1, 2}, 2);
    const Jet1 f = exp(v[0] * v[1]) / (v[2] + sin(v[0])) + log(v[1] * v[2]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_EQ(extract(f, {i, j}), extract(f, {j, i}));
    auto z = seed_nested(p, 2, 2);
    const Jet2 F = exp(z[0] * z[1]) / (z[2] + cos(z[0]));
    EXPECT_NEAR(extract(F, {0, 1, 2, 2}), extract(F, {2, 0, 2, 1}), 1e-12 * std::abs(extract(F, {0, 1, 2, 2})) + 1e-14);
  }
}

TEST(Properties, EulerIdentityForTwoHomogeneousExpressions) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> p{N(rng), N(rng)};
    auto v = seed(p, std::vector<int>{0, 1}, 1);
    const Jet1 s = v[0] * v[0] + v[1] * v[1];
    const Jet1 q = v[0] * v[0] * v[0] * v[0] + v[1] * v[1] * v[1] * v[1];
    const Jet1 H = s + 0.1 * q / s + 0.3 * v[0] * v[1];
    const double euler = p[0] * extract(H, {0}) + p[1] * extract(H, {1});
    EXPECT_NEAR(euler, 2.0 * H.value(), 1e-12 * std::abs(H.value()));
  }
}
