#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fsbayes/fspace.hpp"

using namespace fsbayes;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

PathGrid sampled(std::vector<double> t, double (*f)(double)) {
  std::vector<double> v(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) v[j] = f(t[j]);
  return PathGrid(std::move(t), std::move(v));
}

}  // namespace

TEST(Basis, RejectsBadDeclarations) {
  EXPECT_THROW(Basis("b", {}, {}), BasisError);
  EXPECT_THROW(Basis("b", {1.0, 0.0}, {"a", "b"}), BasisError);
  EXPECT_THROW(Basis("b", {1.0, 1.0}, {"a", "a"}), BasisError);
  EXPECT_NO_THROW(Basis::identity("R3", 3));
}

TEST(Basis, TrigLabelsFollowSignedFrequencies) {
  const Basis b = Basis::trig("T", 2, -1.0);
  ASSERT_EQ(b.dim(), 5u);
  EXPECT_EQ(b.labels(), (std::vector<std::string>{"0", "1", "-1", "2", "-2"}));
  EXPECT_DOUBLE_EQ(b.embedding_weights()[3], 1.0 / 5.0);
}

TEST(ApplyForward, DiagonalExample) {
  const auto L = ForwardMap::diagonal("X", "Y", {1.0, 2.0});
  const CoeffVector y = apply_forward(L, CoeffVector("X", {3.0, 4.0}));
  EXPECT_EQ(y.basis_id, "Y");
  EXPECT_EQ(y.coeffs, (std::vector<double>{3.0, 8.0}));
}

TEST(ApplyForward, ZeroMapsToZeroAndIdentityIsIdentity) {
  const auto L = ForwardMap::dense("X", "Y", 3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(apply_forward(L, CoeffVector("X", {0.0, 0.0})).coeffs, (std::vector<double>{0, 0, 0}));
  const auto I = ForwardMap::dense("X", "X", 2, 2, {1, 0, 0, 1});
  EXPECT_EQ(apply_forward(I, CoeffVector("X", {-1.5, 2.25})).coeffs, (std::vector<double>{-1.5, 2.25}));
}

TEST(ApplyForward, BasisMismatchThrows) {
  const auto L = ForwardMap::diagonal("X", "Y", {1.0, 2.0});
  EXPECT_THROW(apply_forward(L, CoeffVector("Z", {1.0, 1.0})), BasisError);
}

TEST(ApplyForward, LinearityProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 7, m = 1 + (trial * 3) % 5;
    const auto L = ForwardMap::dense("X", "Y", m, n, random_vector(rng, m * n));
    const auto x1 = random_vector(rng, n), x2 = random_vector(rng, n);
    const double a = random_vector(rng, 1)[0], b = random_vector(rng, 1)[0];
    std::vector<double> comb(n);
    for (std::size_t i = 0; i < n; ++i) comb[i] = a * x1[i] + b * x2[i];
    const auto lhs = L.apply(comb), l1 = L.apply(x1), l2 = L.apply(x2);
    for (std::size_t r = 0; r < m; ++r) {
      const double rhs = a * l1[r] + b * l2[r];
      const double scale = std::abs(a * l1[r]) + std::abs(b * l2[r]) + 1e-300;
      EXPECT_LE(std::abs(lhs[r] - rhs) / scale, 1e-12);
    }
  }
}

TEST(ForwardMap, OperatorNorm) {
  EXPECT_DOUBLE_EQ(ForwardMap::diagonal("X", "X", {0.5, -3.0, 1.0}).operator_norm(), 3.0);
  EXPECT_NEAR(ForwardMap::dense("X", "Y", 2, 2, {3, 0, 4, 0}).operator_norm(), 5.0, 1e-12);
}

TEST(CameronMartin, NormExamples) {
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_DOUBLE_EQ(cm_norm_sq(std::vector<double>{1.0, 0.0}, ones), 1.0);
  EXPECT_DOUBLE_EQ(cm_norm_sq(std::vector<double>{0.0, 0.0}, ones), 0.0);
  EXPECT_DOUBLE_EQ(cm_norm_sq(std::vector<double>{2.0, 3.0}, std::vector<double>{4.0, 9.0}), 2.0);
  EXPECT_THROW(cm_norm_sq(std::vector<double>{1.0}, std::vector<double>{0.0}), ModelError);
  EXPECT_THROW(cm_norm_sq(std::vector<double>{1.0}, std::vector<double>{-2.0}), ModelError);
}

TEST(CameronMartin, DualPairingExamples) {
  const std::vector<double> ones{1.0, 1.0};
  EXPECT_DOUBLE_EQ(dual_pairing(std::vector<double>{2.0, 0.0}, std::vector<double>{1.0, 0.0}, ones), 2.0);
  EXPECT_DOUBLE_EQ(dual_pairing(std::vector<double>{2.0, 5.0}, std::vector<double>{0.0, 0.0}, ones), 0.0);
  EXPECT_THROW(dual_pairing(std::vector<double>{1.0}, std::vector<double>{1.0}, std::vector<double>{0.0}), ModelError);
}

TEST(CameronMartin, PairingWithItselfIsNormExactlyAndSymmetric) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 9;
    auto h = random_vector(rng, n), y = random_vector(rng, n), lam = random_vector(rng, n);
    for (double& l : lam) l = std::abs(l) + 0.1;
    EXPECT_EQ(dual_pairing(h, h, lam), cm_norm_sq(h, lam));
    EXPECT_NEAR(dual_pairing(y, h, lam), dual_pairing(h, y, lam), 1e-12 * (1 + std::abs(dual_pairing(y, h, lam))));
  }
}

TEST(TrigCoeffs, ConstantAndZeroPaths) {
  const auto t = uniform_times(kTwoPi, 256);
  const auto c = trig_coeffs(sampled(t, [](double) { return 1.0; }), 4);
  ASSERT_EQ(c.size(), 9u);
  EXPECT_NEAR(c[0], 1.0, 1e-14);
  for (std::size_t j = 1; j < c.size(); ++j) EXPECT_NEAR(c[j], 0.0, 1e-14);
  const auto z = trig_coeffs(sampled(t, [](double) { return 0.0; }), 3);
  for (double v : z.coeffs) EXPECT_EQ(v, 0.0);
}

TEST(TrigCoeffs, CosineHasHalfAtPlusMinusOne) {
  // (2 pi)^-1 int cos(t) e^{-ikt} dt = 1/2 for k = +-1, 0 otherwise.
  const auto c = trig_coeffs(sampled(uniform_times(kTwoPi, 4096), [](double s) { return std::cos(s); }), 3);
  EXPECT_NEAR(complex_fourier(c, 1).real(), 0.5, 1e-6);
  EXPECT_NEAR(complex_fourier(c, -1).real(), 0.5, 1e-6);
  EXPECT_NEAR(std::abs(complex_fourier(c, 1).imag()), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(complex_fourier(c, 2)), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(complex_fourier(c, 0)), 0.0, 1e-6);

  // Nonuniform grid: trapezoid error is second order in the mesh.
  std::vector<double> t;
  const std::size_t n = 20000;
  for (std::size_t j = 0; j <= n; ++j) {
    const double u = static_cast<double>(j) / n;
    t.push_back(kTwoPi * (u + 0.05 * std::sin(kTwoPi * u) / kTwoPi));
  }
  t.front() = 0.0;
  t.back() = kTwoPi;
  const auto cn = trig_coeffs(sampled(t, [](double s) { return std::cos(s); }), 2);
  EXPECT_NEAR(complex_fourier(cn, 1).real(), 0.5, 1e-6);
}

TEST(TrigCoeffs, DomainMustBeFullCircle) {
  EXPECT_THROW(trig_coeffs(sampled(uniform_times(3.0, 64), [](double) { return 1.0; }), 2), DomainError);
}

TEST(TrigCoeffs, RecoversTrigPolynomialsProperty) {
  std::mt19937_64 rng(3);
  for (std::size_t K : {1u, 3u, 6u, 10u}) {
    const auto truth = random_vector(rng, 2 * K + 1);
    const auto t = uniform_times(kTwoPi, 8 * K);
    std::vector<double> v(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) v[j] = trig_synthesize(truth, t[j]);
    const auto c = trig_coeffs(PathGrid(t, v), K);
    for (std::size_t j = 0; j < truth.size(); ++j) EXPECT_NEAR(c[j], truth[j], 1e-8) << "K=" << K << " j=" << j;
  }
}

TEST(PathGrid, RejectsNonIncreasingTimes) {
  EXPECT_THROW(PathGrid({0.0, 0.5, 0.5}, {0, 1, 2}), GridError);
  EXPECT_THROW(PathGrid({0.0, 1.0}, {0.0}), GridError);
}
