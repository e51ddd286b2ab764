#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "fsbayes/likelihood.hpp"
#include "fsbayes/posterior.hpp"

using namespace fsbayes;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat invert(Mat a) {
  const std::size_t n = a.size();
  Mat inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t k = 0; k < n; ++k) {
        a[r][k] -= f * a[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

// m_post = (C_pr^-1 + L^T C_e^-1 L)^-1 L^T C_e^-1 y for diagonal C_pr, C_e.
std::vector<double> conjugate_mean(const std::vector<double>& prior_var, const std::vector<double>& L, std::size_t m,
                                   const std::vector<double>& noise_var, const std::vector<double>& y) {
  const std::size_t n = prior_var.size();
  Mat P(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    P[i][i] = 1.0 / prior_var[i];
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t r = 0; r < m; ++r) P[i][j] += L[r * n + i] * L[r * n + j] / noise_var[r];
  }
  const Mat C = invert(P);
  std::vector<double> b(n, 0.0), out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < m; ++r) b[i] += L[r * n + i] * y[r] / noise_var[r];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += C[i][j] * b[j];
  return out;
}

std::shared_ptr<const PriorEnsemble> kl_ensemble(std::size_t dim, std::size_t M, std::uint64_t seed, double p = 1.0) {
  return std::make_shared<const PriorEnsemble>(
      sample_kl(KLScheme::decay(dim, p), Basis::identity("R" + std::to_string(dim), dim), static_cast<int>(dim), M, seed));
}

}  // namespace

TEST(Reweight, DirectNormalizationAndEss) {
  auto ens = kl_ensemble(1, 2, 1);
  const auto post = reweight(ens, {0.0, std::log(3.0)});
  ASSERT_TRUE(post.valid);
  EXPECT_DOUBLE_EQ(post.norm_weights[0], 0.25);
  EXPECT_DOUBLE_EQ(post.norm_weights[1], 0.75);
  EXPECT_DOUBLE_EQ(post.ess, 1.6);
  EXPECT_DOUBLE_EQ(post.log_evidence, std::log(2.0));
  EXPECT_EQ(post.ensemble_ref(), ens->id());
}

TEST(Reweight, EssExtremes) {
  auto ens = kl_ensemble(2, 10, 2);
  EXPECT_DOUBLE_EQ(reweight(ens, std::vector<double>(10, -3.0)).ess, 10.0);
  std::vector<double> lw(10, kNegInf);
  lw[4] = 0.0;
  const auto one = reweight(ens, lw);
  EXPECT_EQ(one.ess, 1.0);
  EXPECT_EQ(cm_estimate(one).coeffs, ens->particle(4).coeffs);
}

TEST(Reweight, ErrorsAndDegenerateEvidence) {
  auto ens = kl_ensemble(2, 3, 2);
  EXPECT_THROW(reweight(ens, {0.0, NAN, 0.0}), NumericError);
  EXPECT_THROW(reweight(ens, {0.0, std::numeric_limits<double>::infinity(), 0.0}), NumericError);
  EXPECT_THROW(reweight(ens, {0.0, 0.0}), SupportError);
  const auto dead = reweight(ens, std::vector<double>(3, kNegInf));
  EXPECT_FALSE(dead.valid);
  EXPECT_NE(dead.diagnostic.find("DegenerateEvidence"), std::string::npos);
  EXPECT_THROW(cm_estimate(dead), DegenerateEvidence);
  EXPECT_THROW(posterior_probability(dead, [](std::span<const double>) { return true; }), DegenerateEvidence);
  EXPECT_THROW(posterior_functional(dead, [](std::span<const double>) { return 1.0; }), DegenerateEvidence);
}

TEST(Reweight, NormalizationAndEssBoundsProperty) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t M = 1 + trial % 60;
    auto ens = kl_ensemble(1, M, trial);
    std::vector<double> lw(M);
    for (double& v : lw) v = g(rng);
    if (trial % 3 == 0) lw[0] = kNegInf;
    const auto post = reweight(ens, lw);
    if (!post.valid) continue;
    double s = 0.0;
    for (double w : post.norm_weights) {
      EXPECT_GE(w, 0.0);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_GE(post.ess, 1.0 - 1e-12);
    EXPECT_LE(post.ess, static_cast<double>(M) * (1 + 1e-12));
  }
}

TEST(Reweight, ShiftInvariance) {
  auto ens = kl_ensemble(1, 64, 5);
  // Dyadic log-weights and shifts: every shifted value is exactly representable.
  std::vector<double> lw(64);
  for (std::size_t i = 0; i < 64; ++i) lw[i] = -static_cast<double>(i % 13) / 8.0;
  const auto base = reweight(ens, lw);
  for (double c : {1.0, -1024.0, 37.5, 1e6}) {
    std::vector<double> s = lw;
    for (double& v : s) v += c;
    const auto shifted = reweight(ens, s);
    EXPECT_EQ(shifted.norm_weights, base.norm_weights);
    EXPECT_NEAR(shifted.log_evidence - base.log_evidence, c, 1e-12 * (1 + std::abs(c)));
  }
  // Arbitrary shifts: agreement to rounding.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (double& v : lw) v = g(rng);
  const auto b2 = reweight(ens, lw);
  for (double c : {0.1, -3.7, 123.456}) {
    std::vector<double> s = lw;
    for (double& v : s) v += c;
    const auto p = reweight(ens, s);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(p.norm_weights[i], b2.norm_weights[i], 1e-13 * b2.norm_weights[i]);
    EXPECT_NEAR(p.log_evidence - b2.log_evidence, c, 1e-12 * (1 + std::abs(c)));
  }
}

TEST(ComputePosterior, ZeroForwardGivesThePriorExactly) {
  auto ens = kl_ensemble(3, 1000, 8);
  const GaussianNoise noise("R3", {1.0, 1.0, 1.0});
  const LogLikelihood ll(noise, ForwardMap::diagonal("R3", "R3", {0.0, 0.0, 0.0}), CoeffVector("R3", {1.0, -2.0, 0.5}));
  const auto post = compute_posterior(ens, ll);
  ASSERT_TRUE(post.valid);
  for (double w : post.norm_weights) EXPECT_EQ(w, 1.0 / 1000.0);
  EXPECT_EQ(post.log_evidence, 0.0);
  const std::vector<Functional> gs{[](std::span<const double> x) { return x[0]; },
                                   [](std::span<const double> x) { return std::sin(x[1]) * x[2]; },
                                   [](std::span<const double> x) { return x[0] * x[0] + 1.0; }};
  for (const auto& g : gs) EXPECT_EQ(posterior_functional(post, g), ensemble_average(*ens, g));
  const auto m = cm_estimate(post);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_EQ(m[k], ensemble_average(*ens, [k](std::span<const double> x) { return x[k]; }));
}

TEST(ComputePosterior, BitStableAcrossThreadCounts) {
  auto ens = kl_ensemble(4, 3000, 4);
  const GaussianNoise noise("R4", {0.1, 0.1, 0.1, 0.1});
  const LogLikelihood ll(noise, ForwardMap::identity("R4", 4), CoeffVector("R4", {0.3, -0.2, 0.1, 0.0}));
  const auto a = compute_posterior(ens, ll, 1), b = compute_posterior(ens, ll, 4);
  EXPECT_EQ(a.log_weights, b.log_weights);
  EXPECT_EQ(a.norm_weights, b.norm_weights);
  EXPECT_EQ(a.log_evidence, b.log_evidence);
  EXPECT_EQ(cm_estimate(a).coeffs, cm_estimate(b).coeffs);
}

TEST(ComputePosterior, ConjugateGaussianOracle) {
  // Each seed: every coordinate within 3 standard errors of the closed form.
  // Over 50 seeds at most 2 misses, the chance level for a 3-sigma band.
  for (std::size_t N : {1u, 2u, 3u, 4u}) {
    int misses = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(1000 * N + seed);
      std::normal_distribution<double> g;
      const auto scheme = KLScheme::decay(N, 1.0);
      std::vector<double> prior_var(N);
      for (std::size_t i = 0; i < N; ++i) prior_var[i] = scheme.sigma[i] * scheme.sigma[i];
      const std::size_t m = N;
      std::vector<double> L(m * N), noise_var(m, 0.5), y(m);
      for (double& v : L) v = g(rng);
      for (double& v : y) v = g(rng);
      const std::string id = "R" + std::to_string(N);
      auto ens = std::make_shared<const PriorEnsemble>(sample_kl(scheme, Basis::identity(id, N), N, 20000, seed));
      const LogLikelihood ll(GaussianNoise("Y", noise_var), ForwardMap::dense(id, "Y", m, N, L), CoeffVector("Y", y));
      const auto post = compute_posterior(ens, ll);
      ASSERT_TRUE(post.valid);
      const auto cm = cm_estimate(post);
      const auto se = cm_standard_error(post);
      const auto want = conjugate_mean(prior_var, L, m, noise_var, y);
      bool ok = true;
      for (std::size_t k = 0; k < N; ++k) ok = ok && std::abs(cm[k] - want[k]) <= 3.0 * se[k];
      misses += ok ? 0 : 1;
    }
    EXPECT_LE(misses, 2) << "N=" << N;
  }
}

TEST(PosteriorProbability, WholeEmptyAndComplement) {
  auto ens = kl_ensemble(2, 500, 6);
  const LogLikelihood ll(GaussianNoise("R2", {0.2, 0.2}), ForwardMap::identity("R2", 2), CoeffVector("R2", {0.5, 0.1}));
  const auto post = compute_posterior(ens, ll);
  EXPECT_EQ(posterior_probability(post, [](std::span<const double>) { return true; }), 1.0);
  EXPECT_EQ(posterior_probability(post, [](std::span<const double>) { return false; }), 0.0);
  const Predicate U = [](std::span<const double> x) { return x[0] > 0.3; };
  const double pu = posterior_probability(post, U);
  const double pc = posterior_probability(post, [&](std::span<const double> x) { return !U(x); });
  EXPECT_NEAR(pu + pc, 1.0, 1e-15);
  // No prior atom in U means no posterior mass either.
  EXPECT_EQ(posterior_probability(post, [](std::span<const double> x) { return x[0] > 1e6; }), 0.0);
}

TEST(PosteriorFunctional, ConstantLinearAndIndicator) {
  auto ens = kl_ensemble(3, 400, 7);
  const LogLikelihood ll(GaussianNoise("R3", {0.3, 0.3, 0.3}), ForwardMap::identity("R3", 3),
                         CoeffVector("R3", {0.2, 0.0, -0.1}));
  const auto post = compute_posterior(ens, ll);
  EXPECT_NEAR(posterior_functional(post, [](std::span<const double>) { return 1.0; }), 1.0, 1e-15);
  const auto m = cm_estimate(post);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_EQ(posterior_functional(post, [k](std::span<const double> x) { return x[k]; }), m[k]);
  const Predicate U = [](std::span<const double> x) { return x[1] < 0.0; };
  EXPECT_EQ(posterior_functional(post, [&](std::span<const double> x) { return U(x) ? 1.0 : 0.0; }),
            posterior_probability(post, U));
  EXPECT_THROW(posterior_functional(post, [](std::span<const double>) { return NAN; }), NumericError);
}

TEST(CmEstimate, UniformWeightsAndSingleParticle) {
  auto ens = kl_ensemble(2, 4, 9);
  const auto post = reweight(ens, std::vector<double>(4, 0.0));
  const auto m = cm_estimate(post);
  for (std::size_t k = 0; k < 2; ++k) {
    const double mean = 0.25 * ens->particles(0, k) + 0.25 * ens->particles(1, k) + 0.25 * ens->particles(2, k) +
                        0.25 * ens->particles(3, k);
    EXPECT_DOUBLE_EQ(m[k], mean);
  }
  auto single = kl_ensemble(2, 1, 9);
  EXPECT_EQ(cm_estimate(reweight(single, {-7.0})).coeffs, single->particle(0).coeffs);
}

TEST(LogLikelihood, SphericalRejectsDegenerateObservation) {
  const SphericalNoise sph(GaussianNoise("R3", {1.0, 1.0, 1.0}), 3);
  EXPECT_THROW(LogLikelihood(sph, ForwardMap::identity("R3", 3), CoeffVector("R3", {0, 0, 0})), DegenerateScaleError);
  EXPECT_THROW(LogLikelihood(GaussianNoise("R2", {1.0, 1.0}), ForwardMap::identity("R3", 3), CoeffVector("R3", {0, 0, 0})),
               BasisError);
}

TEST(LogLikelihood, SynthesizedSubordinatedObservationIsUsable) {
  const SubordinatedModel model{SubordinatedNoise(uniform_times(1.0, 400), {}), 20};
  const auto coarse = model.coarse_times();
  const ForwardMap L = ForwardMap::identity("grid", coarse.size());
  const std::vector<double> x(coarse.size(), 0.0);
  const Observation y = synthesize_observation(model, L, x, 3);
  const LogLikelihood ll(model, L, y);
  EXPECT_EQ(ll(x), 0.0);
  ASSERT_TRUE(ll.alpha_hat().has_value());
  EXPECT_EQ(ll.alpha_hat()->size(), coarse.size());
}
