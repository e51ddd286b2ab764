#pragma once

// Empirical diagnostics for posterior convergence across prior discretization
// levels and for continuity of the posterior in the observation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fsbayes/errors.hpp"
#include "fsbayes/likelihood.hpp"
#include "fsbayes/numeric.hpp"
#include "fsbayes/posterior.hpp"
#include "fsbayes/priors.hpp"

namespace fsbayes {

/// Finite family of bounded-Lipschitz functionals tanh(<x, alpha_j> + c_j) with dual norm
/// ||alpha_j|| <= 1 and |c_j| <= 1; each is bounded by 1 and 1-Lipschitz in the ambient norm.
class TestDictionary {
 public:
  TestDictionary(std::vector<std::vector<double>> alphas, std::vector<double> offsets, std::uint64_t seed = 0)
      : alphas_(std::move(alphas)), offsets_(std::move(offsets)), seed_(seed) {
    if (alphas_.size() != offsets_.size()) throw ModelError("TestDictionary: alpha/offset count mismatch");
  }

  /// D random entries: Gaussian directions scaled to unit dual norm sum alpha_k^2 / w_k = 1, c ~ U[-1, 1].
  static TestDictionary random(std::span<const double> ambient_weights, std::size_t count, std::uint64_t seed) {
    std::vector<std::vector<double>> a(count, std::vector<double>(ambient_weights.size()));
    std::vector<double> c(count);
    for (std::size_t j = 0; j < count; ++j) {
      Rng rng = make_rng(seed, j);
      double dual = 0.0;
      for (std::size_t k = 0; k < ambient_weights.size(); ++k) {
        a[j][k] = std::sqrt(ambient_weights[k]) * standard_normal(rng);
        dual += a[j][k] * a[j][k] / ambient_weights[k];
      }
      const double s = dual > 0.0 ? 1.0 / std::sqrt(dual) : 0.0;
      for (double& v : a[j]) v *= s;
      c[j] = 2.0 * uniform_open(rng) - 1.0;
    }
    return TestDictionary(std::move(a), std::move(c), seed);
  }

  std::size_t size() const noexcept { return alphas_.size(); }
  std::size_t dim() const noexcept { return alphas_.empty() ? 0 : alphas_.front().size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  double operator()(std::size_t j, std::span<const double> x) const {
    const auto& a = alphas_[j];
    double s = offsets_[j];
    for (std::size_t k = 0; k < x.size(); ++k) s += a[k] * x[k];
    return std::tanh(s);
  }

 private:
  std::vector<std::vector<double>> alphas_;
  std::vector<double> offsets_;
  std::uint64_t seed_;
};

/// A weighted particle measure: a posterior or an equally weighted prior ensemble.
struct WeightedCloud {
  const PriorEnsemble* ensemble;
  std::vector<double> weights;

  WeightedCloud(const PosteriorParticles& post) : ensemble(post.ensemble.get()), weights(post.norm_weights) {
    if (!post.valid) throw DegenerateEvidence("measure is a degenerate posterior");
  }
  WeightedCloud(const PriorEnsemble& ens)
      : ensemble(&ens), weights(ens.size(), 1.0 / static_cast<double>(ens.size())) {}

  template <class G>
  double expect(const G& g) const {
    return detail::weighted_sum(*ensemble, weights, g);
  }
};

/// max_j |E_1 f_j - E_2 f_j| over the dictionary; a lower bound on the bounded-Lipschitz metric.
inline double bl_distance(const WeightedCloud& p1, const WeightedCloud& p2, const TestDictionary& dict) {
  if (p1.ensemble->basis_id != p2.ensemble->basis_id || p1.ensemble->dim() != p2.ensemble->dim())
    throw BasisError("bl_distance: measures live on different bases");
  if (dict.dim() != p1.ensemble->dim()) throw BasisError("bl_distance: dictionary dimension mismatch");
  double d = 0.0;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    auto f = [&](std::span<const double> x) { return dict(j, x); };
    d = std::max(d, std::abs(p1.expect(f) - p2.expect(f)));
  }
  return d;
}

/// 1/2 sum |w_i - w'_i| for two weightings of the same atoms.
inline double tv_particle(const PosteriorParticles& p1, const PosteriorParticles& p2) {
  if (!p1.ensemble || !p2.ensemble || p1.ensemble_ref() != p2.ensemble_ref() || p1.size() != p2.size())
    throw SupportError("tv_particle: posteriors are not built on the same ensemble");
  detail::require_valid(p1, "tv_particle");
  detail::require_valid(p2, "tv_particle");
  std::vector<double> d(p1.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(p1.norm_weights[i] - p2.norm_weights[i]);
  return 0.5 * pairwise_sum(d);
}

/// 1/2 int |lambda_n - lambda| dt on a common cell grid; bounds the variation distance of the scale mixtures.
inline double tv_mixture(const Hyperdensity& lambda_n, const Hyperdensity& lambda) {
  if (lambda_n.is_atom() || lambda.is_atom()) {
    if (!(lambda_n.is_atom() && lambda.is_atom())) throw GridError("tv_mixture: atom compared with a cell density");
    return lambda_n.inverse_cdf(0.5) == lambda.inverse_cdf(0.5) ? 0.0 : 1.0;
  }
  if (lambda_n.edges() != lambda.edges()) throw GridError("tv_mixture: hyperdensities on different grids");
  const auto& e = lambda.edges();
  std::vector<double> d(lambda.densities().size());
  for (std::size_t j = 0; j < d.size(); ++j)
    d[j] = std::abs(lambda_n.densities()[j] - lambda.densities()[j]) * (e[j + 1] - e[j]);
  return 0.5 * pairwise_sum(d);
}

/// max over the family of |p1(U) - p2(U)|.
inline double setwise_distance(const WeightedCloud& p1, const WeightedCloud& p2, std::span<const Predicate> family) {
  if (p1.ensemble->basis_id != p2.ensemble->basis_id) throw BasisError("setwise_distance: basis mismatch");
  double d = 0.0;
  for (const auto& U : family) {
    auto ind = [&](std::span<const double> x) { return U(x) ? 1.0 : 0.0; };
    d = std::max(d, std::abs(p1.expect(ind) - p2.expect(ind)));
  }
  return d;
}

/// Weighted q-quantile of coordinate k.
inline double weighted_quantile(const WeightedCloud& m, std::size_t k, double q) {
  const PriorEnsemble& ens = *m.ensemble;
  std::vector<std::size_t> order(ens.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ens.particles(a, k) < ens.particles(b, k); });
  double acc = 0.0;
  for (std::size_t i : order) {
    acc += m.weights[i];
    if (acc >= q) return ens.particles(i, k);
  }
  return ens.particles(order.back(), k);
}

/// Half-spaces {x_k <= q} at the deciles of `reference`, over at most `max_coords`
/// coordinates spread evenly across the dimension.
inline std::vector<Predicate> decile_half_spaces(const WeightedCloud& reference, std::size_t max_coords = 16) {
  const std::size_t dim = reference.ensemble->dim();
  const std::size_t count = std::min(dim, max_coords);
  std::vector<Predicate> fam;
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t k = count == dim ? c : (c * (dim - 1)) / std::max<std::size_t>(count - 1, 1);
    for (int d = 1; d <= 9; ++d) {
      const double q = weighted_quantile(reference, k, d / 10.0);
      fam.emplace_back([k, q](std::span<const double> x) { return x[k] <= q; });
    }
  }
  return fam;
}

struct UiProfile {
  std::vector<double> thresholds;
  std::vector<double> tail;  ///< sup over ensembles of mean(rho 1{rho > C})
  double max_rho = 0.0;
};

/// Uniform-integrability surrogate. `thresholds` empty selects C_k = max_rho * 10^((k - 12)/4), k = 0..16.
template <class LogRho>
UiProfile ui_profile(std::span<const std::shared_ptr<const PriorEnsemble>> ensembles, const LogRho& log_rho,
                     std::vector<double> thresholds = {}, unsigned threads = 1) {
  if (ensembles.empty()) throw LevelError("ui_profile: no ensembles");
  std::vector<std::vector<double>> rho(ensembles.size());
  UiProfile prof;
  for (std::size_t e = 0; e < ensembles.size(); ++e) {
    const auto& ens = *ensembles[e];
    rho[e].resize(ens.size());
    parallel_for(ens.size(), threads, [&](std::size_t i) { rho[e][i] = std::exp(log_rho(ens.row(i))); });
    for (double r : rho[e]) prof.max_rho = std::max(prof.max_rho, r);
  }
  if (thresholds.empty()) {
    for (int k = 0; k <= 16; ++k) thresholds.push_back(prof.max_rho * std::pow(10.0, (k - 12) / 4.0));
  }
  for (std::size_t k = 1; k < thresholds.size(); ++k)
    if (!(thresholds[k] > thresholds[k - 1])) throw ModelError("ui_profile: thresholds must be increasing");
  prof.thresholds = thresholds;
  prof.tail.assign(thresholds.size(), 0.0);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    double sup = 0.0;
    for (const auto& r : rho) {
      std::vector<double> t(r.size());
      for (std::size_t i = 0; i < r.size(); ++i) t[i] = r[i] > thresholds[k] ? r[i] : 0.0;
      sup = std::max(sup, pairwise_sum(t) / static_cast<double>(r.size()));
    }
    prof.tail[k] = sup;
  }
  return prof;
}

struct ConvergenceReport {
  std::vector<int> levels;  ///< last entry is the reference level
  std::string metric_name = "bl";
  std::vector<double> values;    ///< bl distance to the reference posterior; NaN on degenerate levels
  std::vector<double> cm_gaps;   ///< ambient-norm distance of CM estimates
  std::vector<double> setwise;   ///< decile half-space distance
  std::vector<double> ess;
  std::vector<double> log_evidence;
  std::vector<bool> degenerate;
  UiProfile ui;
  std::uint64_t dictionary_seed = 0;
  std::size_t dictionary_size = 0;
  std::vector<std::string> notes;
};

inline double ambient_distance(std::span<const double> a, std::span<const double> b, std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += weights[k] * (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

/// Report for precomputed per-level ensembles and posteriors; the last level is the reference.
template <class LogRho>
ConvergenceReport ladder_report(const std::vector<int>& levels,
                                const std::vector<std::shared_ptr<const PriorEnsemble>>& ens,
                                const std::vector<PosteriorParticles>& post, const LogRho& log_rho,
                                std::size_t dictionary_size, std::uint64_t dictionary_seed, unsigned threads = 1) {
  if (levels.empty() || ens.size() != levels.size() || post.size() != levels.size())
    throw LevelError("ladder_report: one ensemble and posterior per level required");
  ConvergenceReport rep;
  rep.levels = levels;
  rep.dictionary_seed = dictionary_seed;
  rep.dictionary_size = dictionary_size;

  const PosteriorParticles& ref = post.back();
  if (!ref.valid) throw DegenerateEvidence("convergence_ladder: reference level is degenerate (" + ref.diagnostic + ")");

  const auto& weights = ens.back()->ambient_weights;
  const TestDictionary dict = TestDictionary::random(weights, dictionary_size, dictionary_seed);
  const WeightedCloud ref_cloud(ref);
  const auto family = decile_half_spaces(ref_cloud);
  const CoeffVector ref_cm = cm_estimate(ref);
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t l = 0; l < levels.size(); ++l) {
    rep.ess.push_back(post[l].valid ? post[l].ess : 0.0);
    rep.log_evidence.push_back(post[l].log_evidence);
    rep.degenerate.push_back(!post[l].valid);
    if (!post[l].valid) {
      rep.values.push_back(nan);
      rep.cm_gaps.push_back(nan);
      rep.setwise.push_back(nan);
      rep.notes.push_back("level " + std::to_string(levels[l]) + ": " + post[l].diagnostic);
      continue;
    }
    const WeightedCloud cloud(post[l]);
    rep.values.push_back(bl_distance(cloud, ref_cloud, dict));
    rep.cm_gaps.push_back(ambient_distance(cm_estimate(post[l]).coeffs, ref_cm.coeffs, weights));
    rep.setwise.push_back(setwise_distance(cloud, ref_cloud, family));
  }
  rep.ui = ui_profile(std::span<const std::shared_ptr<const PriorEnsemble>>(ens), log_rho, {}, threads);
  return rep;
}

inline void check_ladder_levels(const PriorScheme& scheme, const std::vector<int>& levels) {
  if (levels.empty()) throw LevelError("convergence_ladder: no levels");
  for (std::size_t k = 1; k < levels.size(); ++k)
    if (levels[k] <= levels[k - 1]) throw LevelError("convergence_ladder: levels must be increasing");
  if (std::holds_alternative<QuasiUniformScheme>(scheme))
    throw ModelError("convergence_ladder: quasi-uniform ensembles have no level structure");
}

/// Posteriors mu_n(., y) per level from a shared particle skeleton (one seed, sampled per level),
/// compared with the finest level.
inline ConvergenceReport convergence_ladder(const PriorScheme& scheme, const Basis& basis, std::vector<int> levels,
                                            std::size_t M, const LogLikelihood& log_rho, std::size_t dictionary_size,
                                            std::uint64_t dictionary_seed, std::uint64_t seed, unsigned threads = 1) {
  check_ladder_levels(scheme, levels);
  std::vector<std::shared_ptr<const PriorEnsemble>> ens;
  std::vector<PosteriorParticles> post;
  for (int n : levels) {
    ens.push_back(std::make_shared<const PriorEnsemble>(sample_prior(scheme, basis, n, M, seed, threads)));
    post.push_back(compute_posterior(ens.back(), log_rho, threads));
  }
  return ladder_report(levels, ens, post, log_rho, dictionary_size, dictionary_seed, threads);
}

struct ProbeRow {
  std::size_t direction = 0;
  double scale = 0.0;
  double modulus = 0.0;
  bool degenerate = false;
};

struct ProbeTable {
  std::vector<ProbeRow> rows;
  std::vector<bool> discontinuity_witness;  ///< per direction
};

/// max_U |mu(U, y + delta v) - mu(U, y)| per direction and scale. A direction is a
/// discontinuity witness when its modulus at the smallest nonzero scale is positive and at
/// least half of the modulus at the largest scale.
inline ProbeTable continuity_probe(const LogLikelihood& log_rho, std::shared_ptr<const PriorEnsemble> ens,
                                   std::span<const std::vector<double>> directions, std::span<const double> scales,
                                   std::vector<Predicate> family = {}, unsigned threads = 1) {
  const PosteriorParticles base = compute_posterior(ens, log_rho, threads);
  if (!base.valid) throw DegenerateEvidence("continuity_probe: posterior at y is degenerate");
  const WeightedCloud base_cloud(base);
  if (family.empty()) family = decile_half_spaces(base_cloud);
  ProbeTable table;
  for (std::size_t d = 0; d < directions.size(); ++d) {
    double m_small = -1.0, m_large = 0.0, s_small = std::numeric_limits<double>::infinity(), s_large = -1.0;
    for (double delta : scales) {
      ProbeRow row{d, delta, 0.0, false};
      if (delta != 0.0) {
        const PosteriorParticles p = compute_posterior(ens, log_rho.perturbed(directions[d], delta), threads);
        if (!p.valid) {
          row.degenerate = true;
          row.modulus = std::numeric_limits<double>::quiet_NaN();
        } else {
          row.modulus = setwise_distance(WeightedCloud(p), base_cloud, family);
        }
        if (!row.degenerate && std::abs(delta) < s_small) {
          s_small = std::abs(delta);
          m_small = row.modulus;
        }
        if (!row.degenerate && std::abs(delta) > s_large) {
          s_large = std::abs(delta);
          m_large = row.modulus;
        }
      }
      table.rows.push_back(row);
    }
    table.discontinuity_witness.push_back(m_small > 0.0 && m_small >= 0.5 * m_large);
  }
  return table;
}

}  // namespace fsbayes
