#pragma once

// Generalized Bayes formula as self-normalized importance reweighting of a
// prior ensemble: w_i proportional to rho(x_i, y).

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fsbayes/errors.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/numeric.hpp"
#include "fsbayes/priors.hpp"

namespace fsbayes {

struct PosteriorParticles {
  std::shared_ptr<const PriorEnsemble> ensemble;
  std::vector<double> log_weights;   ///< log rho(x_i, y) plus any prior log-weight; -inf allowed
  std::vector<double> norm_weights;  ///< sums to 1 when valid
  double log_evidence = kNegInf;     ///< log of the prior average of rho
  double ess = 0.0;
  bool valid = false;
  std::string diagnostic;            ///< reason when !valid

  std::size_t size() const noexcept { return log_weights.size(); }
  std::string ensemble_ref() const { return ensemble ? ensemble->id() : std::string{}; }
};

/// 1 / sum w_i^2.
inline double ess(std::span<const double> norm_weights) {
  std::vector<double> sq(norm_weights.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = norm_weights[i] * norm_weights[i];
  return 1.0 / pairwise_sum(sq);
}

inline double ess(const PosteriorParticles& post) { return ess(post.norm_weights); }

/// Normalizes precomputed log-weights. `log_prior_weights`, when given, reweights the
/// prior atoms themselves (unnormalized); empty means the uniform 1/M prior.
inline PosteriorParticles reweight(std::shared_ptr<const PriorEnsemble> ens, std::vector<double> log_rho,
                                   std::span<const double> log_prior_weights = {}) {
  if (!ens || ens->size() == 0) throw LevelError("reweight: empty ensemble");
  if (log_rho.size() != ens->size()) throw SupportError("reweight: one log-weight per particle required");
  if (!log_prior_weights.empty() && log_prior_weights.size() != log_rho.size())
    throw SupportError("reweight: prior weight count mismatch");
  for (std::size_t i = 0; i < log_rho.size(); ++i) {
    if (std::isnan(log_rho[i]) || log_rho[i] == std::numeric_limits<double>::infinity())
      throw NumericError("reweight: non-finite log-weight at particle " + std::to_string(i));
  }
  PosteriorParticles post;
  post.ensemble = std::move(ens);
  const std::size_t M = log_rho.size();

  double log_prior_norm = std::log(static_cast<double>(M));
  if (!log_prior_weights.empty()) {
    for (std::size_t i = 0; i < M; ++i) {
      if (std::isnan(log_prior_weights[i]) || log_prior_weights[i] == std::numeric_limits<double>::infinity())
        throw NumericError("reweight: non-finite prior log-weight");
      log_rho[i] += log_prior_weights[i];
    }
    log_prior_norm = log_sum_exp(log_prior_weights);
  }
  post.log_weights = std::move(log_rho);

  double mx = kNegInf;
  for (double v : post.log_weights) mx = std::max(mx, v);
  post.norm_weights.assign(M, 0.0);
  if (mx == kNegInf) {
    post.valid = false;
    post.diagnostic = "DegenerateEvidence: every particle has zero likelihood";
    return post;
  }
  std::vector<double> e(M);
  for (std::size_t i = 0; i < M; ++i) e[i] = std::exp(post.log_weights[i] - mx);
  const double total = pairwise_sum(e);
  for (std::size_t i = 0; i < M; ++i) post.norm_weights[i] = e[i] / total;
  post.log_evidence = mx + (std::log(total) - log_prior_norm);
  if (!std::isfinite(post.log_evidence)) {
    post.valid = false;
    post.diagnostic = "DegenerateEvidence: non-finite evidence";
    return post;
  }
  post.ess = ess(post.norm_weights);
  post.valid = true;
  return post;
}

/// Evaluates `log_rho(row)` for every particle (in parallel) and reweights.
template <class LogRho>
PosteriorParticles compute_posterior(std::shared_ptr<const PriorEnsemble> ens, const LogRho& log_rho,
                                     unsigned threads = 1, std::span<const double> log_prior_weights = {}) {
  if (!ens || ens->size() == 0) throw LevelError("compute_posterior: empty ensemble");
  std::vector<double> lw(ens->size());
  parallel_for(ens->size(), threads, [&](std::size_t i) { lw[i] = log_rho(ens->row(i)); });
  return reweight(std::move(ens), std::move(lw), log_prior_weights);
}

namespace detail {
inline void require_valid(const PosteriorParticles& post, const char* who) {
  if (!post.valid) throw DegenerateEvidence(std::string(who) + ": posterior is degenerate (" + post.diagnostic + ")");
}

/// sum_i w_i g_i / sum_i w_i in fixed pairwise order; the single accumulation kernel for all
/// functionals, so g = 1 gives exactly 1.
template <class G>
double weighted_sum(const PriorEnsemble& ens, std::span<const double> w, const G& g) {
  std::vector<double> terms(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g(ens.row(i));
    if (!std::isfinite(gi)) throw NumericError("functional is non-finite on particle " + std::to_string(i));
    terms[i] = w[i] * gi;
  }
  return pairwise_sum(terms) / pairwise_sum(w);
}
}  // namespace detail

/// Conditional-mean estimate sum_i w_i x_i.
inline CoeffVector cm_estimate(const PosteriorParticles& post) {
  detail::require_valid(post, "cm_estimate");
  const PriorEnsemble& ens = *post.ensemble;
  std::vector<double> m(ens.dim(), 0.0);
  for (std::size_t k = 0; k < ens.dim(); ++k)
    m[k] = detail::weighted_sum(ens, post.norm_weights, [k](std::span<const double> x) { return x[k]; });
  return CoeffVector(ens.basis_id, std::move(m));
}

/// Self-normalized importance-sampling standard error of each coordinate of cm_estimate:
/// sqrt(sum_i w_i^2 (x_ik - m_k)^2).
inline std::vector<double> cm_standard_error(const PosteriorParticles& post) {
  const CoeffVector m = cm_estimate(post);
  const PriorEnsemble& ens = *post.ensemble;
  std::vector<double> se(ens.dim());
  std::vector<double> col(ens.size());
  for (std::size_t k = 0; k < ens.dim(); ++k) {
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const double d = post.norm_weights[i] * (ens.particles(i, k) - m[k]);
      col[i] = d * d;
    }
    se[k] = std::sqrt(pairwise_sum(col));
  }
  return se;
}

using Predicate = std::function<bool(std::span<const double>)>;
using Functional = std::function<double(std::span<const double>)>;

inline double posterior_functional(const PosteriorParticles& post, const Functional& g) {
  detail::require_valid(post, "posterior_functional");
  return detail::weighted_sum(*post.ensemble, post.norm_weights, g);
}

/// mu(U, y) for the set U = { x : in_set(x) }.
inline double posterior_probability(const PosteriorParticles& post, const Predicate& in_set) {
  detail::require_valid(post, "posterior_probability");
  return detail::weighted_sum(*post.ensemble, post.norm_weights,
                              [&](std::span<const double> x) { return in_set(x) ? 1.0 : 0.0; });
}

/// Prior ensemble average of g with weights 1/M, through the same kernel as posterior_functional.
inline double ensemble_average(const PriorEnsemble& ens, const Functional& g) {
  const std::vector<double> w(ens.size(), 1.0 / static_cast<double>(ens.size()));
  return detail::weighted_sum(ens, w, g);
}

}  // namespace fsbayes
