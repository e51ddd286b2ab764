#pragma once

// Binds a noise model, a forward map and an observation into the per-particle
// log rho(x, y) used by compute_posterior, and synthesizes observations
// y = L(x) + eps.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fsbayes/errors.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/noise.hpp"
#include "fsbayes/numeric.hpp"

namespace fsbayes {

/// Gaussian noise modified by a density f (box restriction or custom).
struct DominatedNoise {
  GaussianNoise base;
  DominatedModifier modifier;
};

/// Brownian noise plus drift 2x/(1+x^2), observed on `times`.
struct GirsanovNoise {
  GirsanovDrift drift;
  std::vector<double> times;
};

/// B_{alpha_t} observed on the fine grid of `noise`; the likelihood uses every
/// `stride`-th point, with alpha estimated by the fine-grid quadratic variation.
struct SubordinatedModel {
  SubordinatedNoise noise;
  std::size_t stride = 1;

  std::vector<double> coarse_times() const {
    std::vector<double> t;
    for (std::size_t j = 0; j < noise.times.size(); j += stride) t.push_back(noise.times[j]);
    if ((noise.times.size() - 1) % stride != 0) throw GridError("subordinated: stride must divide the step count");
    return t;
  }
};

using NoiseModel = std::variant<GaussianNoise, DominatedNoise, GirsanovNoise, SphericalNoise, DecomposableNoise,
                                LaplaceFourierNoise, SubordinatedModel, FiniteDimNoise>;

using Observation = std::variant<CoeffVector, PathGrid>;

inline std::string noise_kind(const NoiseModel& m) {
  static constexpr const char* names[] = {"gaussian",      "dominated",     "girsanov",     "spherical",
                                          "decomposable",  "laplace_fourier", "subordinated", "finite_dim"};
  return names[m.index()];
}

/// Dimension of the range coordinates the model expects L(x) in.
inline std::size_t observation_dim(const NoiseModel& m) {
  return std::visit(
      [](const auto& n) -> std::size_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) return n.dim();
        else if constexpr (std::is_same_v<T, DominatedNoise>) return n.base.dim();
        else if constexpr (std::is_same_v<T, GirsanovNoise>) return n.times.size();
        else if constexpr (std::is_same_v<T, SphericalNoise>) return n.base.dim();
        else if constexpr (std::is_same_v<T, DecomposableNoise>) return n.dim();
        else if constexpr (std::is_same_v<T, LaplaceFourierNoise>) return n.dim;
        else if constexpr (std::is_same_v<T, SubordinatedModel>) return n.coarse_times().size();
        else return n.dim();
      },
      m);
}

/// log rho(x, y) as a function of the particle x. Immutable; safe to call concurrently.
class LogLikelihood {
 public:
  LogLikelihood(NoiseModel model, ForwardMap L, Observation y)
      : model_(std::move(model)), L_(std::move(L)), y_(std::move(y)) {
    if (L_.range_dim() != observation_dim(model_))
      throw BasisError("likelihood: forward range dim " + std::to_string(L_.range_dim()) + " != noise dim " +
                       std::to_string(observation_dim(model_)));
    if (const auto* sub = std::get_if<SubordinatedModel>(&model_)) {
      const auto& path = std::get<PathGrid>(y_);
      if (path.times != sub->noise.times) throw GridError("subordinated: observation must live on the model's fine grid");
      const PathGrid qv = quadratic_variation(path);
      std::vector<double> a, v;
      for (std::size_t j = 0; j < path.size(); j += sub->stride) {
        a.push_back(qv.values[j]);
        v.push_back(path.values[j]);
      }
      const auto t = sub->coarse_times();
      alpha_hat_ = PathGrid(t, a);
      obs_values_ = v;
      sub_ = std::make_shared<SubordinatedLikelihood>(*alpha_hat_);
    } else if (const auto* g = std::get_if<GirsanovNoise>(&model_)) {
      const auto& path = std::get<PathGrid>(y_);
      if (path.times != g->times) throw GridError("girsanov: observation grid differs from the model grid");
      obs_values_ = path.values;
    } else {
      const auto& c = std::get<CoeffVector>(y_);
      obs_values_ = c.coeffs;
      if (obs_values_.size() != observation_dim(model_)) throw BasisError("likelihood: observation dimension mismatch");
      if (const auto* sph = std::get_if<SphericalNoise>(&model_)) {
        gamma_ = estimate_gamma(std::span<const double>(obs_values_), *sph);
        if (gamma_->gamma < kDegenerateScale)
          throw DegenerateScaleError("spherical: scale estimate vanishes for this observation");
      }
    }
  }

  const NoiseModel& model() const noexcept { return model_; }
  const ForwardMap& forward() const noexcept { return L_; }
  const Observation& observation() const noexcept { return y_; }
  std::optional<GammaEstimate> gamma_estimate() const { return gamma_; }
  const std::optional<PathGrid>& alpha_hat() const noexcept { return alpha_hat_; }

  double operator()(std::span<const double> x) const {
    const std::vector<double> Lx = L_.apply(x);
    return eval_forward(Lx);
  }

  /// log rho given L(x) directly.
  double eval_forward(std::span<const double> Lx) const {
    const std::span<const double> y(obs_values_);
    return std::visit(
        [&](const auto& n) -> double {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, GaussianNoise>) return log_rho_gaussian(n, Lx, y);
          else if constexpr (std::is_same_v<T, DominatedNoise>) return log_rho_dominated(n.base, n.modifier, Lx, y);
          else if constexpr (std::is_same_v<T, GirsanovNoise>) {
            std::vector<double> resid(y.size());
            for (std::size_t j = 0; j < y.size(); ++j) resid[j] = y[j] - Lx[j];
            return girsanov_log_modifier(n.times, resid, n.drift.horizon) + log_rho_brownian(n.times, Lx, y);
          } else if constexpr (std::is_same_v<T, SphericalNoise>) return log_rho_spherical(n, Lx, y, gamma_->gamma);
          else if constexpr (std::is_same_v<T, DecomposableNoise>) return log_rho_decomposable(n, Lx, y);
          else if constexpr (std::is_same_v<T, LaplaceFourierNoise>) return log_rho_laplace_fourier(n.b, Lx, y);
          else if constexpr (std::is_same_v<T, SubordinatedModel>) return (*sub_)(Lx, y);
          else return log_rho_finite_dim(n, Lx, y);
        },
        model_);
  }

  /// Same likelihood at a perturbed coefficient observation y + delta v.
  LogLikelihood perturbed(std::span<const double> direction, double delta) const {
    const auto* c = std::get_if<CoeffVector>(&y_);
    if (!c) throw ModelError("perturbed: only coefficient observations can be perturbed");
    if (direction.size() != c->size()) throw BasisError("perturbed: direction dimension mismatch");
    std::vector<double> v = c->coeffs;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += delta * direction[i];
    return LogLikelihood(model_, L_, CoeffVector(c->basis_id, std::move(v)));
  }

 private:
  NoiseModel model_;
  ForwardMap L_;
  Observation y_;
  std::vector<double> obs_values_;
  std::optional<GammaEstimate> gamma_;
  std::optional<PathGrid> alpha_hat_;
  std::shared_ptr<const SubordinatedLikelihood> sub_;
};

/// Noise draw for a model. Spherical draws use scale `gamma`.
inline Observation sample_model_noise(const NoiseModel& model, std::uint64_t seed, double gamma = 1.0) {
  return std::visit(
      [&](const auto& n) -> Observation {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) return sample_noise(n, seed);
        else if constexpr (std::is_same_v<T, DominatedNoise>) {
          if (std::holds_alternative<TrivialModifier>(n.modifier)) return sample_noise(n.base, seed);
          const auto* box = std::get_if<BoxRestriction>(&n.modifier);
          if (!box) throw ModelError("dominated noise: only box restrictions can be sampled");
          return sample_noise(n.base, *box, seed);
        } else if constexpr (std::is_same_v<T, GirsanovNoise>) return sample_noise(n.drift, n.times, seed);
        else if constexpr (std::is_same_v<T, SphericalNoise>) return sample_noise(n, gamma, seed);
        else if constexpr (std::is_same_v<T, DecomposableNoise>) return sample_noise(n, seed);
        else if constexpr (std::is_same_v<T, LaplaceFourierNoise>) return sample_noise(n, seed);
        else if constexpr (std::is_same_v<T, SubordinatedModel>) return sample_noise(n.noise, seed);
        else return CoeffVector("finite", sample_noise(n, seed));
      },
      model);
}

/// y = L(x_true) + eps. For subordinated models L(x) lives on the coarse grid and is
/// linearly interpolated onto the fine grid before the noise is added.
inline Observation synthesize_observation(const NoiseModel& model, const ForwardMap& L, std::span<const double> x_true,
                                          std::uint64_t seed, double gamma = 1.0) {
  const std::vector<double> Lx = L.apply(x_true);
  Observation eps = sample_model_noise(model, seed, gamma);
  if (auto* c = std::get_if<CoeffVector>(&eps)) {
    if (c->size() != Lx.size()) throw BasisError("synthesize: noise and forward dims differ");
    for (std::size_t i = 0; i < Lx.size(); ++i) c->coeffs[i] += Lx[i];
    c->basis_id = L.range_basis();
    return eps;
  }
  auto& path = std::get<PathGrid>(eps);
  if (const auto* sub = std::get_if<SubordinatedModel>(&model)) {
    const std::size_t s = sub->stride;
    for (std::size_t j = 0; j < path.size(); ++j) {
      const std::size_t k = j / s;
      const double frac = static_cast<double>(j % s) / static_cast<double>(s);
      const double v = (j % s == 0) ? Lx[k] : (1.0 - frac) * Lx[k] + frac * Lx[k + 1];
      path.values[j] += v;
    }
    return eps;
  }
  if (path.size() != Lx.size()) throw GridError("synthesize: path and forward dims differ");
  for (std::size_t j = 0; j < Lx.size(); ++j) path.values[j] += Lx[j];
  return eps;
}

}  // namespace fsbayes
