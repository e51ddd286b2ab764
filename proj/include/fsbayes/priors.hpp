#pragma once

// Prior discretization schemes. Every sampler is a pure function of
// (scheme, level, particle count, seed): particle i draws from its own stream
// derive_seed(seed, i), so ensembles do not depend on the worker count, and
// ensembles of the same scheme at different levels share one random skeleton.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "fsbayes/errors.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/noise.hpp"
#include "fsbayes/numeric.hpp"

namespace fsbayes {

/// Equally weighted particles approximating a prior law at one discretization level.
struct PriorEnsemble {
  std::string scheme;              ///< scheme tag, e.g. "kl"
  int level = 0;
  std::uint64_t seed = 0;
  std::string basis_id;
  std::vector<double> times;       ///< grid of path-valued particles; empty for coefficient particles
  std::vector<double> ambient_weights;
  RowMatrix particles;             ///< one particle per row
  std::vector<double> hyper_scale; ///< hierarchical schemes: drawn scale per particle

  std::size_t size() const noexcept { return particles.rows(); }
  std::size_t dim() const noexcept { return particles.cols(); }
  bool is_path() const noexcept { return !times.empty(); }

  /// Identity used to decide whether two weightings live on the same atoms.
  std::string id() const {
    return scheme + ":level=" + std::to_string(level) + ":M=" + std::to_string(size()) + ":seed=" + std::to_string(seed);
  }

  std::span<const double> row(std::size_t i) const { return particles.row(i); }
  CoeffVector particle(std::size_t i) const {
    auto r = particles.row(i);
    return CoeffVector(basis_id, std::vector<double>(r.begin(), r.end()));
  }
  PathGrid path(std::size_t i) const {
    auto r = particles.row(i);
    return PathGrid(times, std::vector<double>(r.begin(), r.end()));
  }

  friend bool operator==(const PriorEnsemble&, const PriorEnsemble&) = default;
};

namespace detail {
inline void check_counts(int level, std::size_t M) {
  if (level < 1) throw LevelError("prior level must be >= 1");
  if (M < 1) throw LevelError("particle count must be >= 1");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Karhunen-Loeve truncation X_n = sum_{i<=n} sigma_i xi_i e_i.

struct KLScheme {
  std::vector<double> sigma;

  /// sigma_i = (1 + i)^-p, p > 1/2 so the full series is square summable.
  static KLScheme decay(std::size_t dim, double p) {
    if (!(p > 0.5)) throw ModelError("KL eigendecay exponent must exceed 1/2");
    KLScheme s;
    s.sigma.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) s.sigma[i] = std::pow(1.0 + static_cast<double>(i), -p);
    return s;
  }
};

inline PriorEnsemble sample_kl(const KLScheme& scheme, const Basis& basis, int level, std::size_t M, std::uint64_t seed,
                               unsigned threads = 1) {
  detail::check_counts(level, M);
  const std::size_t N = scheme.sigma.size();
  if (N != basis.dim()) throw BasisError("sample_kl: sigma length does not match basis dim");
  if (static_cast<std::size_t>(level) > N) throw LevelError("sample_kl: level exceeds truncation dim");
  PriorEnsemble ens{"kl", level, seed, basis.id(), {}, basis.embedding_weights(), RowMatrix(M, N), {}};
  const std::size_t n = static_cast<std::size_t>(level);
  parallel_for(M, threads, [&](std::size_t i) {
    Rng rng = make_rng(seed, i);
    auto row = ens.particles.row(i);
    // All N normals are drawn so every level shares the same skeleton.
    for (std::size_t k = 0; k < N; ++k) {
      const double xi = standard_normal(rng);
      row[k] = k < n ? scheme.sigma[k] * xi : 0.0;
    }
  });
  return ens;
}

/// Orthogonal projection P_n: coordinates beyond n set to zero.
inline PriorEnsemble project_level(const PriorEnsemble& ens, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > ens.dim()) throw LevelError("project_level: level outside [0, dim]");
  PriorEnsemble out = ens;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto r = out.particles.row(i);
    for (std::size_t k = static_cast<std::size_t>(n); k < r.size(); ++k) r[k] = 0.0;
  }
  if (ens.scheme == "kl" || ens.scheme == "hierarchical") {
    // P_m applied to a level-l draw is the level-min(m, l) draw of the same skeleton.
    out.level = std::min(ens.level, n);
  } else if (static_cast<std::size_t>(n) < ens.dim()) {
    out.scheme = ens.scheme + "+P" + std::to_string(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path priors built on a Brownian skeleton sampled on a fine uniform grid.

enum class PathMap { identity, square, clip };

inline double apply_path_map(PathMap f, double v) {
  switch (f) {
    case PathMap::square: return v * v;
    case PathMap::clip: return std::min(v, 1.0);
    default: return v;
  }
}

/// X_n(t) = f(b_n(t)), b_n the piecewise-linear interpolant of Brownian motion on n+1 knots.
struct GaussianMapScheme {
  PathMap map = PathMap::identity;
  double horizon = 1.0;
  std::size_t fine_steps = 1024;  ///< output grid; every level must divide it
};

enum class ItoIntegrand { constant, sin_brownian };

/// Left-point Euler sums X_n(t_i) = sum_{j<=i} f(t_{j-1}, B) (B_{t_j} - B_{t_{j-1}}) on n steps.
struct ItoScheme {
  ItoIntegrand integrand = ItoIntegrand::constant;
  double constant = 1.0;
  double horizon = 1.0;
  std::size_t fine_steps = 1024;
};

namespace detail {
inline std::size_t knot_stride(std::size_t fine_steps, int level) {
  const auto n = static_cast<std::size_t>(level);
  if (n > fine_steps || fine_steps % n != 0) throw LevelError("path prior: level must divide the fine grid step count");
  return fine_steps / n;
}

inline void brownian_skeleton(std::span<const double> times, std::uint64_t seed, std::size_t i, std::span<double> out) {
  Rng rng = make_rng(seed, i);
  out[0] = 0.0;
  for (std::size_t j = 1; j < times.size(); ++j)
    out[j] = out[j - 1] + std::sqrt(times[j] - times[j - 1]) * standard_normal(rng);
}

/// Overwrites the fine values between knots (stride apart) by linear interpolation.
inline void interpolate_between_knots(std::span<const double> times, std::size_t stride, std::span<double> v) {
  for (std::size_t k0 = 0; k0 + stride < v.size(); k0 += stride) {
    const std::size_t k1 = k0 + stride;
    for (std::size_t j = k0 + 1; j < k1; ++j) {
      const double s = (times[j] - times[k0]) / (times[k1] - times[k0]);
      v[j] = (1.0 - s) * v[k0] + s * v[k1];
    }
  }
}
}  // namespace detail

/// The fine-grid Brownian path used by particle i of any path scheme run with `seed`.
inline std::vector<double> brownian_skeleton(double horizon, std::size_t fine_steps, std::uint64_t seed, std::size_t i) {
  const auto t = uniform_times(horizon, fine_steps);
  std::vector<double> b(t.size());
  detail::brownian_skeleton(t, seed, i, b);
  return b;
}

inline PriorEnsemble sample_gaussian_map(const GaussianMapScheme& scheme, int level, std::size_t M, std::uint64_t seed,
                                         unsigned threads = 1) {
  detail::check_counts(level, M);
  const std::size_t stride = detail::knot_stride(scheme.fine_steps, level);
  auto times = uniform_times(scheme.horizon, scheme.fine_steps);
  const Basis grid = Basis::grid("grid", times);
  PriorEnsemble ens{"gaussian_map", level, seed, grid.id(), times, grid.embedding_weights(),
                    RowMatrix(M, times.size()), {}};
  parallel_for(M, threads, [&](std::size_t i) {
    auto row = ens.particles.row(i);
    detail::brownian_skeleton(times, seed, i, row);
    detail::interpolate_between_knots(times, stride, row);
    for (double& v : row) v = apply_path_map(scheme.map, v);
  });
  return ens;
}

inline PriorEnsemble sample_ito_prior(const ItoScheme& scheme, int level, std::size_t M, std::uint64_t seed,
                                      unsigned threads = 1) {
  detail::check_counts(level, M);
  const std::size_t stride = detail::knot_stride(scheme.fine_steps, level);
  auto times = uniform_times(scheme.horizon, scheme.fine_steps);
  const Basis grid = Basis::grid("grid", times);
  PriorEnsemble ens{"ito", level, seed, grid.id(), times, grid.embedding_weights(), RowMatrix(M, times.size()), {}};
  parallel_for(M, threads, [&](std::size_t i) {
    std::vector<double> b(times.size());
    detail::brownian_skeleton(times, seed, i, b);
    auto row = ens.particles.row(i);
    row[0] = 0.0;
    for (std::size_t k = stride; k < times.size(); k += stride) {
      if (scheme.integrand == ItoIntegrand::constant) {
        row[k] = scheme.constant * b[k];  // telescoped sum
      } else {
        const double left = b[k - stride];
        row[k] = row[k - stride] + std::sin(left) * (b[k] - left);
      }
    }
    detail::interpolate_between_knots(times, stride, row);
  });
  return ens;
}

// ---------------------------------------------------------------------------
// Hierarchical scale mixtures X = t Z with t ~ lambda.

/// Piecewise-constant density on cells [edges_j, edges_{j+1}).
class Hyperdensity {
 public:
  Hyperdensity(std::vector<double> edges, std::vector<double> densities)
      : edges_(std::move(edges)), dens_(std::move(densities)) {
    if (edges_.size() < 2 || dens_.size() + 1 != edges_.size()) throw ModelError("Hyperdensity: need cells+1 edges");
    cdf_.assign(edges_.size(), 0.0);
    for (std::size_t j = 0; j < dens_.size(); ++j) {
      if (!(edges_[j + 1] > edges_[j])) throw ModelError("Hyperdensity: edges must be strictly increasing");
      if (!(dens_[j] >= 0.0) || !std::isfinite(dens_[j])) throw ModelError("Hyperdensity: density must be >= 0");
      cdf_[j + 1] = cdf_[j] + dens_[j] * (edges_[j + 1] - edges_[j]);
    }
    if (std::abs(cdf_.back() - 1.0) > 1e-6) throw ModelError("Hyperdensity: density must integrate to 1");
  }

  /// Uniform density on [a, b].
  static Hyperdensity uniform(double a, double b) { return Hyperdensity({a, b}, {1.0 / (b - a)}); }

  /// Point mass at t0 (the limit of a shrinking single-cell spike).
  static Hyperdensity atom(double t0) {
    if (!std::isfinite(t0)) throw ModelError("Hyperdensity: atom location must be finite");
    Hyperdensity h({t0, t0 + 1.0}, {1.0});
    h.atom_ = t0;
    return h;
  }

  bool is_atom() const noexcept { return atom_.has_value(); }

  const std::vector<double>& edges() const noexcept { return edges_; }
  const std::vector<double>& densities() const noexcept { return dens_; }

  double density_at(double t) const {
    if (atom_) return 0.0;
    if (t < edges_.front() || t >= edges_.back()) return 0.0;
    auto it = std::upper_bound(edges_.begin(), edges_.end(), t);
    return dens_[static_cast<std::size_t>(it - edges_.begin()) - 1];
  }

  double inverse_cdf(double u) const {
    if (atom_) return *atom_;
    const double target = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cdf_.begin(), 1)) - 1,
                                          dens_.size() - 1);
    while (dens_[j] == 0.0 && j + 1 < dens_.size()) ++j;
    const double width = edges_[j + 1] - edges_[j];
    const double frac = std::clamp((target - cdf_[j]) / (dens_[j] * width), 0.0, 1.0);
    return edges_[j] + frac * width;
  }

  /// Exact E[t^2] of the piecewise-constant density.
  double second_moment() const {
    if (atom_) return *atom_ * *atom_;
    double s = 0.0;
    for (std::size_t j = 0; j < dens_.size(); ++j) {
      const double a = edges_[j], b = edges_[j + 1];
      s += dens_[j] * (b * b * b - a * a * a) / 3.0;
    }
    return s;
  }

  friend bool operator==(const Hyperdensity&, const Hyperdensity&) = default;

 private:
  std::vector<double> edges_;
  std::vector<double> dens_;
  std::vector<double> cdf_;
  std::optional<double> atom_;
};

struct HierarchicalScheme {
  std::vector<double> base_spectrum;  ///< covariance eigenvalues of Z
  Hyperdensity hyper;
};

/// Base Gaussian draw Z (all coordinates) and uniform u used by particle i.
struct HierarchicalDraw {
  double u;
  std::vector<double> z;
};

inline HierarchicalDraw hierarchical_base_draw(const HierarchicalScheme& scheme, std::uint64_t seed, std::size_t i) {
  Rng rng = make_rng(seed, i);
  HierarchicalDraw d{uniform_open(rng), std::vector<double>(scheme.base_spectrum.size())};
  for (std::size_t k = 0; k < d.z.size(); ++k) d.z[k] = std::sqrt(scheme.base_spectrum[k]) * standard_normal(rng);
  return d;
}

/// Level n keeps the first n coordinates of Z (linear discretization inside the mixture).
inline PriorEnsemble sample_hierarchical(const HierarchicalScheme& scheme, const Basis& basis, int level, std::size_t M,
                                         std::uint64_t seed, unsigned threads = 1) {
  detail::check_counts(level, M);
  const std::size_t N = scheme.base_spectrum.size();
  if (N != basis.dim()) throw BasisError("sample_hierarchical: spectrum length does not match basis dim");
  if (static_cast<std::size_t>(level) > N) throw LevelError("sample_hierarchical: level exceeds dim");
  for (double l : scheme.base_spectrum)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ModelError("sample_hierarchical: base spectrum must be >= 0");
  PriorEnsemble ens{"hierarchical", level, seed, basis.id(), {}, basis.embedding_weights(), RowMatrix(M, N),
                    std::vector<double>(M)};
  const auto n = static_cast<std::size_t>(level);
  parallel_for(M, threads, [&](std::size_t i) {
    const HierarchicalDraw d = hierarchical_base_draw(scheme, seed, i);
    const double t = scheme.hyper.inverse_cdf(d.u);
    ens.hyper_scale[i] = t;
    auto row = ens.particles.row(i);
    for (std::size_t k = 0; k < N; ++k) row[k] = k < n ? t * d.z[k] : 0.0;
  });
  return ens;
}

// ---------------------------------------------------------------------------
// Quasi-uniform ensembles: a base-2 digital (Sobol) sequence through inverse CDFs.

struct UniformMarginal {
  double lo = 0.0, hi = 1.0;
};
struct NormalMarginal {
  double mean = 0.0, sd = 1.0;
};
using Marginal = std::variant<UniformMarginal, NormalMarginal>;

inline double marginal_quantile(const Marginal& m, double u) {
  if (const auto* un = std::get_if<UniformMarginal>(&m)) return un->lo + (un->hi - un->lo) * u;
  const auto& nm = std::get<NormalMarginal>(m);
  return boost::math::quantile(boost::math::normal(nm.mean, nm.sd), u);
}

/// Sobol direction numbers (Joe-Kuo) for the first 16 dimensions.
class SobolSequence {
 public:
  static constexpr std::size_t kMaxDim = 16;

  explicit SobolSequence(std::size_t dim) : dim_(dim) {
    if (dim == 0 || dim > kMaxDim) throw ModelError("SobolSequence: dimension must lie in [1, 16]");
    struct Poly {
      unsigned s, a;
      std::array<unsigned, 6> m;
    };
    static constexpr std::array<Poly, kMaxDim - 1> kPolys{{
        {1, 0, {1}},
        {2, 1, {1, 3}},
        {3, 1, {1, 3, 1}},
        {3, 2, {1, 1, 1}},
        {4, 1, {1, 1, 3, 3}},
        {4, 4, {1, 3, 5, 13}},
        {5, 2, {1, 1, 5, 5, 17}},
        {5, 4, {1, 1, 5, 5, 5}},
        {5, 7, {1, 1, 7, 11, 19}},
        {5, 11, {1, 1, 5, 1, 1}},
        {5, 13, {1, 1, 1, 3, 11}},
        {5, 14, {1, 3, 5, 5, 31}},
        {6, 1, {1, 3, 3, 9, 7, 49}},
        {6, 13, {1, 1, 1, 15, 21, 21}},
        {6, 16, {1, 3, 1, 13, 27, 49}},
    }};
    dirs_.assign(dim, std::array<std::uint32_t, 32>{});
    for (unsigned k = 0; k < 32; ++k) dirs_[0][k] = 1u << (31 - k);
    for (std::size_t d = 1; d < dim; ++d) {
      const Poly& p = kPolys[d - 1];
      auto& v = dirs_[d];
      for (unsigned k = 0; k < p.s; ++k) v[k] = p.m[k] << (31 - k);
      for (unsigned k = p.s; k < 32; ++k) {
        std::uint32_t x = v[k - p.s] ^ (v[k - p.s] >> p.s);
        for (unsigned j = 1; j < p.s; ++j) {
          if ((p.a >> (p.s - 1 - j)) & 1u) x ^= v[k - j];
        }
        v[k] = x;
      }
    }
  }

  /// Point `index` of the sequence, coordinates in [0, 1).
  std::vector<double> point(std::uint32_t index) const {
    std::vector<double> x(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      std::uint32_t acc = 0;
      for (unsigned k = 0; k < 32; ++k)
        if ((index >> k) & 1u) acc ^= dirs_[d][k];
      x[d] = static_cast<double>(acc) * 0x1.0p-32;
    }
    return x;
  }

 private:
  std::size_t dim_;
  std::vector<std::array<std::uint32_t, 32>> dirs_;
};

struct QuasiUniformScheme {
  std::vector<Marginal> marginals;
};

/// Deterministic ensemble x_i = F^-1(s_{i+1}); the origin point of the sequence is skipped.
inline PriorEnsemble sample_quasi_uniform(const QuasiUniformScheme& scheme, const Basis& basis, std::size_t M) {
  if (M < 1) throw LevelError("particle count must be >= 1");
  const std::size_t N = scheme.marginals.size();
  if (N != basis.dim()) throw BasisError("sample_quasi_uniform: marginal count does not match basis dim");
  for (const auto& m : scheme.marginals) {
    if (const auto* un = std::get_if<UniformMarginal>(&m); un && !(un->hi > un->lo))
      throw ModelError("uniform marginal needs hi > lo");
    if (const auto* nm = std::get_if<NormalMarginal>(&m); nm && !(nm->sd > 0.0))
      throw ModelError("normal marginal needs sd > 0");
  }
  const SobolSequence seq(N);
  PriorEnsemble ens{"quasi_uniform", static_cast<int>(N), 0, basis.id(), {}, basis.embedding_weights(), RowMatrix(M, N), {}};
  for (std::size_t i = 0; i < M; ++i) {
    const auto u = seq.point(static_cast<std::uint32_t>(i + 1));
    auto row = ens.particles.row(i);
    for (std::size_t d = 0; d < N; ++d) row[d] = marginal_quantile(scheme.marginals[d], u[d]);
  }
  return ens;
}

// ---------------------------------------------------------------------------

using PriorScheme = std::variant<KLScheme, GaussianMapScheme, ItoScheme, HierarchicalScheme, QuasiUniformScheme>;

/// Dispatches to the scheme's sampler. Path schemes ignore `basis`.
inline PriorEnsemble sample_prior(const PriorScheme& scheme, const Basis& basis, int level, std::size_t M,
                                  std::uint64_t seed, unsigned threads = 1) {
  return std::visit(
      [&](const auto& s) -> PriorEnsemble {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KLScheme>) return sample_kl(s, basis, level, M, seed, threads);
        else if constexpr (std::is_same_v<T, GaussianMapScheme>) return sample_gaussian_map(s, level, M, seed, threads);
        else if constexpr (std::is_same_v<T, ItoScheme>) return sample_ito_prior(s, level, M, seed, threads);
        else if constexpr (std::is_same_v<T, HierarchicalScheme>)
          return sample_hierarchical(s, basis, level, M, seed, threads);
        else return sample_quasi_uniform(s, basis, M);
      },
      scheme);
}

}  // namespace fsbayes
