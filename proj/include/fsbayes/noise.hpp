#pragma once

// Noise models. Each model supplies log rho(x, y), the log density of the law
// of eps + L(x) against a fixed dominating measure evaluated at y, together
// with a seeded sampler for synthetic data.
//
// Dominating measures: the noise law itself for the Gaussian, dominated,
// spherical (conditional on the scale), decomposable and subordinated models,
// and Lebesgue measure for finite-dimensional noise.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fsbayes/errors.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/numeric.hpp"

namespace fsbayes {

// ---------------------------------------------------------------------------
// Gaussian noise, diagonal in a basis: eps = sum_i sqrt(lambda_i) xi_i e_i.

struct GaussianNoise {
  std::string basis_id;
  std::vector<double> eigenvalues;

  GaussianNoise(std::string basis, std::vector<double> lambda) : basis_id(std::move(basis)), eigenvalues(std::move(lambda)) {
    if (eigenvalues.empty()) throw ModelError("GaussianNoise: empty spectrum");
    for (double l : eigenvalues) {
      if (!(l > 0.0) || !std::isfinite(l)) throw ModelError("GaussianNoise: eigenvalues must be finite and > 0");
    }
  }

  /// lambda_i = scale * (1 + i)^-p
  static GaussianNoise decay(std::string basis, std::size_t dim, double p, double scale = 1.0) {
    std::vector<double> l(dim);
    for (std::size_t i = 0; i < dim; ++i) l[i] = scale * std::pow(1.0 + static_cast<double>(i), -p);
    return GaussianNoise(std::move(basis), std::move(l));
  }

  std::size_t dim() const noexcept { return eigenvalues.size(); }
};

namespace detail {
inline void check_pair(std::span<const double> Lx, std::span<const double> y, std::size_t dim, const char* who) {
  if (Lx.size() != dim || y.size() != dim) throw BasisError(std::string(who) + ": dimension mismatch");
  require_finite(Lx, who);
  require_finite(y, who);
}
inline void check_basis(const std::string& expected, const CoeffVector& a, const CoeffVector& b, const char* who) {
  if (a.basis_id != expected || b.basis_id != expected)
    throw BasisError(std::string(who) + ": vectors must live in basis '" + expected + "'");
}
}  // namespace detail

/// Cameron-Martin log density <y, C^-1 Lx> - 1/2 ||Lx||_H^2.
inline double log_rho_gaussian(const GaussianNoise& noise, std::span<const double> Lx, std::span<const double> y) {
  detail::check_pair(Lx, y, noise.dim(), "log_rho_gaussian");
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < Lx.size(); ++i) {
    const double s = Lx[i] / noise.eigenvalues[i];
    lin += y[i] * s;
    quad += Lx[i] * s;
  }
  return lin - 0.5 * quad;
}

inline double log_rho_gaussian(const GaussianNoise& noise, const CoeffVector& Lx, const CoeffVector& y) {
  detail::check_basis(noise.basis_id, Lx, y, "log_rho_gaussian");
  return log_rho_gaussian(noise, Lx.view(), y.view());
}

/// Discrete Cameron-Martin log density of standard Brownian motion observed on
/// `times` (first time 0, values there ignored): sum dy dLx / dt - 1/2 sum dLx^2 / dt.
/// Equals y.K^-1 Lx - 1/2 Lx.K^-1 Lx with K_ij = min(t_i, t_j) on the points t > 0.
inline double log_rho_brownian(std::span<const double> times, std::span<const double> Lx, std::span<const double> y) {
  if (Lx.size() != times.size() || y.size() != times.size()) throw GridError("log_rho_brownian: grids not aligned");
  double lin = 0.0, quad = 0.0;
  double ly_prev = 0.0, lx_prev = 0.0, t_prev = 0.0;
  for (std::size_t j = 1; j < times.size(); ++j) {
    const double dt = times[j] - t_prev;
    const double dl = Lx[j] - lx_prev;
    const double dy = y[j] - ly_prev;
    lin += dy * dl / dt;
    quad += dl * dl / dt;
    t_prev = times[j];
    lx_prev = Lx[j];
    ly_prev = y[j];
  }
  return lin - 0.5 * quad;
}

// ---------------------------------------------------------------------------
// Gaussian-dominated noise: law of eps~ has density f against the Gaussian law.

struct TrivialModifier {};

/// K = { z : |z_i| <= bound for i in indices }, f = 1_K / mu(K).
struct BoxRestriction {
  std::vector<std::size_t> indices;
  double bound = 1.0;
};

/// Brownian noise with drift a(x) = 2x / (1 + x^2) on [0, horizon].
struct GirsanovDrift {
  double horizon = 1.0;
};

/// Arbitrary log f on coefficient vectors. Must return a finite value or -inf.
struct CustomModifier {
  std::function<double(std::span<const double>)> log_f;
};

using DominatedModifier = std::variant<TrivialModifier, BoxRestriction, GirsanovDrift, CustomModifier>;

/// log of the Gaussian mass of the box.
inline double box_log_mass(const GaussianNoise& noise, const BoxRestriction& box) {
  if (!(box.bound > 0.0)) throw ModelError("box restriction bound must be > 0");
  double s = 0.0;
  for (std::size_t i : box.indices) {
    if (i >= noise.dim()) throw ModelError("box restriction index out of range");
    s += std::log(std::erf(box.bound / std::sqrt(2.0 * noise.eigenvalues[i])));
  }
  return s;
}

inline bool in_box(const BoxRestriction& box, std::span<const double> z) {
  for (std::size_t i : box.indices) {
    if (std::abs(z[i]) > box.bound) return false;
  }
  return true;
}

/// log f(y - Lx) + log_rho_gaussian. -inf marks an excluded noise pattern.
inline double log_rho_dominated(const GaussianNoise& noise, const DominatedModifier& mod, std::span<const double> Lx,
                                std::span<const double> y) {
  const double base = log_rho_gaussian(noise, Lx, y);
  std::vector<double> resid(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - Lx[i];
  double log_f = 0.0;
  if (std::holds_alternative<TrivialModifier>(mod)) {
    log_f = 0.0;
  } else if (const auto* box = std::get_if<BoxRestriction>(&mod)) {
    log_f = in_box(*box, resid) ? -box_log_mass(noise, *box) : kNegInf;
  } else if (const auto* custom = std::get_if<CustomModifier>(&mod)) {
    log_f = custom->log_f(resid);
    if (std::isnan(log_f) || log_f == std::numeric_limits<double>::infinity())
      throw NumericError("log_rho_dominated: custom modifier returned a non-finite value");
  } else {
    throw ModelError("log_rho_dominated: the Girsanov modifier acts on paths, not coefficients");
  }
  return log_f == kNegInf ? kNegInf : log_f + base;
}

inline double log_rho_dominated(const GaussianNoise& noise, const DominatedModifier& mod, const CoeffVector& Lx,
                                const CoeffVector& y) {
  detail::check_basis(noise.basis_id, Lx, y, "log_rho_dominated");
  return log_rho_dominated(noise, mod, Lx.view(), y.view());
}

inline double girsanov_drift(double x) { return 2.0 * x / (1.0 + x * x); }

/// Continuous version of the Girsanov log density for drift 2x/(1+x^2):
/// ln(1 + y_T^2) - int (1 - y^2)/(1 + y^2)^2 ds - 1/2 int (2y/(1 + y^2))^2 ds, trapezoid rule.
inline double girsanov_log_modifier(std::span<const double> times, std::span<const double> values, double horizon) {
  if (times.size() < 2 || times.size() != values.size() || std::abs(times.front()) > 1e-12 ||
      std::abs(times.back() - horizon) > 1e-9 * std::max(1.0, horizon))
    throw DomainError("girsanov_log_modifier: grid must span [0, T]");
  auto integrand = [](double y) {
    const double q = 1.0 + y * y;
    const double a = 2.0 * y / q;
    return (1.0 - y * y) / (q * q) + 0.5 * a * a;
  };
  double integral = 0.0;
  for (std::size_t j = 0; j + 1 < times.size(); ++j)
    integral += 0.5 * (times[j + 1] - times[j]) * (integrand(values[j]) + integrand(values[j + 1]));
  return std::log1p(values.back() * values.back()) - integral;
}

inline double girsanov_log_modifier(const PathGrid& path, double horizon) {
  return girsanov_log_modifier(path.times, path.values, horizon);
}

/// Path form of the dominated model: Brownian base with the Girsanov modifier.
inline double log_rho_dominated(const DominatedModifier& mod, const PathGrid& Lx, const PathGrid& y) {
  if (Lx.times != y.times) throw GridError("log_rho_dominated: grids not aligned");
  require_finite(Lx.values, "log_rho_dominated");
  const double base = log_rho_brownian(y.times, Lx.values, y.values);
  if (std::holds_alternative<TrivialModifier>(mod)) return base;
  const auto* g = std::get_if<GirsanovDrift>(&mod);
  if (!g) throw ModelError("log_rho_dominated: only the Girsanov modifier acts on paths");
  std::vector<double> resid(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) resid[j] = y.values[j] - Lx.values[j];
  return girsanov_log_modifier(y.times, resid, g->horizon) + base;
}

// ---------------------------------------------------------------------------
// Spherically invariant noise eps = gamma Z.

struct SphericalNoise {
  GaussianNoise base;
  std::size_t n_estimator_terms;
  std::string gamma_law_label;

  SphericalNoise(GaussianNoise z, std::size_t n_terms, std::string label = "unspecified")
      : base(std::move(z)), n_estimator_terms(n_terms), gamma_law_label(std::move(label)) {
    if (n_estimator_terms < 1 || n_estimator_terms > base.dim())
      throw ModelError("SphericalNoise: estimator terms must lie in [1, dim]");
  }
};

struct GammaEstimate {
  double gamma = 0.0;
  double std_error = 0.0;  ///< delta-method standard error from the n summands
};

inline constexpr double kDegenerateScale = 1e-12;

/// gamma_hat = ((1/n) sum_{i<=n} (y_i / sqrt(lambda_i))^2)^(1/2).
inline GammaEstimate estimate_gamma(std::span<const double> y, const SphericalNoise& noise) {
  const std::size_t n = noise.n_estimator_terms;
  if (y.size() < n) throw BasisError("estimate_gamma: observation shorter than estimator terms");
  require_finite(y.first(n), "estimate_gamma");
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = y[i] * y[i] / noise.base.eigenvalues[i];
  const double mean = pairwise_sum(sq) / static_cast<double>(n);
  GammaEstimate est;
  est.gamma = std::sqrt(mean);
  if (n > 1 && est.gamma > 0.0) {
    double ss = 0.0;
    for (double s : sq) ss += (s - mean) * (s - mean);
    const double se_mean = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    est.std_error = se_mean / (2.0 * est.gamma);
  }
  return est;
}

inline GammaEstimate estimate_gamma(const CoeffVector& y, const SphericalNoise& noise) {
  if (y.basis_id != noise.base.basis_id) throw BasisError("estimate_gamma: basis mismatch");
  return estimate_gamma(y.view(), noise);
}

/// gamma^-2 <y, C^-1 Lx> - (2 gamma^2)^-1 ||Lx||_H^2. The law of gamma plays no role.
inline double log_rho_spherical(const SphericalNoise& noise, std::span<const double> Lx, std::span<const double> y,
                                double gamma_hat) {
  if (!std::isfinite(gamma_hat) || gamma_hat < kDegenerateScale)
    throw DegenerateScaleError("log_rho_spherical: scale estimate vanishes for this observation");
  detail::check_pair(Lx, y, noise.base.dim(), "log_rho_spherical");
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < Lx.size(); ++i) {
    const double s = Lx[i] / noise.base.eigenvalues[i];
    lin += y[i] * s;
    quad += Lx[i] * s;
  }
  const double g2 = gamma_hat * gamma_hat;
  return lin / g2 - quad / (2.0 * g2);
}

inline double log_rho_spherical(const SphericalNoise& noise, const CoeffVector& Lx, const CoeffVector& y,
                                double gamma_hat) {
  detail::check_basis(noise.base.basis_id, Lx, y, "log_rho_spherical");
  return log_rho_spherical(noise, Lx.view(), y.view(), gamma_hat);
}

// ---------------------------------------------------------------------------
// Decomposable noise eps = sum_i eps_i f_i with independent coordinates.

struct LaplaceDensity {
  double b;
};
struct GaussianDensity {
  double sigma;
};
struct CauchyDensity {
  double scale;
};

/// Piecewise-linear density through (x_j, exp(log_density_j)); zero outside [x_0, x_last].
struct TabulatedDensity {
  std::vector<double> x;
  std::vector<double> log_density;

  TabulatedDensity(std::vector<double> xs, std::vector<double> logd) : x(std::move(xs)), log_density(std::move(logd)) {
    if (x.size() < 2 || x.size() != log_density.size()) throw ModelError("TabulatedDensity: need >= 2 matching nodes");
    double mass = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
      if (!(x[j + 1] > x[j])) throw ModelError("TabulatedDensity: nodes must be strictly increasing");
      mass += 0.5 * (x[j + 1] - x[j]) * (std::exp(log_density[j]) + std::exp(log_density[j + 1]));
    }
    if (std::abs(mass - 1.0) > 1e-6) throw ModelError("TabulatedDensity: density does not integrate to 1");
  }

  double log_pdf(double v) const {
    if (v < x.front() || v > x.back()) return kNegInf;
    auto it = std::upper_bound(x.begin(), x.end(), v);
    std::size_t j = (it == x.end()) ? x.size() - 2 : static_cast<std::size_t>(it - x.begin()) - 1;
    const double s = (v - x[j]) / (x[j + 1] - x[j]);
    const double d = (1.0 - s) * std::exp(log_density[j]) + s * std::exp(log_density[j + 1]);
    return d > 0.0 ? std::log(d) : kNegInf;
  }

  double sample(Rng& rng) const {
    const double u = uniform_open(rng);
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
      const double d0 = std::exp(log_density[j]), d1 = std::exp(log_density[j + 1]);
      const double h = x[j + 1] - x[j];
      const double cell = 0.5 * h * (d0 + d1);
      if (u <= acc + cell || j + 2 == x.size()) {
        // Invert the quadratic CDF of the linear piece.
        const double r = std::max(0.0, u - acc);
        const double slope = (d1 - d0) / h;
        if (std::abs(slope) < 1e-14) return x[j] + (d0 > 0 ? r / d0 : 0.0);
        const double disc = std::max(0.0, d0 * d0 + 2.0 * slope * r);
        return std::clamp(x[j] + (std::sqrt(disc) - d0) / slope, x[j], x[j + 1]);
      }
      acc += cell;
    }
    return x.back();
  }
};

using CoordinateDensity = std::variant<LaplaceDensity, GaussianDensity, CauchyDensity, TabulatedDensity>;

inline double log_pdf(const CoordinateDensity& d, double v) {
  constexpr double log_2pi = 1.8378770664093454836;
  return std::visit(
      [v](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LaplaceDensity>) {
          return -std::abs(v) / c.b - std::log(2.0 * c.b);
        } else if constexpr (std::is_same_v<T, GaussianDensity>) {
          return -0.5 * (v / c.sigma) * (v / c.sigma) - std::log(c.sigma) - 0.5 * log_2pi;
        } else if constexpr (std::is_same_v<T, CauchyDensity>) {
          return -std::log(std::numbers::pi * c.scale * (1.0 + (v / c.scale) * (v / c.scale)));
        } else {
          return c.log_pdf(v);
        }
      },
      d);
}

inline double sample_coordinate(const CoordinateDensity& d, Rng& rng) {
  return std::visit(
      [&rng](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, LaplaceDensity>) {
          const double u = uniform_open(rng) - 0.5;
          return (u < 0 ? 1.0 : -1.0) * c.b * std::log(1.0 - 2.0 * std::abs(u));
        } else if constexpr (std::is_same_v<T, GaussianDensity>) {
          return c.sigma * standard_normal(rng);
        } else if constexpr (std::is_same_v<T, CauchyDensity>) {
          return c.scale * std::tan(std::numbers::pi * (uniform_open(rng) - 0.5));
        } else {
          return c.sample(rng);
        }
      },
      d);
}

struct DecomposableNoise {
  std::string basis_id;
  std::vector<CoordinateDensity> coordinates;

  DecomposableNoise(std::string basis, std::vector<CoordinateDensity> coords)
      : basis_id(std::move(basis)), coordinates(std::move(coords)) {
    if (coordinates.empty()) throw ModelError("DecomposableNoise: no coordinates");
    for (const auto& c : coordinates) {
      const bool ok = std::visit(
          [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, LaplaceDensity>) return d.b > 0.0 && std::isfinite(d.b);
            else if constexpr (std::is_same_v<T, GaussianDensity>) return d.sigma > 0.0 && std::isfinite(d.sigma);
            else if constexpr (std::is_same_v<T, CauchyDensity>) return d.scale > 0.0 && std::isfinite(d.scale);
            else return true;
          },
          c);
      if (!ok) throw ModelError("DecomposableNoise: coordinate scale must be finite and > 0");
    }
  }

  static DecomposableNoise iid(std::string basis, std::size_t dim, CoordinateDensity d) {
    return DecomposableNoise(std::move(basis), std::vector<CoordinateDensity>(dim, d));
  }

  std::size_t dim() const noexcept { return coordinates.size(); }
};

/// sum over coordinates with (Lx)_k != 0 of log rho_k(y_k - (Lx)_k) - log rho_k(y_k).
inline double log_rho_decomposable(const DecomposableNoise& noise, std::span<const double> Lx,
                                   std::span<const double> y) {
  detail::check_pair(Lx, y, noise.dim(), "log_rho_decomposable");
  double s = 0.0;
  bool excluded = false;
  for (std::size_t k = 0; k < Lx.size(); ++k) {
    if (Lx[k] == 0.0) continue;
    const double den = log_pdf(noise.coordinates[k], y[k]);
    if (den == kNegInf) throw NumericError("log_rho_decomposable: observation has zero density in coordinate " + std::to_string(k));
    const double num = log_pdf(noise.coordinates[k], y[k] - Lx[k]);
    if (num == kNegInf) {
      excluded = true;
      continue;
    }
    s += num - den;
  }
  return excluded ? kNegInf : s;
}

inline double log_rho_decomposable(const DecomposableNoise& noise, const CoeffVector& Lx, const CoeffVector& y) {
  detail::check_basis(noise.basis_id, Lx, y, "log_rho_decomposable");
  return log_rho_decomposable(noise, Lx.view(), y.view());
}

/// Laplace(b) noise on Fourier coefficients. Real trig slots are treated as the independent coordinates.
struct LaplaceFourierNoise {
  std::string basis_id;
  std::size_t dim;
  double b;

  LaplaceFourierNoise(std::string basis, std::size_t n, double scale) : basis_id(std::move(basis)), dim(n), b(scale) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ModelError("LaplaceFourierNoise: b must be finite and > 0");
    if (dim == 0) throw ModelError("LaplaceFourierNoise: empty basis");
  }

  DecomposableNoise as_decomposable() const { return DecomposableNoise::iid(basis_id, dim, LaplaceDensity{b}); }
};

/// Per-coordinate terms b^-1 (|y_k| - |y_k - Lx_k|); each bounded by b^-1 |Lx_k|.
inline std::vector<double> laplace_fourier_terms(double b, std::span<const double> Lx_hat,
                                                 std::span<const double> y_hat) {
  if (!(b > 0.0)) throw ModelError("laplace_fourier: b must be > 0");
  detail::check_pair(Lx_hat, y_hat, y_hat.size(), "log_rho_laplace_fourier");
  std::vector<double> t(y_hat.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double bound = std::abs(Lx_hat[k]) / b;
    t[k] = std::clamp((std::abs(y_hat[k]) - std::abs(y_hat[k] - Lx_hat[k])) / b, -bound, bound);
  }
  return t;
}

inline double log_rho_laplace_fourier(double b, std::span<const double> Lx_hat, std::span<const double> y_hat) {
  if (!(b > 0.0)) throw ModelError("laplace_fourier: b must be > 0");
  detail::check_pair(Lx_hat, y_hat, y_hat.size(), "log_rho_laplace_fourier");
  double s = 0.0;
  for (double v : laplace_fourier_terms(b, Lx_hat, y_hat)) s += v;
  return s;
}

inline double log_rho_laplace_fourier(double b, const CoeffVector& Lx_hat, const CoeffVector& y_hat) {
  if (Lx_hat.basis_id != y_hat.basis_id) throw BasisError("log_rho_laplace_fourier: basis mismatch");
  return log_rho_laplace_fourier(b, Lx_hat.view(), y_hat.view());
}

/// Partial characteristic-function product prod_k (1 + b^2 phi_k^2)^-1 over the given coefficients.
inline double char_fn_decomposable(double b, std::span<const double> phi_hat) {
  std::vector<double> logs(phi_hat.size());
  for (std::size_t k = 0; k < phi_hat.size(); ++k) logs[k] = std::log1p(b * b * phi_hat[k] * phi_hat[k]);
  return std::exp(-pairwise_sum(logs));
}

/// Same product for a decomposable noise whose coordinates are all Laplace (scales may differ).
inline double char_fn_decomposable(const DecomposableNoise& noise, std::span<const double> phi_hat) {
  if (phi_hat.size() != noise.dim()) throw BasisError("char_fn_decomposable: dimension mismatch");
  std::vector<double> logs(phi_hat.size());
  for (std::size_t k = 0; k < phi_hat.size(); ++k) {
    const auto* lap = std::get_if<LaplaceDensity>(&noise.coordinates[k]);
    if (!lap) throw ModelError("char_fn_decomposable: every coordinate must be Laplace");
    logs[k] = std::log1p(lap->b * lap->b * phi_hat[k] * phi_hat[k]);
  }
  return std::exp(-pairwise_sum(logs));
}

// ---------------------------------------------------------------------------
// Subordinated Brownian noise B_{alpha_t}.

/// alpha_t = int_0^t (floor + G_s) ds with G piecewise constant, Gamma(shape, rate) per grid cell.
struct GammaIntegralTimeChange {
  double shape = 2.0;
  double rate = 2.0;
  double floor = 0.1;
};

struct SubordinatedNoise {
  std::vector<double> times;
  GammaIntegralTimeChange alpha_model;

  SubordinatedNoise(std::vector<double> t, GammaIntegralTimeChange m) : times(std::move(t)), alpha_model(m) {
    if (times.size() < 2 || std::abs(times.front()) > 0.0) throw GridError("SubordinatedNoise: grid must start at 0");
    for (std::size_t j = 0; j + 1 < times.size(); ++j)
      if (!(times[j + 1] > times[j])) throw GridError("SubordinatedNoise: times must be strictly increasing");
    if (!(m.floor > 0.0) || !(m.shape > 0.0) || !(m.rate > 0.0))
      throw ModelError("SubordinatedNoise: shape, rate and floor must be > 0");
  }
};

/// Cumulative sum of squared increments, starting at 0.
inline PathGrid quadratic_variation(const PathGrid& path) {
  if (path.size() < 2) throw GridError("quadratic_variation: need >= 2 grid points");
  std::vector<double> qv(path.size(), 0.0);
  for (std::size_t j = 1; j < path.size(); ++j) {
    const double d = path.values[j] - path.values[j - 1];
    qv[j] = qv[j - 1] + d * d;
  }
  return PathGrid(path.times, std::move(qv));
}

/// Prepared Cameron-Martin functional for Brownian motion run with clock alpha_hat.
/// Covariance K_ij = min(alpha_i, alpha_j) on the grid points after t_0, Cholesky-factored once.
class SubordinatedLikelihood {
 public:
  explicit SubordinatedLikelihood(const PathGrid& alpha_hat) : times_(alpha_hat.times) {
    const std::size_t m = alpha_hat.size() - 1;
    if (m == 0) throw DegenerateQVError("subordinated: no interior grid points");
    double prev = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      const double a = alpha_hat.values[j];
      if (!(a > prev)) throw DegenerateQVError("subordinated: time change must be strictly increasing and positive");
      prev = a;
    }
    Eigen::MatrixXd K(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) K(i, j) = std::min(alpha_hat.values[i + 1], alpha_hat.values[j + 1]);
    llt_.compute(K);
    if (llt_.info() != Eigen::Success) throw NumericError("subordinated: covariance factorization failed");
  }

  const std::vector<double>& times() const noexcept { return times_; }

  /// y.w - 1/2 Lx.w with K w = Lx, both paths on the same grid as alpha_hat.
  double operator()(std::span<const double> Lx, std::span<const double> y) const {
    const std::size_t m = times_.size() - 1;
    if (Lx.size() != m + 1 || y.size() != m + 1) throw GridError("subordinated: grids not aligned");
    Eigen::Map<const Eigen::VectorXd> lx(Lx.data() + 1, static_cast<Eigen::Index>(m));
    Eigen::Map<const Eigen::VectorXd> yy(y.data() + 1, static_cast<Eigen::Index>(m));
    const Eigen::VectorXd w = llt_.solve(lx);
    const double v = yy.dot(w) - 0.5 * lx.dot(w);
    if (!std::isfinite(v)) throw NumericError("subordinated: non-finite log density");
    return v;
  }

 private:
  std::vector<double> times_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double log_rho_subordinated(const PathGrid& alpha_hat, const PathGrid& Lx_path, const PathGrid& y_path) {
  if (Lx_path.times != alpha_hat.times || y_path.times != alpha_hat.times)
    throw GridError("log_rho_subordinated: grids not aligned");
  return SubordinatedLikelihood(alpha_hat)(Lx_path.values, y_path.values);
}

// ---------------------------------------------------------------------------
// Finite-dimensional noise with a Lebesgue density.

struct StdNormalDensity {
  std::size_t dim;
};
struct DiagGaussianDensity {
  std::vector<double> sigmas;
};
struct UniformBoxDensity {
  std::vector<double> half_widths;
};
struct CustomDensity {
  std::size_t dim;
  std::function<double(std::span<const double>)> log_pdf;
  std::function<std::vector<double>(Rng&)> sampler;
};

struct FiniteDimNoise {
  std::variant<StdNormalDensity, DiagGaussianDensity, UniformBoxDensity, CustomDensity> density;

  std::size_t dim() const {
    return std::visit(
        [](const auto& d) -> std::size_t {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, StdNormalDensity> || std::is_same_v<T, CustomDensity>) return d.dim;
          else if constexpr (std::is_same_v<T, DiagGaussianDensity>) return d.sigmas.size();
          else return d.half_widths.size();
        },
        density);
  }

  double log_density(std::span<const double> z) const {
    constexpr double log_2pi = 1.8378770664093454836;
    if (z.size() != dim()) throw BasisError("FiniteDimNoise: dimension mismatch");
    return std::visit(
        [z](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, StdNormalDensity>) {
            double s = 0.0;
            for (double v : z) s += v * v;
            return -0.5 * s - 0.5 * static_cast<double>(z.size()) * log_2pi;
          } else if constexpr (std::is_same_v<T, DiagGaussianDensity>) {
            double s = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i)
              s += -0.5 * (z[i] / d.sigmas[i]) * (z[i] / d.sigmas[i]) - std::log(d.sigmas[i]) - 0.5 * log_2pi;
            return s;
          } else if constexpr (std::is_same_v<T, UniformBoxDensity>) {
            double s = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
              if (std::abs(z[i]) > d.half_widths[i]) return kNegInf;
              s -= std::log(2.0 * d.half_widths[i]);
            }
            return s;
          } else {
            return d.log_pdf(z);
          }
        },
        density);
  }
};

/// log D(y - Lx).
inline double log_rho_finite_dim(const FiniteDimNoise& noise, std::span<const double> Lx, std::span<const double> y) {
  detail::check_pair(Lx, y, noise.dim(), "log_rho_finite_dim");
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = y[i] - Lx[i];
  const double v = noise.log_density(z);
  if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
    throw NumericError("log_rho_finite_dim: density returned a non-finite value");
  return v;
}

// ---------------------------------------------------------------------------
// Samplers. Each draw uses its own stream derived from the seed.

inline CoeffVector sample_noise(const GaussianNoise& noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  std::vector<double> e(noise.dim());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::sqrt(noise.eigenvalues[i]) * standard_normal(rng);
  return CoeffVector(noise.basis_id, std::move(e));
}

/// Rejection sampler for the box-restricted Gaussian; other coefficient modifiers are not samplable.
inline CoeffVector sample_noise(const GaussianNoise& noise, const BoxRestriction& box, std::uint64_t seed) {
  if (box_log_mass(noise, box) < std::log(1e-6)) throw ModelError("box restriction mass too small to sample");
  for (std::uint64_t attempt = 0;; ++attempt) {
    CoeffVector e = sample_noise(noise, derive_seed(seed, attempt));
    if (in_box(box, e.coeffs)) return e;
  }
}

inline CoeffVector sample_noise(const SphericalNoise& noise, double gamma, std::uint64_t seed) {
  CoeffVector z = sample_noise(noise.base, seed);
  for (double& v : z.coeffs) v *= gamma;
  return z;
}

inline CoeffVector sample_noise(const DecomposableNoise& noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  std::vector<double> e(noise.dim());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = sample_coordinate(noise.coordinates[i], rng);
  return CoeffVector(noise.basis_id, std::move(e));
}

inline CoeffVector sample_noise(const LaplaceFourierNoise& noise, std::uint64_t seed) {
  return sample_noise(noise.as_decomposable(), seed);
}

/// Standard Brownian motion on `times` (times[0] = 0).
inline PathGrid sample_brownian(std::span<const double> times, Rng& rng) {
  std::vector<double> v(times.size(), 0.0);
  for (std::size_t j = 1; j < times.size(); ++j)
    v[j] = v[j - 1] + std::sqrt(times[j] - times[j - 1]) * standard_normal(rng);
  return PathGrid(std::vector<double>(times.begin(), times.end()), std::move(v));
}

/// Euler-Maruyama path of dX = a(X) dt + dB, X_0 = 0, a(x) = 2x / (1 + x^2).
inline PathGrid sample_noise(const GirsanovDrift& drift, std::span<const double> times, std::uint64_t seed) {
  if (std::abs(times.back() - drift.horizon) > 1e-9 * std::max(1.0, drift.horizon))
    throw DomainError("girsanov sampler: grid must end at the horizon");
  Rng rng = make_rng(seed, 0);
  std::vector<double> v(times.size(), 0.0);
  for (std::size_t j = 1; j < times.size(); ++j) {
    const double dt = times[j] - times[j - 1];
    v[j] = v[j - 1] + girsanov_drift(v[j - 1]) * dt + std::sqrt(dt) * standard_normal(rng);
  }
  return PathGrid(std::vector<double>(times.begin(), times.end()), std::move(v));
}

inline PathGrid sample_time_change(const SubordinatedNoise& noise, Rng& rng) {
  std::gamma_distribution<double> g(noise.alpha_model.shape, 1.0 / noise.alpha_model.rate);
  std::vector<double> a(noise.times.size(), 0.0);
  for (std::size_t j = 1; j < a.size(); ++j)
    a[j] = a[j - 1] + (noise.times[j] - noise.times[j - 1]) * (noise.alpha_model.floor + g(rng));
  return PathGrid(noise.times, std::move(a));
}

struct SubordinatedDraw {
  PathGrid alpha;
  PathGrid noise;
};

/// One draw of (alpha, B_alpha) on the model grid.
inline SubordinatedDraw sample_subordinated(const SubordinatedNoise& noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  PathGrid alpha = sample_time_change(noise, rng);
  std::vector<double> v(alpha.size(), 0.0);
  for (std::size_t j = 1; j < v.size(); ++j)
    v[j] = v[j - 1] + std::sqrt(alpha.values[j] - alpha.values[j - 1]) * standard_normal(rng);
  return {alpha, PathGrid(noise.times, std::move(v))};
}

inline PathGrid sample_noise(const SubordinatedNoise& noise, std::uint64_t seed) {
  return sample_subordinated(noise, seed).noise;
}

inline std::vector<double> sample_noise(const FiniteDimNoise& noise, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  return std::visit(
      [&](const auto& d) -> std::vector<double> {
        using T = std::decay_t<decltype(d)>;
        std::vector<double> z(noise.dim());
        if constexpr (std::is_same_v<T, StdNormalDensity>) {
          for (double& v : z) v = standard_normal(rng);
        } else if constexpr (std::is_same_v<T, DiagGaussianDensity>) {
          for (std::size_t i = 0; i < z.size(); ++i) z[i] = d.sigmas[i] * standard_normal(rng);
        } else if constexpr (std::is_same_v<T, UniformBoxDensity>) {
          for (std::size_t i = 0; i < z.size(); ++i) z[i] = d.half_widths[i] * (2.0 * uniform_open(rng) - 1.0);
        } else {
          if (!d.sampler) throw ModelError("custom finite-dimensional density has no sampler");
          z = d.sampler(rng);
        }
        return z;
      },
      noise.density);
}

}  // namespace fsbayes
