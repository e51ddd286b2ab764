#pragma once

// Coefficient-sequence representation of function spaces: bases, coefficient
// vectors, linear forward maps and the Cameron-Martin geometry of a Gaussian
// measure that is diagonal in a basis.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fsbayes/errors.hpp"
#include "fsbayes/numeric.hpp"

namespace fsbayes {

/// A truncated orthonormal system. `embedding_weights` define the ambient norm
/// ||x||^2 = sum_i w_i x_i^2, e.g. w_k = (1 + k^2)^-1 for H^-1 of the circle.
class Basis {
 public:
  Basis(std::string id, std::vector<double> embedding_weights, std::vector<std::string> labels)
      : id_(std::move(id)), weights_(std::move(embedding_weights)), labels_(std::move(labels)) {
    if (weights_.empty()) throw BasisError("basis '" + id_ + "': dim must be >= 1");
    if (labels_.size() != weights_.size()) throw BasisError("basis '" + id_ + "': label count != dim");
    for (double w : weights_) {
      if (!std::isfinite(w) || w <= 0.0) throw BasisError("basis '" + id_ + "': embedding weights must be finite and > 0");
    }
    std::unordered_set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) throw BasisError("basis '" + id_ + "': labels must be unique");
  }

  static Basis identity(std::string id, std::size_t dim) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < dim; ++i) labels.push_back(std::to_string(i));
    return Basis(std::move(id), std::vector<double>(dim, 1.0), std::move(labels));
  }

  /// Real trigonometric basis with 2K+1 coordinates ordered 0, +1, -1, +2, -2, ...
  /// Label +k holds the cosine part, label -k the sine part. Weights (1+k^2)^s.
  static Basis trig(std::string id, std::size_t max_freq, double sobolev_exponent) {
    std::vector<double> w;
    std::vector<std::string> labels;
    for (std::size_t j = 0; j < 2 * max_freq + 1; ++j) {
      const long k = trig_frequency(j);
      w.push_back(std::pow(1.0 + static_cast<double>(k * k), sobolev_exponent));
      labels.push_back(std::to_string(k));
    }
    return Basis(std::move(id), std::move(w), std::move(labels));
  }

  /// Point-value coordinates on a time grid, normed by trapezoid weights (L2 of the grid).
  static Basis grid(std::string id, std::span<const double> times) {
    if (times.size() < 2) throw BasisError("grid basis needs >= 2 times");
    std::vector<double> w(times.size(), 0.0);
    std::vector<std::string> labels;
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
      const double h = times[j + 1] - times[j];
      if (!(h > 0.0)) throw BasisError("grid basis: times must be strictly increasing");
      w[j] += 0.5 * h;
      w[j + 1] += 0.5 * h;
    }
    for (std::size_t j = 0; j < times.size(); ++j) labels.push_back("t" + std::to_string(j));
    return Basis(std::move(id), std::move(w), std::move(labels));
  }

  /// Signed frequency of real-trig coordinate j: 0, +1, -1, +2, -2, ...
  static long trig_frequency(std::size_t j) {
    if (j == 0) return 0;
    const long k = static_cast<long>((j + 1) / 2);
    return (j % 2 == 1) ? k : -k;
  }

  const std::string& id() const noexcept { return id_; }
  std::size_t dim() const noexcept { return weights_.size(); }
  const std::vector<double>& embedding_weights() const noexcept { return weights_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  std::string id_;
  std::vector<double> weights_;
  std::vector<std::string> labels_;
};

/// A function given by finitely many coefficients in a named basis.
struct CoeffVector {
  std::string basis_id;
  std::vector<double> coeffs;

  CoeffVector() = default;
  CoeffVector(std::string basis, std::vector<double> c) : basis_id(std::move(basis)), coeffs(std::move(c)) {
    require_finite(coeffs, "CoeffVector");
  }

  std::size_t size() const noexcept { return coeffs.size(); }
  std::span<const double> view() const noexcept { return coeffs; }
  double operator[](std::size_t i) const { return coeffs[i]; }

  friend bool operator==(const CoeffVector&, const CoeffVector&) = default;
};

/// Sampled path on an explicit, possibly nonuniform, time grid.
struct PathGrid {
  std::vector<double> times;
  std::vector<double> values;

  PathGrid() = default;
  PathGrid(std::vector<double> t, std::vector<double> v) : times(std::move(t)), values(std::move(v)) {
    if (times.size() != values.size()) throw GridError("PathGrid: times and values differ in length");
    if (times.empty()) throw GridError("PathGrid: empty grid");
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
      if (!(times[j + 1] > times[j])) throw GridError("PathGrid: times must be strictly increasing");
    }
    require_finite(times, "PathGrid times");
    require_finite(values, "PathGrid values");
  }

  std::size_t size() const noexcept { return times.size(); }
  double horizon() const { return times.back(); }

  friend bool operator==(const PathGrid&, const PathGrid&) = default;
};

/// Uniform grid 0 = t_0 < ... < t_steps = horizon.
inline std::vector<double> uniform_times(double horizon, std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j) t[j] = horizon * static_cast<double>(j) / static_cast<double>(steps);
  t.back() = horizon;
  return t;
}

/// Linear forward operator in coefficient form, either a diagonal multiplier or a dense matrix.
class ForwardMap {
 public:
  enum class Kind { diagonal, dense };

  static ForwardMap diagonal(std::string domain_basis, std::string range_basis, std::vector<double> multipliers) {
    require_finite(multipliers, "ForwardMap entries");
    if (multipliers.empty()) throw BasisError("ForwardMap: empty diagonal");
    ForwardMap L;
    L.kind_ = Kind::diagonal;
    L.domain_ = std::move(domain_basis);
    L.range_ = std::move(range_basis);
    L.rows_ = L.cols_ = multipliers.size();
    L.entries_ = std::move(multipliers);
    return L;
  }

  /// `row_major` holds range_dim x domain_dim entries.
  static ForwardMap dense(std::string domain_basis, std::string range_basis, std::size_t range_dim,
                          std::size_t domain_dim, std::vector<double> row_major) {
    require_finite(row_major, "ForwardMap entries");
    if (row_major.size() != range_dim * domain_dim || range_dim == 0 || domain_dim == 0)
      throw BasisError("ForwardMap: dense entry count does not match dimensions");
    ForwardMap L;
    L.kind_ = Kind::dense;
    L.domain_ = std::move(domain_basis);
    L.range_ = std::move(range_basis);
    L.rows_ = range_dim;
    L.cols_ = domain_dim;
    L.entries_ = std::move(row_major);
    return L;
  }

  static ForwardMap identity(const std::string& basis, std::size_t dim) {
    return diagonal(basis, basis, std::vector<double>(dim, 1.0));
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& domain_basis() const noexcept { return domain_; }
  const std::string& range_basis() const noexcept { return range_; }
  std::size_t domain_dim() const noexcept { return cols_; }
  std::size_t range_dim() const noexcept { return rows_; }
  const std::vector<double>& entries() const noexcept { return entries_; }

  /// out = L x, for raw coefficient spans of matching lengths.
  void apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != cols_ || out.size() != rows_) throw BasisError("ForwardMap: dimension mismatch");
    if (kind_ == Kind::diagonal) {
      for (std::size_t i = 0; i < rows_; ++i) out[i] = entries_[i] * x[i];
      return;
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* a = entries_.data() + r * cols_;
      double s = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) s += a[c] * x[c];
      out[r] = s;
    }
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> out(rows_);
    apply(x, out);
    return out;
  }

  /// Spectral norm (largest singular value) in coefficient coordinates.
  double operator_norm() const {
    if (kind_ == Kind::diagonal) {
      double m = 0.0;
      for (double c : entries_) m = std::max(m, std::abs(c));
      return m;
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(entries_.data(),
                                                                                               rows_, cols_);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()(0);
  }

 private:
  ForwardMap() = default;
  Kind kind_ = Kind::diagonal;
  std::string domain_;
  std::string range_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

inline CoeffVector apply_forward(const ForwardMap& L, const CoeffVector& x) {
  if (x.basis_id != L.domain_basis())
    throw BasisError("apply_forward: vector in '" + x.basis_id + "', map expects '" + L.domain_basis() + "'");
  return CoeffVector(L.range_basis(), L.apply(x.coeffs));
}

namespace detail {
inline void check_spectrum(std::size_t n, std::span<const double> eigenvalues) {
  if (eigenvalues.size() != n) throw BasisError("eigenvalue count does not match coefficient count");
  for (double l : eigenvalues) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ModelError("eigenvalues must be finite and > 0");
  }
}
}  // namespace detail

/// ||h||^2 in the Cameron-Martin space of a centred Gaussian with spectrum `eigenvalues`.
inline double cm_norm_sq(std::span<const double> h, std::span<const double> eigenvalues) {
  detail::check_spectrum(h.size(), eigenvalues);
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * h[i] / eigenvalues[i];
  return s;
}

inline double cm_norm_sq(const CoeffVector& h, std::span<const double> eigenvalues) {
  return cm_norm_sq(h.view(), eigenvalues);
}

/// <y, C^-1 h> in coefficients. Same accumulation order as cm_norm_sq, so y == h agrees bit-exactly.
inline double dual_pairing(std::span<const double> y, std::span<const double> h, std::span<const double> eigenvalues) {
  if (y.size() != h.size()) throw BasisError("dual_pairing: length mismatch");
  detail::check_spectrum(h.size(), eigenvalues);
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += y[i] * h[i] / eigenvalues[i];
  return s;
}

inline double dual_pairing(const CoeffVector& y, const CoeffVector& h, std::span<const double> eigenvalues) {
  if (y.basis_id != h.basis_id) throw BasisError("dual_pairing: basis mismatch");
  return dual_pairing(y.view(), h.view(), eigenvalues);
}

/// Trapezoid approximation of (2 pi)^-1 int_0^{2 pi} f(t) e^{-ikt} dt for |k| <= K, stored in the
/// real basis of Basis::trig: slot +k = Re f_k, slot -k = -Im f_k.
inline CoeffVector trig_coeffs(const PathGrid& path, std::size_t max_freq, const std::string& basis_id = "trig") {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (path.size() < 2 || std::abs(path.times.front()) > 1e-12 || std::abs(path.times.back() - two_pi) > 1e-9)
    throw DomainError("trig_coeffs: path must span [0, 2pi]");
  std::vector<double> out(2 * max_freq + 1, 0.0);
  const auto& t = path.times;
  const auto& f = path.values;
  for (std::size_t j = 0; j + 1 < t.size(); ++j) {
    const double h = 0.5 * (t[j + 1] - t[j]) / two_pi;
    out[0] += h * (f[j] + f[j + 1]);
  }
  for (std::size_t k = 1; k <= max_freq; ++k) {
    double re = 0.0, im = 0.0;
    const double kd = static_cast<double>(k);
    for (std::size_t j = 0; j + 1 < t.size(); ++j) {
      const double h = 0.5 * (t[j + 1] - t[j]) / two_pi;
      re += h * (f[j] * std::cos(kd * t[j]) + f[j + 1] * std::cos(kd * t[j + 1]));
      im += h * (f[j] * std::sin(kd * t[j]) + f[j + 1] * std::sin(kd * t[j + 1]));
    }
    out[2 * k - 1] = re;
    out[2 * k] = im;
  }
  return CoeffVector(basis_id, std::move(out));
}

/// Complex Fourier coefficient f_k recovered from the real trig slots.
inline std::complex<double> complex_fourier(const CoeffVector& c, long k) {
  if (k == 0) return {c[0], 0.0};
  const std::size_t m = static_cast<std::size_t>(k > 0 ? k : -k);
  if (2 * m >= c.size() + 1) return {0.0, 0.0};
  const double re = c[2 * m - 1];
  const double s = c[2 * m];
  return k > 0 ? std::complex<double>(re, -s) : std::complex<double>(re, s);
}

/// Evaluates sum_k f_k e^{ikt} from real trig slots.
inline double trig_synthesize(std::span<const double> c, double t) {
  double v = c[0];
  for (std::size_t k = 1; 2 * k < c.size() + 1; ++k) {
    const double kd = static_cast<double>(k);
    v += 2.0 * (c[2 * k - 1] * std::cos(kd * t) + c[2 * k] * std::sin(kd * t));
  }
  return v;
}

}  // namespace fsbayes
