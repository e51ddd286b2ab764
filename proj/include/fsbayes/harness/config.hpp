#pragma once

// Experiment configuration: a JSON document with a versioned, closed schema.
// Every object rejects keys it does not know, reporting the dotted field path.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsbayes/errors.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/likelihood.hpp"
#include "fsbayes/noise.hpp"
#include "fsbayes/numeric.hpp"
#include "fsbayes/priors.hpp"
#include "fsbayes/harness/io.hpp"

namespace fsbayes::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Read cursor over one JSON object; tracks consumed keys so leftovers can be rejected.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const noexcept { return path_; }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_->contains(key); }

  const json& raw(const std::string& key) const {
    used_.insert(key);
    if (!j_->contains(key)) throw ConfigError(field(key), "required field is missing");
    return j_->at(key);
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "expected a finite number");
    return d;
  }
  double number(const std::string& key, double def) const { return has(key) ? number(key) : (used_.insert(key), def); }

  double positive(const std::string& key) const {
    const double d = number(key);
    if (!(d > 0.0)) throw ConfigError(field(key), "must be > 0");
    return d;
  }
  double positive(const std::string& key, double def) const { return has(key) ? positive(key) : def; }

  std::uint64_t uint(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(field(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t uint(const std::string& key, std::uint64_t def) const { return has(key) ? uint(key) : def; }

  std::size_t count(const std::string& key) const {
    const auto v = uint(key);
    if (v == 0) throw ConfigError(field(key), "must be >= 1");
    return static_cast<std::size_t>(v);
  }
  std::size_t count(const std::string& key, std::size_t def) const { return has(key) ? count(key) : def; }

  bool boolean(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) const { return has(key) ? string(key) : def; }

  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<std::uint64_t> uints(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a non-empty array of integers");
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() || (!v[i].is_number_unsigned() && v[i].get<std::int64_t>() < 0)) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a non-negative integer");
      out.push_back(v[i].get<std::uint64_t>());
    }
    return out;
  }

  Node child(const std::string& key) const { return Node(raw(key), field(key)); }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
  }

 private:
  const json* j_;
  std::string path_;
  mutable std::set<std::string> used_;
};

struct GammaLaw {
  enum class Kind { fixed, uniform } kind = Kind::fixed;
  double value = 1.0, lo = 1.0, hi = 1.0;
  std::string label() const;
};

inline std::string GammaLaw::label() const {
  return kind == Kind::fixed ? "fixed(" + std::to_string(value) + ")"
                             : "uniform(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
}

struct ObservationSpec {
  enum class Kind { synthetic, file } kind = Kind::synthetic;
  bool truth_from_prior = true;
  int truth_level = 0;
  std::uint64_t truth_seed = 0;
  std::vector<double> truth_values;
  std::uint64_t noise_seed = 0;
  std::optional<double> gamma;
  std::string path;
};

struct LadderSpec {
  bool enabled = true;
  std::size_t dictionary_size = 64;
  std::uint64_t dictionary_seed = 0;
};

struct ProbeSpec {
  std::vector<double> scales{0.0, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<std::vector<double>> directions;  ///< empty: coordinate axes
  std::size_t max_axes = 4;
};

struct OutputSpec {
  std::string directory = "fsbayes-out";
  bool csv = true, json = true, dat = true;
};

struct ExperimentConfig {
  json effective;  ///< the validated document, with CLI overrides applied
  std::string name;
  std::uint64_t seed;
  Basis basis;
  std::vector<double> basis_times;  ///< grid bases only
  ForwardMap forward;
  std::optional<std::vector<double>> range_times;
  NoiseModel noise;
  std::optional<GammaLaw> gamma_law;
  PriorScheme prior;
  std::vector<int> levels;
  std::size_t particles;
  ObservationSpec observation;
  LadderSpec ladder;
  ProbeSpec probe;
  OutputSpec outputs;

  std::string hash() const;
};

namespace detail {

inline std::vector<double> spectrum(const Node& n, std::size_t dim, const std::string& what) {
  const bool a = n.has("eigenvalues"), b = n.has("decay");
  if (a == b) throw ConfigError(n.path(), what + ": give exactly one of 'eigenvalues' or 'decay'");
  if (a) {
    auto v = n.numbers("eigenvalues");
    if (v.size() != dim)
      throw ConfigError(n.field("eigenvalues"), "length " + std::to_string(v.size()) + " != dimension " + std::to_string(dim));
    return v;
  }
  const Node d = n.child("decay");
  const double p = d.number("p"), scale = d.positive("scale", 1.0);
  d.finish();
  std::vector<double> l(dim);
  for (std::size_t i = 0; i < dim; ++i) l[i] = scale * std::pow(1.0 + static_cast<double>(i), -p);
  return l;
}

/// Standard deviations from either 'sigma' or 'decay' (p > 1/2).
inline std::vector<double> sigmas(const Node& n, std::size_t dim) {
  const bool a = n.has("sigma"), b = n.has("decay");
  if (a == b) throw ConfigError(n.path(), "give exactly one of 'sigma' or 'decay'");
  if (a) {
    auto v = n.numbers("sigma");
    if (v.size() != dim) throw ConfigError(n.field("sigma"), "length must equal the basis dimension " + std::to_string(dim));
    for (double s : v)
      if (!(s >= 0.0)) throw ConfigError(n.field("sigma"), "entries must be >= 0");
    return v;
  }
  const double p = n.number("decay");
  if (!(p > 0.5)) throw ConfigError(n.field("decay"), "eigendecay exponent must exceed 1/2");
  return KLScheme::decay(dim, p).sigma;
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

struct ParsedBasis {
  Basis basis;
  std::vector<double> times;  ///< grid bases only
};

inline ParsedBasis parse_basis(const Node& n) {
  const std::string kind = n.string("kind");
  ParsedBasis out = wrap(n.path(), [&]() -> ParsedBasis {
    if (kind == "identity") return {Basis::identity(n.string("id", "R"), n.count("dim")), {}};
    if (kind == "trig") return {Basis::trig(n.string("id", "T"), n.uint("max_freq"), n.number("sobolev", 0.0)), {}};
    if (kind == "grid") {
      auto t = uniform_times(n.positive("horizon"), n.count("steps"));
      return {Basis::grid("grid", t), t};
    }
    throw ConfigError(n.field("kind"), "unknown basis kind '" + kind + "' (identity, trig, grid)");
  });
  n.finish();
  return out;
}

struct ParsedForward {
  ForwardMap map;
  std::optional<std::vector<double>> range_times;
};

inline ParsedForward parse_forward(const Node& n, const ParsedBasis& pb) {
  const Basis& b = pb.basis;
  const std::string kind = n.string("kind");
  ParsedForward out = wrap(n.path(), [&]() -> ParsedForward {
    if (kind == "identity") {
      const std::string range = n.string("range_id", b.id());
      std::optional<std::vector<double>> rt;
      if (!pb.times.empty()) rt = pb.times;
      return {ForwardMap::diagonal(b.id(), range, std::vector<double>(b.dim(), 1.0)), rt};
    }
    if (kind == "diagonal") {
      const std::string range = n.string("range_id", b.id());
      const int forms = n.has("values") + n.has("decay") + n.has("trig_smoothing");
      if (forms != 1) throw ConfigError(n.path(), "diagonal: give exactly one of 'values', 'decay', 'trig_smoothing'");
      std::vector<double> c(b.dim());
      if (n.has("values")) {
        c = n.numbers("values");
        if (c.size() != b.dim()) throw ConfigError(n.field("values"), "length must equal the basis dimension");
      } else if (n.has("decay")) {
        const Node d = n.child("decay");
        const double p = d.number("p"), scale = d.number("scale", 1.0);
        d.finish();
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = scale * std::pow(1.0 + static_cast<double>(i), -p);
      } else {
        const Node d = n.child("trig_smoothing");
        const double order = d.number("order"), scale = d.number("scale", 1.0);
        d.finish();
        for (std::size_t j = 0; j < c.size(); ++j) {
          const double k = static_cast<double>(Basis::trig_frequency(j));
          c[j] = scale * std::pow(1.0 + k * k, -order);
        }
      }
      std::optional<std::vector<double>> rt;
      if (!pb.times.empty() && range == b.id()) rt = pb.times;
      return {ForwardMap::diagonal(b.id(), range, c), rt};
    }
    if (kind == "dense") {
      const std::size_t rows = n.count("rows");
      return {ForwardMap::dense(b.id(), n.string("range_id", "Y"), rows, b.dim(), n.numbers("values")), std::nullopt};
    }
    if (kind == "sine_synthesis") {
      // x -> sum_k x_k sin((k - 1/2) pi t / T) on a uniform grid.
      const double T = n.positive("horizon");
      const auto t = uniform_times(T, n.count("steps"));
      std::vector<double> m(t.size() * b.dim());
      for (std::size_t r = 0; r < t.size(); ++r)
        for (std::size_t k = 0; k < b.dim(); ++k)
          m[r * b.dim() + k] = std::sin((static_cast<double>(k) + 0.5) * std::numbers::pi * t[r] / T);
      return {ForwardMap::dense(b.id(), "grid", t.size(), b.dim(), m), t};
    }
    if (kind == "trig_projection") {
      if (pb.times.empty()) throw ConfigError(n.field("kind"), "trig_projection needs a grid basis");
      const std::size_t K = n.uint("max_freq");
      const std::string range = n.string("range_id", "T");
      const std::size_t R = 2 * K + 1, D = pb.times.size();
      std::vector<double> m(R * D), unit(D, 0.0);
      for (std::size_t c = 0; c < D; ++c) {
        unit[c] = 1.0;
        const auto col = trig_coeffs(PathGrid(pb.times, unit), K, range);
        for (std::size_t r = 0; r < R; ++r) m[r * D + c] = col[r];
        unit[c] = 0.0;
      }
      return {ForwardMap::dense(b.id(), range, R, D, m), std::nullopt};
    }
    throw ConfigError(n.field("kind"),
                      "unknown forward kind '" + kind + "' (identity, diagonal, dense, sine_synthesis, trig_projection)");
  });
  n.finish();
  return out;
}

inline CoordinateDensity parse_coordinate(const Node& n) {
  const std::string kind = n.string("kind");
  CoordinateDensity d = [&]() -> CoordinateDensity {
    if (kind == "laplace") return LaplaceDensity{n.positive("b")};
    if (kind == "gaussian") return GaussianDensity{n.positive("sigma")};
    if (kind == "cauchy") return CauchyDensity{n.positive("scale")};
    throw ConfigError(n.field("kind"), "unknown coordinate density '" + kind + "' (laplace, gaussian, cauchy)");
  }();
  n.finish();
  return d;
}

inline const std::vector<double>& need_times(const Node& n, const std::optional<std::vector<double>>& rt) {
  if (!rt) throw ConfigError(n.field("kind"), "this noise observes paths; the forward map must land on a grid");
  if (rt->front() != 0.0) throw ConfigError(n.field("kind"), "path grid must start at t = 0");
  return *rt;
}

struct ParsedNoise {
  NoiseModel model;
  std::optional<GammaLaw> gamma_law;
};

inline ParsedNoise parse_noise(const Node& n, const ParsedForward& pf) {
  const std::string range = pf.map.range_basis();
  const std::size_t dim = pf.map.range_dim();
  const std::string kind = n.string("kind");
  ParsedNoise out = wrap(n.path(), [&]() -> ParsedNoise {
    if (kind == "gaussian") return {GaussianNoise(range, spectrum(n, dim, "gaussian")), std::nullopt};
    if (kind == "dominated") {
      GaussianNoise base(range, spectrum(n, dim, "dominated"));
      const Node box = n.child("box");
      BoxRestriction r;
      for (auto i : box.uints("indices")) {
        if (i >= dim) throw ConfigError(box.field("indices"), "index " + std::to_string(i) + " outside the range");
        r.indices.push_back(static_cast<std::size_t>(i));
      }
      r.bound = box.positive("bound");
      box.finish();
      return {DominatedNoise{std::move(base), r}, std::nullopt};
    }
    if (kind == "girsanov") {
      const auto& t = need_times(n, pf.range_times);
      return {GirsanovNoise{GirsanovDrift{t.back()}, t}, std::nullopt};
    }
    if (kind == "spherical") {
      GaussianNoise base(range, spectrum(n, dim, "spherical"));
      const std::size_t terms = n.count("estimator_terms", dim);
      GammaLaw law;
      const Node g = n.child("gamma_law");
      const std::string gk = g.string("kind");
      if (gk == "fixed") {
        law.kind = GammaLaw::Kind::fixed;
        law.value = g.positive("value");
      } else if (gk == "uniform") {
        law.kind = GammaLaw::Kind::uniform;
        law.lo = g.positive("lo");
        law.hi = g.positive("hi");
        if (!(law.hi > law.lo)) throw ConfigError(g.field("hi"), "must exceed lo");
      } else {
        throw ConfigError(g.field("kind"), "unknown gamma law '" + gk + "' (fixed, uniform)");
      }
      g.finish();
      return {SphericalNoise(std::move(base), terms, law.label()), law};
    }
    if (kind == "decomposable")
      return {DecomposableNoise::iid(range, dim, parse_coordinate(n.child("coordinate"))), std::nullopt};
    if (kind == "laplace_fourier") return {LaplaceFourierNoise(range, dim, n.positive("b")), std::nullopt};
    if (kind == "subordinated") {
      const auto& t = need_times(n, pf.range_times);
      const std::size_t stride = n.count("stride");
      GammaIntegralTimeChange tc;
      if (n.has("time_change")) {
        const Node c = n.child("time_change");
        tc.shape = c.positive("shape", tc.shape);
        tc.rate = c.positive("rate", tc.rate);
        tc.floor = c.positive("floor", tc.floor);
        c.finish();
      }
      const auto fine = uniform_times(t.back(), (t.size() - 1) * stride);
      return {SubordinatedModel{SubordinatedNoise(fine, tc), stride}, std::nullopt};
    }
    if (kind == "finite_dim") {
      const Node d = n.child("density");
      const std::string dk = d.string("kind");
      FiniteDimNoise f = [&]() -> FiniteDimNoise {
        if (dk == "std_normal") return {StdNormalDensity{dim}};
        if (dk == "diag_gaussian") return {DiagGaussianDensity{d.numbers("sigmas")}};
        if (dk == "uniform_box") return {UniformBoxDensity{d.numbers("half_widths")}};
        throw ConfigError(d.field("kind"), "unknown density '" + dk + "' (std_normal, diag_gaussian, uniform_box)");
      }();
      d.finish();
      if (f.dim() != dim) throw ConfigError(n.field("density"), "dimension must equal the forward range dimension");
      return {f, std::nullopt};
    }
    throw ConfigError(n.field("kind"), "unknown noise kind '" + kind +
                                           "' (gaussian, dominated, girsanov, spherical, decomposable, "
                                           "laplace_fourier, subordinated, finite_dim)");
  });
  n.finish();
  return out;
}

inline Hyperdensity parse_hyper(const Node& n) {
  const int forms = n.has("edges") + n.has("uniform") + n.has("atom");
  if (forms != 1) throw ConfigError(n.path(), "give exactly one of 'edges'+'densities', 'uniform' or 'atom'");
  Hyperdensity h = wrap(n.path(), [&]() -> Hyperdensity {
    if (n.has("atom")) return Hyperdensity::atom(n.number("atom"));
    if (n.has("uniform")) {
      const auto ab = n.numbers("uniform");
      if (ab.size() != 2) throw ConfigError(n.field("uniform"), "expected [a, b]");
      return Hyperdensity::uniform(ab[0], ab[1]);
    }
    return Hyperdensity(n.numbers("edges"), n.numbers("densities"));
  });
  n.finish();
  return h;
}

inline Marginal parse_marginal(const Node& n) {
  const std::string kind = n.string("kind");
  Marginal m = [&]() -> Marginal {
    if (kind == "uniform") return UniformMarginal{n.number("lo", 0.0), n.number("hi", 1.0)};
    if (kind == "normal") return NormalMarginal{n.number("mean", 0.0), n.positive("sd", 1.0)};
    throw ConfigError(n.field("kind"), "unknown marginal '" + kind + "' (uniform, normal)");
  }();
  n.finish();
  return m;
}

inline PriorScheme parse_prior(const Node& n, const ParsedBasis& pb) {
  const std::string kind = n.string("kind");
  const std::size_t dim = pb.basis.dim();
  auto need_grid = [&] {
    if (pb.times.empty()) throw ConfigError(n.field("kind"), "path priors need a grid basis");
  };
  PriorScheme s = wrap(n.path(), [&]() -> PriorScheme {
    if (kind == "kl") return KLScheme{sigmas(n, dim)};
    if (kind == "gaussian_map") {
      need_grid();
      const std::string m = n.string("map", "identity");
      PathMap f = m == "identity" ? PathMap::identity : m == "square" ? PathMap::square : m == "clip" ? PathMap::clip
                  : throw ConfigError(n.field("map"), "unknown map '" + m + "' (identity, square, clip)");
      return GaussianMapScheme{f, pb.times.back(), pb.times.size() - 1};
    }
    if (kind == "ito") {
      need_grid();
      const std::string f = n.string("integrand", "constant");
      ItoScheme s;
      if (f == "constant") s.integrand = ItoIntegrand::constant;
      else if (f == "sin_brownian") s.integrand = ItoIntegrand::sin_brownian;
      else throw ConfigError(n.field("integrand"), "unknown integrand '" + f + "' (constant, sin_brownian)");
      s.constant = n.number("constant", 1.0);
      s.horizon = pb.times.back();
      s.fine_steps = pb.times.size() - 1;
      return s;
    }
    if (kind == "hierarchical") {
      auto sg = sigmas(n, dim);
      for (double& v : sg) v *= v;
      return HierarchicalScheme{sg, parse_hyper(n.child("hyper"))};
    }
    if (kind == "quasi_uniform") {
      QuasiUniformScheme q;
      if (n.has("marginal") == n.has("marginals")) throw ConfigError(n.path(), "give exactly one of 'marginal' or 'marginals'");
      if (n.has("marginal")) {
        q.marginals.assign(dim, parse_marginal(n.child("marginal")));
      } else {
        const json& arr = n.raw("marginals");
        if (!arr.is_array() || arr.size() != dim) throw ConfigError(n.field("marginals"), "one marginal per basis coordinate");
        for (std::size_t i = 0; i < arr.size(); ++i)
          q.marginals.push_back(parse_marginal(Node(arr[i], n.field("marginals") + "[" + std::to_string(i) + "]")));
      }
      if (dim > SobolSequence::kMaxDim) throw ConfigError(n.field("kind"), "quasi_uniform supports at most 16 dimensions");
      return q;
    }
    throw ConfigError(n.field("kind"),
                      "unknown prior kind '" + kind + "' (kl, gaussian_map, ito, hierarchical, quasi_uniform)");
  });
  n.finish();
  return s;
}

inline ObservationSpec parse_observation(const Node& n, std::uint64_t seed, const std::optional<GammaLaw>& law) {
  ObservationSpec o;
  const std::string kind = n.string("kind");
  if (kind == "file") {
    o.kind = ObservationSpec::Kind::file;
    o.path = n.string("path");
  } else if (kind == "synthetic") {
    const Node t = n.child("truth");
    const std::string tk = t.string("kind");
    if (tk == "prior_draw") {
      o.truth_from_prior = true;
      o.truth_level = static_cast<int>(t.uint("level", 0));
      o.truth_seed = t.uint("seed", derive_seed(seed, 1001));
    } else if (tk == "coeffs") {
      o.truth_from_prior = false;
      o.truth_values = t.numbers("values");
    } else {
      throw ConfigError(t.field("kind"), "unknown truth kind '" + tk + "' (prior_draw, coeffs)");
    }
    t.finish();
    o.noise_seed = n.uint("noise_seed", derive_seed(seed, 1002));
    if (n.has("gamma")) {
      if (!law) throw ConfigError(n.field("gamma"), "only spherical noise takes a gamma");
      o.gamma = n.positive("gamma");
    }
  } else {
    throw ConfigError(n.field("kind"), "unknown observation kind '" + kind + "' (synthetic, file)");
  }
  n.finish();
  return o;
}

}  // namespace detail

/// Values the command line may override. Overrides are folded into the effective document.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

inline ExperimentConfig parse_config(json doc, const ConfigOverrides& ov = {}) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected an object");
  if (ov.seed) doc["seed"] = *ov.seed;
  if (ov.output_dir) doc["outputs"]["directory"] = *ov.output_dir;

  const Node root(doc, "");
  if (root.uint("schema_version") != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version (this build reads " + std::to_string(kSchemaVersion) + ")");
  const std::string name = root.string("name", "experiment");
  root.string("description", "");
  const std::uint64_t seed = root.uint("seed");

  const detail::ParsedBasis pb = detail::parse_basis(root.child("basis"));
  const detail::ParsedForward pf = detail::parse_forward(root.child("forward"), pb);
  const detail::ParsedNoise pn = detail::parse_noise(root.child("noise"), pf);
  const PriorScheme prior = detail::parse_prior(root.child("prior"), pb);

  std::vector<int> levels;
  for (auto v : root.uints("levels")) {
    if (v == 0 || v > 1'000'000) throw ConfigError("levels", "levels must lie in [1, 1e6]");
    levels.push_back(static_cast<int>(v));
  }
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] <= levels[i - 1]) throw ConfigError("levels", "levels must be strictly increasing");
  detail::wrap("levels", [&] {
    check_ladder_levels(prior, levels);
    return 0;
  });
  for (int n : levels) {
    const auto un = static_cast<std::size_t>(n);
    if (const auto* g = std::get_if<GaussianMapScheme>(&prior); g && g->fine_steps % un != 0)
      throw ConfigError("levels", "level " + std::to_string(n) + " must divide the grid step count");
    if (const auto* i = std::get_if<ItoScheme>(&prior); i && i->fine_steps % un != 0)
      throw ConfigError("levels", "level " + std::to_string(n) + " must divide the grid step count");
    if ((std::holds_alternative<KLScheme>(prior) || std::holds_alternative<HierarchicalScheme>(prior)) &&
        un > pb.basis.dim())
      throw ConfigError("levels", "level " + std::to_string(n) + " exceeds the basis dimension");
  }
  const std::size_t particles = root.count("particles");

  ObservationSpec obs = detail::parse_observation(root.child("observation"), seed, pn.gamma_law);
  if (!obs.truth_from_prior && obs.kind == ObservationSpec::Kind::synthetic) {
    const std::size_t want = pb.times.empty() ? pb.basis.dim() : pb.times.size();
    if (obs.truth_values.size() != want)
      throw ConfigError("observation.truth.values", "length must equal the basis dimension " + std::to_string(want));
  }
  if (obs.truth_from_prior && obs.truth_level == 0) obs.truth_level = levels.back();

  LadderSpec ladder;
  ladder.dictionary_seed = derive_seed(seed, 1003);
  if (root.has("ladder")) {
    const Node l = root.child("ladder");
    ladder.enabled = l.boolean("enabled", true);
    ladder.dictionary_size = l.count("dictionary_size", ladder.dictionary_size);
    ladder.dictionary_seed = l.uint("dictionary_seed", ladder.dictionary_seed);
    l.finish();
  }

  ProbeSpec probe;
  if (root.has("probe")) {
    const Node p = root.child("probe");
    if (p.has("scales")) probe.scales = p.numbers("scales");
    for (double s : probe.scales)
      if (!(s >= 0.0)) throw ConfigError(p.field("scales"), "scales must be >= 0");
    probe.max_axes = p.count("max_axes", probe.max_axes);
    if (p.has("directions")) {
      const json& d = p.raw("directions");
      if (!d.is_array()) throw ConfigError(p.field("directions"), "expected an array of vectors");
      for (std::size_t i = 0; i < d.size(); ++i) {
        const std::string f = p.field("directions") + "[" + std::to_string(i) + "]";
        if (!d[i].is_array() || d[i].size() != pb.basis.dim()) throw ConfigError(f, "expected a vector of basis dimension");
        std::vector<double> v;
        for (const auto& x : d[i]) {
          if (!x.is_number()) throw ConfigError(f, "expected numbers");
          v.push_back(x.get<double>());
        }
        probe.directions.push_back(std::move(v));
      }
    }
    p.finish();
  }

  OutputSpec out;
  if (root.has("outputs")) {
    const Node o = root.child("outputs");
    out.directory = o.string("directory", out.directory);
    out.csv = o.boolean("csv", true);
    out.json = o.boolean("json", true);
    out.dat = o.boolean("dat", true);
    o.finish();
  }
  root.finish();

  return ExperimentConfig{doc,      name,   seed,   pb.basis, pb.times, pf.map, pf.range_times, pn.model, pn.gamma_law,
                          prior,    levels, particles, std::move(obs), ladder, probe,          out};
}

inline ExperimentConfig parse_config_text(const std::string& text, const ConfigOverrides& ov = {}) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(std::move(doc), ov);
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& ov = {}) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw ConfigError("<file>", e.what());
  }
  return parse_config_text(text, ov);
}

/// Hash of the effective document without the output location.
inline std::string ExperimentConfig::hash() const {
  json j = effective;
  if (j.contains("outputs")) {
    j["outputs"].erase("directory");
    if (j["outputs"].empty()) j.erase("outputs");
  }
  return fnv1a64(j.dump());
}

}  // namespace fsbayes::harness
