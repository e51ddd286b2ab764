#pragma once

// Bundled experiment recipes. Each is an ordinary config document.

#include <string>
#include <vector>

#include <json.hpp>

#include "fsbayes/errors.hpp"

namespace fsbayes::harness {

struct Recipe {
  std::string name;
  std::string summary;
  std::string text;  ///< JSON config
};

inline const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> all{
      {"conjugate-gaussian", "2-dim KL prior, diagonal forward (1, 1/2), unit Gaussian noise; analytic posterior",
       R"({
  "schema_version": 1,
  "name": "conjugate-gaussian",
  "seed": 20240601,
  "basis": {"kind": "identity", "id": "R", "dim": 2},
  "forward": {"kind": "diagonal", "values": [1.0, 0.5]},
  "noise": {"kind": "gaussian", "eigenvalues": [1.0, 1.0]},
  "prior": {"kind": "kl", "sigma": [1.0, 1.0]},
  "levels": [1, 2],
  "particles": 100000,
  "observation": {"kind": "synthetic", "truth": {"kind": "prior_draw"}}
})"},
      {"torus-laplace", "deconvolution on the torus: smoothing forward, Laplace noise on Fourier coefficients",
       R"({
  "schema_version": 1,
  "name": "torus-laplace",
  "seed": 314159,
  "basis": {"kind": "trig", "id": "T", "max_freq": 16, "sobolev": 1.0},
  "forward": {"kind": "diagonal", "trig_smoothing": {"order": 1.0, "scale": 1.0}},
  "noise": {"kind": "laplace_fourier", "b": 0.2},
  "prior": {"kind": "kl", "decay": 1.5},
  "levels": [3, 5, 9, 17, 33],
  "particles": 20000,
  "observation": {"kind": "synthetic", "truth": {"kind": "prior_draw"}}
})"},
      {"spherical", "spherically symmetric noise gamma Z with gamma estimated from the observation",
       R"({
  "schema_version": 1,
  "name": "spherical",
  "seed": 271828,
  "basis": {"kind": "identity", "id": "R", "dim": 64},
  "forward": {"kind": "diagonal", "decay": {"p": 1.0, "scale": 1.0}},
  "noise": {"kind": "spherical", "decay": {"p": 1.0, "scale": 0.05},
            "gamma_law": {"kind": "fixed", "value": 2.0}},
  "prior": {"kind": "kl", "decay": 1.0},
  "levels": [4, 8, 16, 32, 64],
  "particles": 20000,
  "observation": {"kind": "synthetic", "truth": {"kind": "prior_draw"}}
})"},
      {"subordinated", "Brownian motion observed through a random clock estimated by quadratic variation",
       R"({
  "schema_version": 1,
  "name": "subordinated",
  "seed": 161803,
  "basis": {"kind": "grid", "horizon": 1.0, "steps": 16},
  "forward": {"kind": "identity"},
  "noise": {"kind": "subordinated", "stride": 32},
  "prior": {"kind": "gaussian_map", "map": "clip"},
  "levels": [2, 4, 8, 16],
  "particles": 20000,
  "observation": {"kind": "synthetic", "truth": {"kind": "prior_draw"}}
})"},
      {"girsanov", "Brownian noise with drift 2x/(1+x^2); likelihood by a Girsanov change of measure",
       R"({
  "schema_version": 1,
  "name": "girsanov",
  "seed": 141421,
  "basis": {"kind": "grid", "horizon": 1.0, "steps": 16},
  "forward": {"kind": "identity"},
  "noise": {"kind": "girsanov"},
  "prior": {"kind": "ito", "integrand": "constant", "constant": 1.0},
  "levels": [2, 4, 8, 16],
  "particles": 20000,
  "observation": {"kind": "synthetic", "truth": {"kind": "prior_draw"}}
})"},
  };
  return all;
}

inline const Recipe& find_recipe(const std::string& name) {
  for (const auto& r : recipes())
    if (r.name == name) return r;
  std::string known;
  for (const auto& r : recipes()) known += (known.empty() ? "" : ", ") + r.name;
  throw ConfigError("recipe", "unknown recipe '" + name + "' (" + known + ")");
}

}  // namespace fsbayes::harness
