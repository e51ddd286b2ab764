#pragma once

// Orchestration: sample prior -> synthesize or load y -> posteriors per level -> ladder report.
// Every emitted byte except manifest.json is a function of (config, seed).

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsbayes/convergence.hpp"
#include "fsbayes/errors.hpp"
#include "fsbayes/harness/config.hpp"
#include "fsbayes/harness/io.hpp"
#include "fsbayes/likelihood.hpp"
#include "fsbayes/posterior.hpp"
#include "fsbayes/priors.hpp"

#ifndef FSBAYES_VERSION
#define FSBAYES_VERSION "0.0.0"
#endif

namespace fsbayes::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitNumeric = 4;

/// Maps a toolkit error to the documented process exit status.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DegenerateEvidence*>(&e) || dynamic_cast<const DegenerateScaleError*>(&e) ||
      dynamic_cast<const DegenerateQVError*>(&e))
    return kExitDegenerate;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitConfig;
}

struct OutputFile {
  std::string name;
  std::string checksum;  ///< fnv1a64 of the file bytes
  std::size_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string version = FSBAYES_VERSION;
  std::string name;
  std::uint64_t seed = 0;
  std::vector<OutputFile> files;
  std::vector<std::pair<std::string, double>> timings;  ///< seconds per stage
  int exit_code = kExitOk;
  std::string diagnostic;

  json to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["name"] = name;
    j["seed"] = seed;
    j["exit_code"] = exit_code;
    if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
    j["files"] = json::array();
    for (const auto& f : files) j["files"].push_back({{"name", f.name}, {"checksum", f.checksum}, {"bytes", f.bytes}});
    j["timings"] = json::object();
    for (const auto& [k, v] : timings) j["timings"][k] = v;
    return j;
  }
};

struct RunOptions {
  unsigned threads = 1;
  std::optional<int> only_level;  ///< run one level and skip the ladder
  bool ladder = true;
};

/// Per-level posterior with the summary fields written to summary.json.
struct LevelResult {
  int level = 0;
  PosteriorParticles posterior;
  std::optional<CoeffVector> cm;
  std::vector<double> cm_se;
};

class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

  const ExperimentConfig& config() const noexcept { return cfg_; }

  /// True coefficients for synthetic observations.
  const std::vector<double>& truth() {
    if (!truth_) {
      const auto& o = cfg_.observation;
      if (o.kind != ObservationSpec::Kind::synthetic) throw ConfigError("observation.kind", "file observations have no truth");
      if (o.truth_from_prior) {
        const PriorEnsemble e = sample_prior(cfg_.prior, cfg_.basis, o.truth_level, 1, o.truth_seed);
        auto r = e.row(0);
        truth_ = std::vector<double>(r.begin(), r.end());
      } else {
        truth_ = o.truth_values;
      }
    }
    return *truth_;
  }

  /// Noise scale used to synthesize spherical observations.
  double synthetic_gamma() const {
    const auto& o = cfg_.observation;
    if (o.gamma) return *o.gamma;
    if (!cfg_.gamma_law) return 1.0;
    const GammaLaw& g = *cfg_.gamma_law;
    if (g.kind == GammaLaw::Kind::fixed) return g.value;
    Rng rng = make_rng(o.noise_seed, 0xA11CE);
    return g.lo + (g.hi - g.lo) * uniform_open(rng);
  }

  const Observation& observation() {
    if (!obs_) {
      const auto& o = cfg_.observation;
      if (o.kind == ObservationSpec::Kind::file) {
        obs_ = observation_from_csv(read_text_file(o.path), cfg_.forward.range_basis());
      } else {
        obs_ = synthesize_observation(cfg_.noise, cfg_.forward, truth(), o.noise_seed, synthetic_gamma());
      }
    }
    return *obs_;
  }

  const LogLikelihood& likelihood() {
    if (!lik_) lik_ = std::make_shared<const LogLikelihood>(cfg_.noise, cfg_.forward, observation());
    return *lik_;
  }

  std::shared_ptr<const PriorEnsemble> ensemble(int level, unsigned threads = 1) {
    auto it = ens_.find(level);
    if (it != ens_.end()) return it->second;
    auto e = std::make_shared<const PriorEnsemble>(sample_prior(cfg_.prior, cfg_.basis, level, cfg_.particles, cfg_.seed, threads));
    ens_.emplace(level, e);
    return e;
  }

  LevelResult posterior(int level, unsigned threads = 1) {
    LevelResult r;
    r.level = level;
    r.posterior = compute_posterior(ensemble(level, threads), likelihood(), threads);
    if (r.posterior.valid) {
      r.cm = cm_estimate(r.posterior);
      r.cm_se = cm_standard_error(r.posterior);
    }
    return r;
  }

  ConvergenceReport ladder(const std::vector<LevelResult>& results, unsigned threads = 1) {
    std::vector<int> levels;
    std::vector<std::shared_ptr<const PriorEnsemble>> ens;
    std::vector<PosteriorParticles> post;
    for (const auto& r : results) {
      levels.push_back(r.level);
      ens.push_back(r.posterior.ensemble);
      post.push_back(r.posterior);
    }
    return ladder_report(levels, ens, post, likelihood(), cfg_.ladder.dictionary_size, cfg_.ladder.dictionary_seed,
                         threads);
  }

  /// Continuity probe along configured directions, or the first coordinate axes of the range.
  ProbeTable probe(int level, std::vector<double> scales, unsigned threads = 1) {
    const auto* y = std::get_if<CoeffVector>(&observation());
    if (!y) throw ModelError("probe: path observations cannot be perturbed");
    std::vector<std::vector<double>> dirs = cfg_.probe.directions;
    if (dirs.empty()) {
      for (std::size_t k = 0; k < std::min(cfg_.probe.max_axes, y->size()); ++k) {
        std::vector<double> e(y->size(), 0.0);
        e[k] = 1.0;
        dirs.push_back(std::move(e));
      }
    }
    for (const auto& d : dirs)
      if (d.size() != y->size()) throw ConfigError("probe.directions", "directions live in the observation space");
    return continuity_probe(likelihood(), ensemble(level, threads), dirs, scales, {}, threads);
  }

 private:
  ExperimentConfig cfg_;
  std::optional<std::vector<double>> truth_;
  std::optional<Observation> obs_;
  std::shared_ptr<const LogLikelihood> lik_;
  std::map<int, std::shared_ptr<const PriorEnsemble>> ens_;
};

// ---------------------------------------------------------------- emission

/// Collects output files under one directory and records their checksums.
class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    write_text_file(dir_ / name, content);
    files_.push_back({name, fnv1a64(content), content.size()});
  }

  const std::filesystem::path& directory() const noexcept { return dir_; }
  const std::vector<OutputFile>& files() const noexcept { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<OutputFile> files_;
};

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vector_json(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
inline std::string json_text(const json& j) { return j.dump(2) + "\n"; }

inline json level_summary(const LevelResult& r) {
  json j;
  j["level"] = r.level;
  j["valid"] = r.posterior.valid;
  j["log_evidence"] = finite_or_null(r.posterior.log_evidence);
  j["ess"] = r.posterior.valid ? json(r.posterior.ess) : json(0.0);
  if (!r.posterior.valid) j["diagnostic"] = r.posterior.diagnostic;
  if (r.cm) {
    j["cm"] = vector_json(r.cm->coeffs);
    j["cm_std_error"] = vector_json(r.cm_se);
  }
  return j;
}

inline json ladder_json(const ConvergenceReport& rep) {
  json j;
  j["levels"] = rep.levels;
  j["reference_level"] = rep.levels.back();
  j["metric"] = rep.metric_name;
  j["bl"] = vector_json(rep.values);
  j["cm_gap"] = vector_json(rep.cm_gaps);
  j["setwise"] = vector_json(rep.setwise);
  j["ess"] = vector_json(rep.ess);
  j["log_evidence"] = vector_json(rep.log_evidence);
  j["degenerate"] = rep.degenerate;
  j["dictionary_size"] = rep.dictionary_size;
  j["dictionary_seed"] = rep.dictionary_seed;
  j["notes"] = rep.notes;
  j["ui"] = {{"thresholds", vector_json(rep.ui.thresholds)},
             {"tail", vector_json(rep.ui.tail)},
             {"max_rho", finite_or_null(rep.ui.max_rho)}};
  return j;
}

/// Same layout as observations: "t,value" on grid bases, "index,value" otherwise.
inline std::string truth_to_csv(const ExperimentConfig& cfg, const std::vector<double>& x) {
  if (!cfg.basis_times.empty()) return observation_to_csv(PathGrid(cfg.basis_times, x));
  return observation_to_csv(CoeffVector(cfg.basis.id(), x));
}

inline std::string level_file(const std::string& stem, int level) {
  return stem + "_level" + std::to_string(level) + ".csv";
}

/// Runs the configured pipeline and writes every output plus manifest.json.
/// Toolkit errors are caught and reported through the manifest's exit code and diagnostic.json.
inline RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  RunManifest man;
  man.config_hash = cfg.hash();
  man.name = cfg.name;
  man.seed = cfg.seed;
  OutputWriter out(cfg.outputs.directory);
  auto stage = [&](const std::string& name, auto&& f) {
    const auto t0 = clock::now();
    f();
    man.timings.emplace_back(name, std::chrono::duration<double>(clock::now() - t0).count());
  };

  Experiment ex(cfg);
  json summary;
  summary["name"] = cfg.name;
  summary["seed"] = cfg.seed;
  summary["config_hash"] = man.config_hash;
  summary["noise"] = noise_kind(cfg.noise);
  summary["particles"] = cfg.particles;

  std::vector<int> levels = cfg.levels;
  if (opt.only_level) levels = {*opt.only_level};

  try {
    stage("observation", [&] {
      if (cfg.outputs.csv) {
        out.write("observation.csv", observation_to_csv(ex.observation()));
        if (cfg.observation.kind == ObservationSpec::Kind::synthetic) {
          out.write("truth.csv", truth_to_csv(cfg, ex.truth()));
        }
      } else {
        ex.observation();
      }
      const auto& lik = ex.likelihood();
      if (auto g = lik.gamma_estimate()) summary["gamma_estimate"] = g->gamma;
      if (cfg.gamma_law) summary["gamma_synthetic"] = ex.synthetic_gamma();
    });

    std::vector<LevelResult> results;
    stage("posterior", [&] {
      summary["levels"] = json::array();
      for (int n : levels) {
        LevelResult r = ex.posterior(n, opt.threads);
        if (cfg.outputs.csv) {
          out.write(level_file("posterior", n), posterior_to_csv(r.posterior));
          if (r.cm) out.write(level_file("cm", n), cm_to_csv(*r.cm, r.cm_se));
        }
        summary["levels"].push_back(level_summary(r));
        results.push_back(std::move(r));
      }
    });

    const bool run_ladder = opt.ladder && cfg.ladder.enabled && !opt.only_level && levels.size() >= 2;
    if (run_ladder) {
      stage("ladder", [&] {
        const ConvergenceReport rep = ex.ladder(results, opt.threads);
        if (cfg.outputs.csv) {
          out.write("ladder.csv", ladder_to_csv(rep));
          out.write("ui_profile.csv", ui_to_csv(rep.ui));
        }
        if (cfg.outputs.json) out.write("ladder.json", json_text(ladder_json(rep)));
        if (cfg.outputs.dat) {
          out.write("ladder_bl.dat", ladder_to_dat(rep, rep.values, "bl"));
          out.write("ladder_cm_gap.dat", ladder_to_dat(rep, rep.cm_gaps, "cm_gap"));
        }
      });
    }

    const LevelResult& last = results.back();
    if (!last.posterior.valid) throw DegenerateEvidence("level " + std::to_string(last.level) + ": " + last.posterior.diagnostic);
  } catch (const Error& e) {
    man.exit_code = exit_code_for(e);
    man.diagnostic = e.what();
    json d{{"error", e.what()}, {"exit_code", man.exit_code}};
    if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) d["field"] = ce->field_path();
    out.write("diagnostic.json", json_text(d));
  }
  summary["exit_code"] = man.exit_code;
  if (cfg.outputs.json) out.write("summary.json", json_text(summary));

  man.files = out.files();
  write_text_file(out.directory() / "manifest.json", json_text(man.to_json()));
  return man;
}

}  // namespace fsbayes::harness
