// fsbayes command line: run configs and bundled recipes, emit CSV/JSON/dat outputs.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fsbayes/harness.hpp"

namespace fh = fsbayes::harness;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 1;
};

// CONFIG is a file path, or recipe:NAME for a bundled recipe.
fh::ExperimentConfig load(const std::string& source, const Globals& g) {
  const fh::ConfigOverrides ov{g.seed, g.out};
  if (source.rfind("recipe:", 0) == 0) {
    const auto& r = fh::find_recipe(source.substr(7));
    fh::ConfigOverrides o = ov;
    if (!o.output_dir) o.output_dir = "fsbayes-out/" + r.name;
    return fh::parse_config_text(r.text, o);
  }
  return fh::load_config(source, ov);
}

int report(const fh::RunManifest& m) {
  for (const auto& f : m.files) std::cout << f.checksum << "  " << f.name << "\n";
  if (m.exit_code != 0) std::cerr << "fsbayes: " << m.diagnostic << "\n";
  return m.exit_code;
}

// Writes a manifest for subcommands that bypass run_experiment.
int finish(const fh::ExperimentConfig& cfg, fh::OutputWriter& out) {
  fh::RunManifest m;
  m.config_hash = cfg.hash();
  m.name = cfg.name;
  m.seed = cfg.seed;
  m.files = out.files();
  fh::write_text_file(out.directory() / "manifest.json", fh::json_text(m.to_json()));
  return report(m);
}

int level_or_last(const fh::ExperimentConfig& cfg, std::optional<int> level) {
  return level ? *level : cfg.levels.back();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fsbayes: Bayesian inversion on function spaces by prior reweighting"};
  app.set_version_flag("--version", std::string(FSBAYES_VERSION));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads (outputs do not depend on it)")->check(CLI::Range(1u, 1024u));

  std::string config, recipe_name;
  std::optional<int> level;
  bool no_ladder = false;
  std::vector<double> scales;

  auto* run = app.add_subcommand("run", "run every configured level and the ladder report");
  run->add_option("config", config, "config file or recipe:NAME")->required();
  run->add_flag("--no-ladder", no_ladder, "skip the convergence report");

  auto* rec = app.add_subcommand("recipes", "bundled recipes");
  rec->require_subcommand(1);
  rec->add_subcommand("list", "list bundled recipes");
  auto* rec_show = rec->add_subcommand("show", "print a recipe's config");
  rec_show->add_option("name", recipe_name)->required();
  auto* rec_run = rec->add_subcommand("run", "run a recipe");
  rec_run->add_option("name", recipe_name)->required();

  auto* gen = app.add_subcommand("generate", "prior ensembles or synthetic data");
  gen->require_subcommand(1);
  auto* gen_prior = gen->add_subcommand("prior", "write a prior ensemble");
  gen_prior->add_option("config", config)->required();
  gen_prior->add_option("--level", level, "discretization level (default: finest)");
  auto* gen_data = gen->add_subcommand("data", "write the observation and true coefficients");
  gen_data->add_option("config", config)->required();

  auto* post = app.add_subcommand("posterior", "posterior at one level");
  post->add_option("config", config)->required();
  post->add_option("--level", level, "discretization level (default: finest)");

  auto* lad = app.add_subcommand("ladder", "convergence report across the configured levels");
  lad->add_option("config", config)->required();

  auto* probe = app.add_subcommand("probe", "continuity probe in the observation");
  probe->add_option("config", config)->required();
  probe->add_option("--level", level, "discretization level (default: finest)");
  probe->add_option("--scales", scales, "perturbation sizes")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fh::kExitConfig;
  }

  try {
    if (rec->parsed()) {
      if (rec->got_subcommand("list")) {
        for (const auto& r : fh::recipes()) std::cout << r.name << "\t" << r.summary << "\n";
        return 0;
      }
      if (rec_show->parsed()) {
        std::cout << fh::find_recipe(recipe_name).text << "\n";
        return 0;
      }
      const auto cfg = load("recipe:" + recipe_name, g);
      return report(fh::run_experiment(cfg, {g.threads, std::nullopt, true}));
    }

    const auto cfg = load(config, g);
    if (run->parsed()) return report(fh::run_experiment(cfg, {g.threads, std::nullopt, !no_ladder}));
    if (lad->parsed()) return report(fh::run_experiment(cfg, {g.threads, std::nullopt, true}));
    if (post->parsed()) return report(fh::run_experiment(cfg, {g.threads, level_or_last(cfg, level), false}));

    fh::Experiment ex(cfg);
    fh::OutputWriter out(cfg.outputs.directory);
    if (gen_prior->parsed()) {
      const int n = level_or_last(cfg, level);
      out.write(fh::level_file("prior", n), fh::ensemble_to_csv(*ex.ensemble(n, g.threads)));
      return finish(cfg, out);
    }
    if (gen_data->parsed()) {
      out.write("observation.csv", fh::observation_to_csv(ex.observation()));
      out.write("truth.csv", fh::truth_to_csv(cfg, ex.truth()));
      return finish(cfg, out);
    }
    if (probe->parsed()) {
      const int n = level_or_last(cfg, level);
      const auto table = ex.probe(n, scales.empty() ? cfg.probe.scales : scales, g.threads);
      out.write("probe_level" + std::to_string(n) + ".csv", fh::probe_to_csv(table));
      return finish(cfg, out);
    }
  } catch (const fsbayes::Error& e) {
    std::cerr << "fsbayes: " << e.what() << "\n";
    return fh::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "fsbayes: " << e.what() << "\n";
    return fh::kExitNumeric;
  }
  return 0;
}
