// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "fsbayes/harness.hpp"

using namespace fsbayes;
using namespace fsbayes::harness;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("AC%-2d %s  %s: %s\n", id, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> normals(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Runs `body`, turning an escaped exception into a FAIL line.
void criterion(int id, const std::string& what, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    verdict(id, false, what, std::string("exception: ") + e.what());
  }
}

// ---------------------------------------------------------------- 1

void conjugate_oracle() {
  // Prior N(0, I), L = diag(1, 1/2), noise N(0, I): posterior mean l_k y_k / (1 + l_k^2).
  const double l[] = {1.0, 0.5};
  int hits = 0;
  double slowest = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto t0 = clock_type::now();
    const auto cfg = parse_config_text(find_recipe("conjugate-gaussian").text, {1000 + s, std::nullopt});
    Experiment ex(cfg);
    const auto r = ex.posterior(2);
    const auto& y = std::get<CoeffVector>(ex.observation());
    slowest = std::max(slowest, seconds_since(t0));
    double err2 = 0.0, se2 = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const double m = l[k] * y[k] / (1.0 + l[k] * l[k]);
      err2 += (r.cm->coeffs[k] - m) * (r.cm->coeffs[k] - m);
      se2 += r.cm_se[k] * r.cm_se[k];
    }
    hits += std::sqrt(err2) <= 3.0 * std::sqrt(se2);
  }
  verdict(1, hits >= 47 && slowest < 5.0, "conjugate-Gaussian oracle",
          fmt("%d/50 runs within 3 standard errors (need 47), slowest run %.2f s (limit 5 s)", hits, slowest));
}

// ---------------------------------------------------------------- 2

void prior_recovery() {
  const std::size_t N = 5;
  const Basis b = Basis::identity("R5", N);
  auto ens = std::make_shared<const PriorEnsemble>(sample_kl(KLScheme::decay(N, 1.0), b, 5, 5000, 17));
  const LogLikelihood ll(GaussianNoise("R5", std::vector<double>(N, 0.3)),
                         ForwardMap::diagonal("R5", "R5", std::vector<double>(N, 0.0)),
                         CoeffVector("R5", {1.0, -0.5, 2.0, 0.1, 0.0}));
  const auto post = compute_posterior(ens, ll);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  int exact = 0;
  for (int f = 0; f < 20; ++f) {
    const double a = u(rng), c = u(rng), d = u(rng), e = u(rng);
    const std::size_t i = pick(rng), j = pick(rng);
    const Functional g = [=](std::span<const double> x) {
      return a * std::sin(c * x[i] + d) + e * x[j] * x[j] + std::tanh(x[i] * x[j]);
    };
    exact += posterior_functional(post, g) == ensemble_average(*ens, g);
  }
  verdict(2, exact == 20, "prior recovery under a zero forward map",
          fmt("%d/20 functionals equal the prior ensemble average bit for bit", exact));
}

// ---------------------------------------------------------------- 3

double gaussian_pdf(std::span<const double> z, std::span<const double> mean, std::span<const double> var) {
  double p = 1.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    p *= std::exp(-0.5 * (z[i] - mean[i]) * (z[i] - mean[i]) / var[i]) / std::sqrt(2.0 * std::numbers::pi * var[i]);
  return p;
}

void gaussian_ratio() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ul(0.2, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 1 + trial % 8;
    std::vector<double> lam(N);
    for (double& v : lam) v = ul(rng);
    const std::vector<double> x = normals(rng, N, 0.5), y = normals(rng, N), zero(N, 0.0);
    const double want = gaussian_pdf(y, x, lam) / gaussian_pdf(y, zero, lam);
    const double got = std::exp(log_rho_gaussian(GaussianNoise("R", lam), x, y));
    worst = std::max(worst, std::abs(got - want) / want);
  }
  verdict(3, worst <= 1e-10, "Gaussian likelihood ratio vs explicit densities",
          fmt("max relative error %.3g over 1000 draws, N <= 8 (limit 1e-10)", worst));
}

// ---------------------------------------------------------------- 4

void decomposable_gaussian() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> us(0.3, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t N = 1 + trial % 8;
    std::vector<double> lam(N);
    std::vector<CoordinateDensity> coords;
    for (double& v : lam) {
      const double s = us(rng);
      v = s * s;
      coords.push_back(GaussianDensity{s});
    }
    const auto x = normals(rng, N, 0.7), y = normals(rng, N);
    const double a = log_rho_decomposable(DecomposableNoise("R", coords), x, y);
    const double b = log_rho_gaussian(GaussianNoise("R", lam), x, y);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  verdict(4, worst <= 1e-10, "Gaussian-coordinate decomposable noise",
          fmt("max relative difference %.3g over 1000 draws (limit 1e-10)", worst));
}

// ---------------------------------------------------------------- 5

void cosh_identity() {
  const double t = 0.7, b = 1.0;
  const std::size_t K = 10000;
  std::vector<double> phi(2 * K + 1, 0.0);
  for (std::size_t k = 1; k <= K; ++k) {
    const double v = t / (std::numbers::pi * (static_cast<double>(k) - 0.5));
    phi[2 * k - 1] = v;
    phi[2 * k] = v;
  }
  const double e = std::exp(b * t);
  const double want = 4.0 / ((e + 1.0 / e) * (e + 1.0 / e));
  const double got = char_fn_decomposable(b, phi);
  const double rel = std::abs(got - want) / want;
  verdict(5, rel <= 1e-3, "cosh^2 product identity",
          fmt("partial product %.10f vs 1/cosh^2(0.7) = %.10f, relative error %.3g (limit 1e-3)", got, want, rel));
}

// ---------------------------------------------------------------- 6

void laplace_triangle() {
  std::mt19937_64 rng(9);
  const std::size_t K = 256;
  long term_violations = 0, tail_violations = 0;
  double last_tail_bound = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double b = 0.1 + 0.01 * (trial % 50);
    // Summable forward coefficients so the partial sums converge.
    auto Lx = normals(rng, K);
    for (std::size_t k = 0; k < K; ++k) Lx[k] /= (1.0 + static_cast<double>(k)) * (1.0 + static_cast<double>(k));
    const auto y = normals(rng, K);
    const auto terms = laplace_fourier_terms(b, Lx, y);
    for (std::size_t k = 0; k < K; ++k) term_violations += !(std::abs(terms[k]) <= std::abs(Lx[k]) / b);
    // |S_K' - S_K| <= sum_{K < k <= K'} |Lx_k| / b for every pair of truncations.
    for (std::size_t lo = 0; lo < K; lo += 16) {
      double tail = 0.0, bound = 0.0;
      for (std::size_t k = lo; k < K; ++k) {
        tail += terms[k];
        bound += std::abs(Lx[k]) / b;
        tail_violations += !(std::abs(tail) <= bound);
      }
      if (lo == K - 16) last_tail_bound = std::max(last_tail_bound, bound);
    }
  }
  verdict(6, term_violations == 0 && tail_violations == 0, "Laplace triangle and tail bounds",
          fmt("%ld term and %ld tail violations over 1000 draws; largest final-block tail bound %.3g",
              term_violations, tail_violations, last_tail_bound));
}

// ---------------------------------------------------------------- 7

void gamma_estimation() {
  const std::size_t n = 10000;
  const double gamma = 2.0;
  const GaussianNoise base = GaussianNoise::decay("R", n, 1.0);
  const SphericalNoise noise(base, n, "fixed(2)");
  const SphericalNoise relabeled(base, n, "uniform(1,3)");
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = 1.0 / (1.0 + static_cast<double>(i));
  const ForwardMap L = ForwardMap::diagonal("R", "R", diag);
  const auto scheme = KLScheme::decay(n, 1.0);
  const Basis basis = Basis::identity("R", n);
  int inside = 0;
  bool labels_equal = true;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = sample_kl(scheme, basis, static_cast<int>(n), 1, 500 + s);
    const auto y = std::get<CoeffVector>(synthesize_observation(noise, L, x.row(0), s, gamma));
    const auto est = estimate_gamma(y, noise);
    inside += std::abs(est.gamma - gamma) / gamma <= 0.03;
    const auto other = estimate_gamma(y, relabeled);
    const auto Lx = L.apply(x.row(0));
    labels_equal = labels_equal && other.gamma == est.gamma &&
                   log_rho_spherical(noise, Lx, y.coeffs, est.gamma) ==
                       log_rho_spherical(relabeled, Lx, y.coeffs, other.gamma);
  }
  verdict(7, inside >= 95 && labels_equal, "scale estimation for spherical noise",
          fmt("%d/100 seeds within 3%% of gamma = 2 (need 95); law label changes nothing: %s", inside,
              labels_equal ? "yes" : "no"));
}

// ---------------------------------------------------------------- 8

void quadratic_variation_check() {
  const auto t = uniform_times(1.0, 10000);
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng = make_rng(s, 8);
    mean += quadratic_variation(sample_brownian(t, rng)).values.back() / 200.0;
  }
  std::vector<double> line(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) line[j] = 3.0 * t[j];
  const double lin = quadratic_variation(PathGrid(t, line)).values.back();
  verdict(8, std::abs(mean - 1.0) <= 0.05 && lin < 1e-3, "quadratic variation",
          fmt("Brownian 200-seed mean %.4f (within 5%% of 1), path 3t gives %.3g (limit 1e-3)", mean, lin));
}

// ---------------------------------------------------------------- 9

void weak_convergence_ladder() {
  const auto t0 = clock_type::now();
  const std::size_t N = 64;
  const Basis b = Basis::identity("R64", N);
  std::vector<double> diag(N), y(N, 0.0);
  for (std::size_t k = 0; k < N; ++k) diag[k] = 1.0 / (1.0 + static_cast<double>(k));
  y[0] = 0.4;
  y[1] = -0.3;
  y[3] = 0.2;
  const LogLikelihood ll(GaussianNoise("R64", std::vector<double>(N, 0.25)), ForwardMap::diagonal("R64", "R64", diag),
                         CoeffVector("R64", y));
  const auto rep = convergence_ladder(KLScheme::decay(N, 1.0), b, {2, 4, 8, 16, 32, 64}, 4000, ll, 64, 2, 8);
  const double secs = seconds_since(t0);
  const bool ok = rep.values[4] < 0.5 * rep.values[0] && rep.cm_gaps[4] < rep.cm_gaps[0] && secs < 30.0;
  verdict(9, ok, "weak-convergence ladder",
          fmt("bl at 2 = %.4f, at 32 = %.4f; cm gap at 2 = %.4f, at 32 = %.4f; %.2f s (limit 30 s)", rep.values[0],
              rep.values[4], rep.cm_gaps[0], rep.cm_gaps[4], secs));
}

// ---------------------------------------------------------------- 10

void hierarchical_variation() {
  const std::size_t M = 20000;
  const std::vector<double> edges{0.5, 1.0, 1.5, 2.0};
  const Hyperdensity lam(edges, {2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0});
  const Hyperdensity lam_n(edges, {1.0, 2.0 / 3.0, 1.0 / 3.0});
  const double bound = tv_mixture(lam_n, lam) + 3.0 / std::sqrt(static_cast<double>(M));
  const HierarchicalScheme scheme{{1.0, 0.5}, lam};
  const Basis b = Basis::identity("R2", 2);
  int held = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto ens = std::make_shared<const PriorEnsemble>(sample_hierarchical(scheme, b, 2, M, 100 + s));
    const LogLikelihood ll(GaussianNoise("R2", {4.0, 4.0}), ForwardMap::identity("R2", 2), CoeffVector("R2", {0.5, -0.2}));
    std::vector<double> lpw(M);
    for (std::size_t i = 0; i < M; ++i)
      lpw[i] = std::log(lam_n.density_at(ens->hyper_scale[i])) - std::log(lam.density_at(ens->hyper_scale[i]));
    const double tv = tv_particle(compute_posterior(ens, ll), compute_posterior(ens, ll, 1, lpw));
    worst = std::max(worst, tv);
    held += tv <= bound;
  }
  verdict(10, held == 20, "hierarchical variation bound",
          fmt("%d/20 seeds satisfy tv <= tv_mixture + 3/sqrt(M) = %.4f; largest tv %.4f", held, bound, worst));
}

// ---------------------------------------------------------------- 11

void ui_check() {
  const auto cfg = parse_config_text(find_recipe("conjugate-gaussian").text);
  Experiment ex(cfg);
  std::vector<LevelResult> res;
  for (int n : cfg.levels) res.push_back(ex.posterior(n));
  const auto rep = ex.ladder(res);
  bool mono = true;
  for (std::size_t k = 1; k < rep.ui.tail.size(); ++k) mono = mono && rep.ui.tail[k] <= rep.ui.tail[k - 1];
  verdict(11, mono && rep.ui.tail.back() < 1e-3, "uniform-integrability profile",
          fmt("nonincreasing over %zu thresholds: %s; terminal tail %.3g (limit 1e-3)", rep.ui.tail.size(),
              mono ? "yes" : "no", rep.ui.tail.back()));
}

// ---------------------------------------------------------------- 12

void determinism() {
  const fs::path root = fs::temp_directory_path() / "fsbayes_acceptance_det";
  fs::remove_all(root);
  int identical = 0, compared = 0;
  std::string bad;
  for (const auto& r : recipes()) {
    std::vector<std::vector<OutputFile>> runs;
    for (unsigned threads : {1u, 4u, 8u}) {
      const fs::path dir = root / (r.name + "_t" + std::to_string(threads));
      const auto cfg = parse_config_text(r.text, {std::nullopt, dir.string()});
      const auto man = run_experiment(cfg, {threads});
      if (man.exit_code != 0) bad += " " + r.name + "(exit " + std::to_string(man.exit_code) + ")";
      runs.push_back(man.files);
      // Checksums come from the bytes on disk.
      for (const auto& f : man.files)
        if (fnv1a64(read_text_file(dir / f.name)) != f.checksum) bad += " " + r.name + "/" + f.name;
    }
    ++compared;
    bool same = runs[0].size() == runs[1].size() && runs[0].size() == runs[2].size();
    for (std::size_t i = 0; same && i < runs[0].size(); ++i)
      same = runs[0][i].name == runs[1][i].name && runs[0][i].name == runs[2][i].name &&
             runs[0][i].checksum == runs[1][i].checksum && runs[0][i].checksum == runs[2][i].checksum;
    identical += same;
    if (!same) bad += " " + r.name;
  }
  fs::remove_all(root);
  verdict(12, identical == compared && bad.empty(), "byte-identical recipe outputs at 1, 4 and 8 threads",
          fmt("%d/%d recipes identical%s", identical, compared, bad.empty() ? "" : (";" + bad).c_str()));
}

}  // namespace

int main() {
  criterion(1, "conjugate-Gaussian oracle", conjugate_oracle);
  criterion(2, "prior recovery under a zero forward map", prior_recovery);
  criterion(3, "Gaussian likelihood ratio vs explicit densities", gaussian_ratio);
  criterion(4, "Gaussian-coordinate decomposable noise", decomposable_gaussian);
  criterion(5, "cosh^2 product identity", cosh_identity);
  criterion(6, "Laplace triangle and tail bounds", laplace_triangle);
  criterion(7, "scale estimation for spherical noise", gamma_estimation);
  criterion(8, "quadratic variation", quadratic_variation_check);
  criterion(9, "weak-convergence ladder", weak_convergence_ladder);
  criterion(10, "hierarchical variation bound", hierarchical_variation);
  criterion(11, "uniform-integrability profile", ui_check);
  criterion(12, "byte-identical recipe outputs at 1, 4 and 8 threads", determinism);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
