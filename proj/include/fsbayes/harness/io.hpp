#pragma once

// Text formats: CSV with a header row and 17-significant-digit decimals, plus
// FNV-1a checksums for manifests.

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fsbayes/convergence.hpp"
#include "fsbayes/errors.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/likelihood.hpp"
#include "fsbayes/posterior.hpp"
#include "fsbayes/priors.hpp"

namespace fsbayes::harness {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  const std::string str(s);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(str.c_str(), &end);
  if (end == str.c_str() || *end != '\0' || errno == ERANGE) throw IoError("not a number: '" + str + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------- ensembles

/// Layout:
///   # fsbayes-ensemble 1
///   # scheme,<tag>
///   # level,<n>
///   # seed,<seed>
///   # basis,<id>
///   # weights,<w_0>,...,<w_{N-1}>
///   # times,<t_0>,...            (path particles only)
///   particle[,scale],x0,...,x{N-1}
///   0[,t_0],...
inline std::string ensemble_to_csv(const PriorEnsemble& e) {
  std::string s = "# fsbayes-ensemble 1\n";
  s += "# scheme," + e.scheme + "\n# level," + std::to_string(e.level) + "\n# seed," + std::to_string(e.seed) +
       "\n# basis," + e.basis_id + "\n# weights";
  for (double w : e.ambient_weights) s += "," + format_double(w);
  s += "\n";
  if (e.is_path()) {
    s += "# times";
    for (double t : e.times) s += "," + format_double(t);
    s += "\n";
  }
  const bool hyper = !e.hyper_scale.empty();
  s += "particle";
  if (hyper) s += ",scale";
  for (std::size_t k = 0; k < e.dim(); ++k) s += ",x" + std::to_string(k);
  s += "\n";
  for (std::size_t i = 0; i < e.size(); ++i) {
    s += std::to_string(i);
    if (hyper) s += "," + format_double(e.hyper_scale[i]);
    for (double v : e.row(i)) s += "," + format_double(v);
    s += "\n";
  }
  return s;
}

inline PriorEnsemble ensemble_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "# fsbayes-ensemble 1") throw IoError("ensemble csv: missing format line");
  PriorEnsemble e;
  std::size_t li = 1;
  auto meta = [&](std::string_view key) -> std::vector<std::string_view> {
    if (li >= lines.size()) throw IoError("ensemble csv: truncated header");
    auto f = split(std::string_view(lines[li]));
    if (f.empty() || f[0] != "# " + std::string(key)) throw IoError("ensemble csv: expected '# " + std::string(key) + "'");
    ++li;
    return {f.begin() + 1, f.end()};
  };
  auto one = [&](std::string_view key) {
    auto f = meta(key);
    if (f.size() != 1) throw IoError("ensemble csv: bad '" + std::string(key) + "' line");
    return std::string(f[0]);
  };
  e.scheme = one("scheme");
  e.level = std::stoi(one("level"));
  e.seed = std::stoull(one("seed"));
  e.basis_id = one("basis");
  for (auto v : meta("weights")) e.ambient_weights.push_back(parse_double(v));
  if (li < lines.size() && lines[li].rfind("# times", 0) == 0)
    for (auto v : meta("times")) e.times.push_back(parse_double(v));
  if (li >= lines.size()) throw IoError("ensemble csv: missing column header");
  const auto header = split(std::string_view(lines[li++]));
  const bool hyper = header.size() > 1 && header[1] == "scale";
  const std::size_t N = header.size() - 1 - (hyper ? 1 : 0);
  if (N != e.ambient_weights.size()) throw IoError("ensemble csv: column count does not match weights");
  std::vector<std::vector<double>> rows;
  for (; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = split(std::string_view(lines[li]));
    if (f.size() != header.size()) throw IoError("ensemble csv: ragged row " + std::to_string(rows.size()));
    std::vector<double> r;
    if (hyper) e.hyper_scale.push_back(parse_double(f[1]));
    for (std::size_t k = hyper ? 2 : 1; k < f.size(); ++k) r.push_back(parse_double(f[k]));
    rows.push_back(std::move(r));
  }
  e.particles = RowMatrix(rows.size(), N);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < N; ++k) e.particles(i, k) = rows[i][k];
  return e;
}

// ---------------------------------------------------------------- observations

/// Coefficient observations: "index,value"; path observations: "t,value".
inline std::string observation_to_csv(const Observation& y) {
  std::string s;
  if (const auto* c = std::get_if<CoeffVector>(&y)) {
    s = "index,value\n";
    for (std::size_t i = 0; i < c->size(); ++i) s += std::to_string(i) + "," + format_double(c->coeffs[i]) + "\n";
  } else {
    const auto& p = std::get<PathGrid>(y);
    s = "t,value\n";
    for (std::size_t j = 0; j < p.size(); ++j) s += format_double(p.times[j]) + "," + format_double(p.values[j]) + "\n";
  }
  return s;
}

inline Observation observation_from_csv(const std::string& text, const std::string& basis_id) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IoError("observation csv: empty file");
  std::vector<double> a, b;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(std::string_view(lines[i]));
    if (f.size() != 2) throw IoError("observation csv: expected two columns at line " + std::to_string(i + 1));
    a.push_back(parse_double(f[0]));
    b.push_back(parse_double(f[1]));
  }
  if (lines[0] == "index,value") return CoeffVector(basis_id, std::move(b));
  if (lines[0] == "t,value") return PathGrid(std::move(a), std::move(b));
  throw IoError("observation csv: header must be 'index,value' or 't,value'");
}

// ---------------------------------------------------------------- posteriors and reports

inline std::string posterior_to_csv(const PosteriorParticles& p) {
  std::string s = "particle,log_weight,norm_weight\n";
  for (std::size_t i = 0; i < p.size(); ++i)
    s += std::to_string(i) + "," + format_double(p.log_weights[i]) + "," + format_double(p.norm_weights[i]) + "\n";
  return s;
}

inline std::string cm_to_csv(const CoeffVector& cm, const std::vector<double>& se) {
  std::string s = "coordinate,value,std_error\n";
  for (std::size_t k = 0; k < cm.size(); ++k)
    s += std::to_string(k) + "," + format_double(cm[k]) + "," + format_double(se[k]) + "\n";
  return s;
}

inline const std::vector<std::string>& ladder_metrics() {
  static const std::vector<std::string> m{"bl", "cm_gap", "setwise", "ess", "log_evidence"};
  return m;
}

/// Long format: one row per (level, metric).
inline std::string ladder_to_csv(const ConvergenceReport& r) {
  std::string s = "level,metric,value\n";
  for (std::size_t l = 0; l < r.levels.size(); ++l) {
    const double vals[] = {r.values[l], r.cm_gaps[l], r.setwise[l], r.ess[l], r.log_evidence[l]};
    for (std::size_t m = 0; m < ladder_metrics().size(); ++m)
      s += std::to_string(r.levels[l]) + "," + ladder_metrics()[m] + "," + format_double(vals[m]) + "\n";
  }
  return s;
}

/// Two-column "level value" text for external plotting.
inline std::string ladder_to_dat(const ConvergenceReport& r, const std::vector<double>& values, const std::string& name) {
  std::string s = "# level " + name + "\n";
  for (std::size_t l = 0; l < r.levels.size(); ++l) s += std::to_string(r.levels[l]) + " " + format_double(values[l]) + "\n";
  return s;
}

inline std::string ui_to_csv(const UiProfile& u) {
  std::string s = "threshold,tail\n";
  for (std::size_t k = 0; k < u.tail.size(); ++k) s += format_double(u.thresholds[k]) + "," + format_double(u.tail[k]) + "\n";
  return s;
}

inline std::string probe_to_csv(const ProbeTable& t) {
  std::string s = "direction,scale,modulus,degenerate\n";
  for (const auto& r : t.rows)
    s += std::to_string(r.direction) + "," + format_double(r.scale) + "," + format_double(r.modulus) + "," +
         (r.degenerate ? "1" : "0") + "\n";
  return s;
}

}  // namespace fsbayes::harness
