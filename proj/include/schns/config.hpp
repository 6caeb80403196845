#pragma once

// Run configuration in a line-oriented `key = value` format with `[section]`
// headers. '#' starts a comment. Every key is optional; unknown keys are
// errors.
//
//   [grid]       nx ny lx ly
//   [scheme]     dt eps delta R div_tol trace_tol theta extrapolate blowup_guard
//   [potential]  bulk (double_well | polynomial) bulk_coefficients boundary (linear | double_well)
//   [noise]      enabled modes sigma0 gamma alpha_u alpha_phi
//   [initial]    kind (zero | cosine | random) phi_mean phi_amp u_amp mode seed
//   [ensemble]   n_paths base_seed record_every threads holder_beta pairing stop_norm
//   [run]        steps seed output checkpoint_every

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "schns/ensemble.hpp"

namespace schns {

struct RunConfig {
  EnsembleConfig ensemble;
  std::uint64_t seed = 0;
  std::string output = "out";
  std::uint64_t checkpoint_every = 0;

  bool operator==(const RunConfig& o) const {
    const auto& a = ensemble;
    const auto& b = o.ensemble;
    return a.grid == b.grid && a.scheme == b.scheme && a.potentials == b.potentials && a.noise == b.noise &&
           a.initial == b.initial && a.n_paths == b.n_paths && a.base_seed == b.base_seed && a.steps == b.steps &&
           a.record_every == b.record_every && a.threads == b.threads && a.holder_beta == b.holder_beta &&
           a.pairing == b.pairing && a.stop_norm == b.stop_norm && seed == o.seed && output == o.output &&
           checkpoint_every == o.checkpoint_every;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

/// Values that are converted after parsing.
struct ConfigFields {
  std::uint64_t nx = 64, ny = 64;
  double lx = 1.0, ly = 1.0;
  std::string bulk = "double_well";
  std::vector<double> bulk_coefficients;
  std::string boundary = "linear";
  std::string pairing = "velocity";
  std::string stop_norm = "euclidean";
};

inline const char* to_string(Pairing p) { return p == Pairing::velocity ? "velocity" : "phase_gradient"; }

inline const char* to_string(StopNorm s) {
  switch (s) {
    case StopNorm::euclidean: return "euclidean";
    case StopNorm::velocity: return "velocity";
    case StopNorm::phase: return "phase";
    case StopNorm::sum: return "sum";
  }
  return "euclidean";
}

}  // namespace detail

/// Parse and validate. Errors name the line or the key path.
inline RunConfig parse_config(const std::string& text) {
  using namespace detail;
  RunConfig cfg;
  EnsembleConfig& e = cfg.ensemble;
  ConfigFields f;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto dbl = [](double& t) -> Setter { return [&t](const std::string& k, const std::string& v) { t = parse_double(k, v); }; };
  auto u64 = [](std::uint64_t& t) -> Setter { return [&t](const std::string& k, const std::string& v) { t = parse_u64(k, v); }; };
  auto i32 = [](int& t) -> Setter { return [&t](const std::string& k, const std::string& v) { t = parse_int(k, v); }; };
  auto boo = [](bool& t) -> Setter { return [&t](const std::string& k, const std::string& v) { t = parse_bool(k, v); }; };
  auto str = [](std::string& t) -> Setter { return [&t](const std::string&, const std::string& v) { t = v; }; };

  std::map<std::string, Setter> keys = {
      {"grid.nx", u64(f.nx)},
      {"grid.ny", u64(f.ny)},
      {"grid.lx", dbl(f.lx)},
      {"grid.ly", dbl(f.ly)},
      {"scheme.dt", dbl(e.scheme.dt)},
      {"scheme.eps", dbl(e.scheme.eps)},
      {"scheme.delta", dbl(e.scheme.delta)},
      {"scheme.R", dbl(e.scheme.R)},
      {"scheme.div_tol", dbl(e.scheme.div_tol)},
      {"scheme.trace_tol", dbl(e.scheme.trace_tol)},
      {"scheme.theta", dbl(e.scheme.theta)},
      {"scheme.extrapolate", boo(e.scheme.extrapolate)},
      {"scheme.blowup_guard", dbl(e.scheme.blowup_guard)},
      {"potential.bulk", str(f.bulk)},
      {"potential.bulk_coefficients",
       [&](const std::string& k, const std::string& v) { f.bulk_coefficients = parse_list(k, v); }},
      {"potential.boundary", str(f.boundary)},
      {"noise.enabled", boo(e.noise.enabled)},
      {"noise.modes", i32(e.noise.modes)},
      {"noise.sigma0", dbl(e.noise.sigma0)},
      {"noise.gamma", dbl(e.noise.gamma)},
      {"noise.alpha_u", dbl(e.noise.alpha_u)},
      {"noise.alpha_phi", dbl(e.noise.alpha_phi)},
      {"initial.kind", str(e.initial.kind)},
      {"initial.phi_mean", dbl(e.initial.phi_mean)},
      {"initial.phi_amp", dbl(e.initial.phi_amp)},
      {"initial.u_amp", dbl(e.initial.u_amp)},
      {"initial.mode", i32(e.initial.mode)},
      {"initial.seed", u64(e.initial.seed)},
      {"ensemble.n_paths", i32(e.n_paths)},
      {"ensemble.base_seed", u64(e.base_seed)},
      {"ensemble.record_every", i32(e.record_every)},
      {"ensemble.threads", i32(e.threads)},
      {"ensemble.holder_beta", dbl(e.holder_beta)},
      {"ensemble.pairing", str(f.pairing)},
      {"ensemble.stop_norm", str(f.stop_norm)},
      {"run.steps", u64(e.steps)},
      {"run.seed", u64(cfg.seed)},
      {"run.output", str(cfg.output)},
      {"run.checkpoint_every", u64(cfg.checkpoint_every)},
  };

  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  for (int line = 1; std::getline(in, raw); ++line) {
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "malformed section header '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const std::string path = section.empty() ? key : section + "." + key;
    auto it = keys.find(path);
    if (it == keys.end()) throw ConfigError(where + "unknown key '" + path + "'");
    if (seen.count(path)) {
      throw ConfigError(where + "duplicate key '" + path + "' (first set on line " + std::to_string(seen[path]) + ")");
    }
    seen[path] = line;
    if (value.empty()) throw ConfigError(where + path + ": missing value");
    try {
      it->second(path, value);
    } catch (const ConfigError& err) {
      throw ConfigError(where + err.what());
    }
  }

  // Cross-field validation, reported by key path.
  auto reject = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
  if (f.nx < static_cast<std::uint64_t>(Grid::min_cells)) reject("grid.nx", "must be >= 8");
  if (f.ny < static_cast<std::uint64_t>(Grid::min_cells)) reject("grid.ny", "must be >= 8");
  if (f.nx > 1u << 14) reject("grid.nx", "must be <= 16384");
  if (f.ny > 1u << 14) reject("grid.ny", "must be <= 16384");
  if (!(f.lx > 0.0)) reject("grid.lx", "must be > 0");
  if (!(f.ly > 0.0)) reject("grid.ly", "must be > 0");
  e.grid = Grid(static_cast<int>(f.nx), static_cast<int>(f.ny), f.lx, f.ly);
  try {
    e.scheme.validate();
  } catch (const ParameterError& err) {
    throw ConfigError("scheme." + std::string(err.what()));
  }

  BulkKind bk = BulkKind::double_well;
  if (f.bulk == "double_well") bk = BulkKind::double_well;
  else if (f.bulk == "polynomial") bk = BulkKind::polynomial;
  else reject("potential.bulk", "expected double_well or polynomial, got '" + f.bulk + "'");
  if (bk == BulkKind::double_well && !f.bulk_coefficients.empty()) {
    reject("potential.bulk_coefficients", "only allowed with bulk = polynomial");
  }
  BoundaryKind gk = BoundaryKind::linear;
  if (f.boundary == "linear") gk = BoundaryKind::linear;
  else if (f.boundary == "double_well") gk = BoundaryKind::double_well;
  else reject("potential.boundary", "expected linear or double_well, got '" + f.boundary + "'");
  try {
    e.potentials = PotentialSpec(bk, f.bulk_coefficients, gk);
  } catch (const ParameterError& err) {
    reject("potential.bulk_coefficients", err.what());
  }

  if (e.noise.modes < 1) reject("noise.modes", "must be >= 1");
  if (!(e.noise.sigma0 >= 0.0)) reject("noise.sigma0", "must be >= 0");
  if (!(e.noise.gamma > 0.5)) reject("noise.gamma", "must be > 0.5");

  if (e.initial.kind != "zero" && e.initial.kind != "cosine" && e.initial.kind != "random") {
    reject("initial.kind", "expected zero, cosine or random, got '" + e.initial.kind + "'");
  }
  if (e.initial.mode < 1 || 2 * (e.initial.mode + 3) >= e.grid.nx()) {
    reject("initial.mode", "must be >= 1 and resolved by the grid");
  }

  if (e.n_paths < 1) reject("ensemble.n_paths", "must be >= 1");
  if (e.record_every < 1) reject("ensemble.record_every", "must be >= 1");
  if (e.threads < 1) reject("ensemble.threads", "must be >= 1");
  if (!(e.holder_beta > 0.0 && e.holder_beta < 0.5)) reject("ensemble.holder_beta", "must lie in (0, 0.5)");
  if (f.pairing == "velocity") e.pairing = Pairing::velocity;
  else if (f.pairing == "phase_gradient") e.pairing = Pairing::phase_gradient;
  else reject("ensemble.pairing", "expected velocity or phase_gradient, got '" + f.pairing + "'");
  if (f.stop_norm == "euclidean") e.stop_norm = StopNorm::euclidean;
  else if (f.stop_norm == "velocity") e.stop_norm = StopNorm::velocity;
  else if (f.stop_norm == "phase") e.stop_norm = StopNorm::phase;
  else if (f.stop_norm == "sum") e.stop_norm = StopNorm::sum;
  else reject("ensemble.stop_norm", "expected euclidean, velocity, phase or sum, got '" + f.stop_norm + "'");
  if (cfg.output.empty()) reject("run.output", "must not be empty");
  return cfg;
}

namespace detail {

inline void serialize_physics(std::ostream& os, const RunConfig& c) {
  const EnsembleConfig& e = c.ensemble;
  const auto& p = e.potentials;
  os << "[grid]\n"
     << "nx = " << e.grid.nx() << "\n"
     << "ny = " << e.grid.ny() << "\n"
     << "lx = " << format_double(e.grid.lx()) << "\n"
     << "ly = " << format_double(e.grid.ly()) << "\n\n"
     << "[scheme]\n"
     << "dt = " << format_double(e.scheme.dt) << "\n"
     << "eps = " << format_double(e.scheme.eps) << "\n"
     << "delta = " << format_double(e.scheme.delta) << "\n"
     << "R = " << format_double(e.scheme.R) << "\n"
     << "div_tol = " << format_double(e.scheme.div_tol) << "\n"
     << "trace_tol = " << format_double(e.scheme.trace_tol) << "\n"
     << "theta = " << format_double(e.scheme.theta) << "\n"
     << "extrapolate = " << (e.scheme.extrapolate ? "true" : "false") << "\n"
     << "blowup_guard = " << format_double(e.scheme.blowup_guard) << "\n\n"
     << "[potential]\n"
     << "bulk = " << (p.bulk_kind() == BulkKind::double_well ? "double_well" : "polynomial") << "\n";
  if (p.bulk_kind() == BulkKind::polynomial) {
    os << "bulk_coefficients = ";
    const auto& cs = p.bulk().coefficients();
    for (std::size_t k = 0; k < cs.size(); ++k) os << (k ? ", " : "") << format_double(cs[k]);
    os << "\n";
  }
  os << "boundary = " << (p.boundary_kind() == BoundaryKind::linear ? "linear" : "double_well") << "\n\n"
     << "[noise]\n"
     << "enabled = " << (e.noise.enabled ? "true" : "false") << "\n"
     << "modes = " << e.noise.modes << "\n"
     << "sigma0 = " << format_double(e.noise.sigma0) << "\n"
     << "gamma = " << format_double(e.noise.gamma) << "\n"
     << "alpha_u = " << format_double(e.noise.alpha_u) << "\n"
     << "alpha_phi = " << format_double(e.noise.alpha_phi) << "\n\n"
     << "[initial]\n"
     << "kind = " << e.initial.kind << "\n"
     << "phi_mean = " << format_double(e.initial.phi_mean) << "\n"
     << "phi_amp = " << format_double(e.initial.phi_amp) << "\n"
     << "u_amp = " << format_double(e.initial.u_amp) << "\n"
     << "mode = " << e.initial.mode << "\n"
     << "seed = " << e.initial.seed << "\n";
}

}  // namespace detail

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  detail::serialize_physics(os, c);
  const EnsembleConfig& e = c.ensemble;
  os << "\n[ensemble]\n"
     << "n_paths = " << e.n_paths << "\n"
     << "base_seed = " << e.base_seed << "\n"
     << "record_every = " << e.record_every << "\n"
     << "threads = " << e.threads << "\n"
     << "holder_beta = " << detail::format_double(e.holder_beta) << "\n"
     << "pairing = " << detail::to_string(e.pairing) << "\n"
     << "stop_norm = " << detail::to_string(e.stop_norm) << "\n\n"
     << "[run]\n"
     << "steps = " << e.steps << "\n"
     << "seed = " << c.seed << "\n"
     << "output = " << c.output << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n";
  return os.str();
}

using ConfigHash = std::array<unsigned char, 32>;

/// SHA-256 of the canonical physics sections ([grid] through [initial]) plus
/// the recording keys that shape the diagnostics of a resumed run.
inline ConfigHash config_hash(const RunConfig& c) {
  std::ostringstream os;
  detail::serialize_physics(os, c);
  os << "\n[record]\nrecord_every = " << c.ensemble.record_every << "\npairing = " << detail::to_string(c.ensemble.pairing)
     << "\n";
  const std::string text = os.str();
  ConfigHash h{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), h.data(), &len, EVP_sha256(), nullptr) != 1 || len != h.size()) {
    throw IoError("SHA-256 digest failed");
  }
  return h;
}

}  // namespace schns
