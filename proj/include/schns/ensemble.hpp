#pragma once

// Monte Carlo driver over independent paths and the statistical
// supermartingale test on the recorded G process.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "schns/diagnostics.hpp"

namespace schns {

struct NoiseSpec {
  bool enabled = true;
  int modes = 16;
  double sigma0 = 0.5;
  double gamma = 1.0;
  double alpha_u = 1.0;
  double alpha_phi = 0.0;

  std::optional<NoiseModel> build(const Grid& g) const {
    if (!enabled) return std::nullopt;
    return NoiseModel::channel_modes(g, modes, sigma0, gamma, alpha_u, alpha_phi);
  }
  bool operator==(const NoiseSpec&) const = default;
};

struct EnsembleConfig {
  Grid grid{64, 64};
  SchemeParams scheme;
  PotentialSpec potentials;
  NoiseSpec noise;
  InitialCondition initial;
  int n_paths = 1;
  std::uint64_t base_seed = 0;
  std::uint64_t steps = 100;
  int record_every = 1;
  int threads = 1;
  double holder_beta = 0.25;
  Pairing pairing = Pairing::velocity;
  StopNorm stop_norm = StopNorm::euclidean;

  void validate() const {
    scheme.validate();
    if (n_paths < 1) throw ParameterError("n_paths must be >= 1");
    if (record_every < 1) throw ParameterError("record_every must be >= 1");
    if (threads < 1) throw ParameterError("threads must be >= 1");
  }

  RecorderOptions recorder_options() const {
    RecorderOptions o;
    o.dt = scheme.dt;
    o.record_every = record_every;
    o.eps = scheme.eps;
    o.holder_beta = holder_beta;
    o.stop_R = scheme.R;
    o.stop_norm = stop_norm;
    o.pairing = pairing;
    return o;
  }
};

struct PathResult {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  PathDiagnostics diagnostics;
  Accumulators final_acc;
};

/// Run one path to cfg.steps from the configured initial data.
inline PathResult run_path(const Stepper& stepper, const EnsembleConfig& cfg, std::uint64_t index) {
  PathResult r;
  r.index = index;
  r.seed = split_seed(cfg.base_seed, index);
  Rng rng(r.seed);
  PathRecorder rec(cfg.grid, cfg.potentials, cfg.recorder_options());
  try {
    State s = make_initial_state(cfg.grid, cfg.initial, cfg.potentials, cfg.scheme.eps, &stepper.projector());
    PathRecorder::append(r.diagnostics, rec.start(s));
    for (std::uint64_t n = 0; n < cfg.steps; ++n) {
      s = stepper.step(s, rng);
      if (auto row = rec.observe(s)) PathRecorder::append(r.diagnostics, *row);
    }
  } catch (const Error& e) {
    r.ok = false;
    r.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  rec.finalize(r.diagnostics);
  r.final_acc = rec.accumulators();
  return r;
}

struct TimeStat {
  double mean = 0.0;
  double se = 0.0;
};

struct EnsembleStats {
  std::vector<double> times;
  std::vector<TimeStat> energy;
  std::vector<TimeStat> mass;
  std::vector<TimeStat> G;
  MomentTable moments;
  int n_paths = 0;
  int n_failed = 0;
  int n_stopped = 0;
};

struct EnsembleResult {
  std::vector<PathResult> paths;
  EnsembleStats stats;
};

/// Aggregate over successful paths in index order.
inline EnsembleStats aggregate(const std::vector<PathResult>& paths, double p = 1.0) {
  EnsembleStats st;
  st.n_paths = static_cast<int>(paths.size());
  std::vector<const PathResult*> good;
  for (const auto& r : paths) {
    if (!r.ok) ++st.n_failed;
    else good.push_back(&r);
    if (r.diagnostics.stopped_at) ++st.n_stopped;
  }
  if (good.empty()) return st;
  st.times = good.front()->diagnostics.times;
  const std::size_t nt = st.times.size();
  auto series = [&](auto get) {
    std::vector<TimeStat> out(nt);
    for (std::size_t n = 0; n < nt; ++n) {
      std::vector<double> v;
      v.reserve(good.size());
      for (const auto* r : good) v.push_back(get(r->diagnostics, n));
      const Moment m = sample_moment(v);
      out[n] = {m.mean, m.se};
    }
    return out;
  };
  st.energy = series([](const PathDiagnostics& d, std::size_t n) { return d.energy_series[n].E; });
  st.mass = series([](const PathDiagnostics& d, std::size_t n) { return d.mass_series[n]; });
  st.G = series([](const PathDiagnostics& d, std::size_t n) { return d.G_series[n]; });
  std::vector<Accumulators> acc;
  for (const auto* r : good) acc.push_back(r->final_acc);
  st.moments = moment_estimates(acc, p);
  return st;
}

/// Paths run on cfg.threads workers, each with its own stepper; results are
/// stored by path index so the aggregate does not depend on scheduling.
inline EnsembleResult run_ensemble(const EnsembleConfig& cfg) {
  cfg.validate();
  EnsembleResult out;
  out.paths.resize(static_cast<std::size_t>(cfg.n_paths));
  const std::optional<NoiseModel> noise = cfg.noise.build(cfg.grid);
  const Stepper first(cfg.grid, cfg.scheme, cfg.potentials, noise);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    const Stepper stepper = first;
    for (std::uint64_t i; (i = next.fetch_add(1)) < static_cast<std::uint64_t>(cfg.n_paths);) {
      out.paths[i] = run_path(stepper, cfg, i);
    }
  };
  const int nthreads = std::min(cfg.threads, cfg.n_paths);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
  }
  out.stats = aggregate(out.paths);
  return out;
}

// ---------------------------------------------------------------------------
// Supermartingale test

/// Record of one path up to and including the conditioning time.
struct TruncatedPath {
  std::span<const double> times;
  std::span<const EnergyReport> energy;
  std::span<const double> G;
};

using EventFilter = std::function<bool(const TruncatedPath&)>;

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct SupermartingaleResult {
  Verdict verdict = Verdict::inconclusive;
  /// Sample mean of 1_A (G(t) - G(s)).
  double statistic = 0.0;
  double se = 0.0;
  int n_event = 0;
  int n_used = 0;
  int n_excluded = 0;
  std::string note;
};

inline EventFilter full_space() {
  return [](const TruncatedPath&) { return true; };
}

/// {E(s) <= median over the successful paths of E(s)}.
inline EventFilter low_energy_half(const EnsembleResult& res, std::size_t s_index) {
  std::vector<double> e;
  for (const auto& p : res.paths)
    if (p.ok && s_index < p.diagnostics.size()) e.push_back(p.diagnostics.energy_series[s_index].E);
  double median = 0.0;
  if (!e.empty()) {
    std::sort(e.begin(), e.end());
    const std::size_t m = e.size() / 2;
    median = e.size() % 2 ? e[m] : 0.5 * (e[m - 1] + e[m]);
  }
  return [median](const TruncatedPath& p) { return p.energy.back().E <= median; };
}

/// Pass iff the statistic is at most 2 standard errors (plus tolerance).
inline SupermartingaleResult supermartingale_test(const EnsembleResult& res, std::size_t s_index,
                                                  std::size_t t_index, const EventFilter& event,
                                                  double tolerance = 0.0) {
  if (!(s_index < t_index)) throw ParameterError("supermartingale_test needs s_index < t_index");
  SupermartingaleResult r;
  std::vector<double> v;
  for (const auto& p : res.paths) {
    const auto& d = p.diagnostics;
    if (!p.ok || t_index >= d.size()) {
      ++r.n_excluded;
      continue;
    }
    const std::size_t k = s_index + 1;
    const TruncatedPath tp{std::span(d.times).first(k), std::span(d.energy_series).first(k),
                           std::span(d.G_series).first(k)};
    const bool in = event(tp);
    if (in) ++r.n_event;
    v.push_back(in ? d.G_series[t_index] - d.G_series[s_index] : 0.0);
  }
  r.n_used = static_cast<int>(v.size());
  const int total = r.n_used + r.n_excluded;
  if (total == 0 || r.n_excluded > 0.05 * total) {
    r.note = "more than 5% of paths excluded";
    return r;
  }
  if (r.n_event == 0) {
    r.note = "empty event";
    return r;
  }
  const Moment m = sample_moment(v);
  r.statistic = m.mean;
  r.se = m.se;
  r.verdict = r.statistic <= 2.0 * r.se + tolerance ? Verdict::pass : Verdict::fail;
  return r;
}

}  // namespace schns
