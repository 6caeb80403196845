#pragma once

// Command implementations behind the schns executable. Output layout under
// the run directory:
//
//   run / resume   diagnostics.csv  checkpoint.bin  config.ini  summary.txt
//   ensemble       ensemble.csv  moments.csv  supermartingale.csv  summary.txt
//                  config.ini  paths/path_NNNN.csv

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "schns/checks.hpp"
#include "schns/io.hpp"

namespace schns::app {

namespace fs = std::filesystem;

inline RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << is.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void prepare_output(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  const fs::path probe = out / ".write_test";
  std::ofstream os(probe);
  if (!os) throw IoError("output directory " + out.string() + " is not writable");
  os.close();
  fs::remove(probe, ec);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

struct RunReport {
  std::uint64_t step = 0;
  double t = 0.0;
  double E = 0.0;
  double mass = 0.0;
  double max_div = 0.0;
  std::size_t rows = 0;
};

inline std::string format_report(const RunReport& r) {
  std::ostringstream os;
  os << "step=" << r.step << " t=" << detail::format_double(r.t) << " E=" << detail::format_double(r.E)
     << " mass=" << detail::format_double(r.mass) << " max_div=" << detail::format_double(r.max_div)
     << " rows=" << r.rows << "\n";
  return os.str();
}

namespace detail {

inline Checkpoint snapshot(const State& s, const Rng& rng, const Accumulators& acc, const ConfigHash& h) {
  return Checkpoint{s, rng.state(), acc, h};
}

/// Step until cfg.ensemble.steps, appending CSV rows and writing checkpoints.
inline RunReport drive(const RunConfig& cfg, State s, Rng rng, PathRecorder& rec, std::vector<CsvRow> rows,
                       std::ostream* log) {
  const EnsembleConfig& e = cfg.ensemble;
  const fs::path out(cfg.output);
  const ConfigHash hash = config_hash(cfg);
  const Stepper stepper(e.grid, e.scheme, e.potentials, e.noise.build(e.grid));
  write_csv(out / "diagnostics.csv", rows);
  std::ofstream csv(out / "diagnostics.csv", std::ios::app);
  if (!csv) throw IoError("cannot append to " + (out / "diagnostics.csv").string());
  RunReport rep;
  const std::uint64_t total = e.steps;
  const std::uint64_t every_log = std::max<std::uint64_t>(1, total / 10);
  while (s.step < total) {
    s = stepper.step(s, rng);
    rep.max_div = std::max(rep.max_div, max_abs(divergence(e.grid, s.u)));
    if (auto row = rec.observe(s)) {
      rows.push_back(csv_row(*row));
      csv << format_csv_row(rows.back()) << '\n' << std::flush;
      if (!csv) throw IoError("write failed: diagnostics.csv");
    }
    if (cfg.checkpoint_every > 0 && s.step % cfg.checkpoint_every == 0) {
      write_checkpoint(out / "checkpoint.bin", snapshot(s, rng, rec.accumulators(), hash));
    }
    if (log && s.step % every_log == 0) {
      *log << "step " << s.step << "/" << total << " t=" << s.t << " E=" << energy(e.grid, s, e.potentials, e.scheme.eps).E
           << "\n";
    }
  }
  write_checkpoint(out / "checkpoint.bin", snapshot(s, rng, rec.accumulators(), hash));
  const EnergyReport er = energy(e.grid, s, e.potentials, e.scheme.eps);
  rep.step = s.step;
  rep.t = s.t;
  rep.E = er.E;
  rep.mass = er.mass;
  rep.rows = rows.size();
  write_text(out / "summary.txt", format_report(rep));
  return rep;
}

}  // namespace detail

/// Single path from the configured initial data with seed split(run.seed, 0).
inline RunReport run(const RunConfig& cfg, std::ostream* log = nullptr) {
  const EnsembleConfig& e = cfg.ensemble;
  e.validate();
  const fs::path out(cfg.output);
  prepare_output(out);
  write_text(out / "config.ini", serialize_config(cfg));
  const Projector proj(e.grid);
  const State s = make_initial_state(e.grid, e.initial, e.potentials, e.scheme.eps, &proj);
  PathRecorder rec(e.grid, e.potentials, e.recorder_options());
  std::vector<CsvRow> rows{csv_row(rec.start(s))};
  return detail::drive(cfg, s, Rng(split_seed(cfg.seed, 0)), rec, std::move(rows), log);
}

/// Continue from a checkpoint written under the same physics; the CSV is cut
/// back to the rows recorded up to the checkpoint, so the result matches an
/// uninterrupted run.
inline RunReport resume(const RunConfig& cfg, const fs::path& checkpoint, std::ostream* log = nullptr) {
  const EnsembleConfig& e = cfg.ensemble;
  e.validate();
  const fs::path out(cfg.output);
  prepare_output(out);
  const ConfigHash hash = config_hash(cfg);
  const Checkpoint c = read_checkpoint(checkpoint, e.grid, &hash);
  if (c.acc.steps != c.state.step) throw FormatError("checkpoint step count and accumulators disagree");
  const std::size_t keep = c.acc.steps / static_cast<std::uint64_t>(e.record_every) + 1;
  std::vector<CsvRow> rows = read_csv(out / "diagnostics.csv");
  if (rows.size() < keep) {
    throw FormatError("diagnostics.csv has " + std::to_string(rows.size()) + " rows, checkpoint needs " +
                      std::to_string(keep));
  }
  rows.resize(keep);
  write_text(out / "config.ini", serialize_config(cfg));
  PathRecorder rec(e.grid, e.potentials, e.recorder_options());
  rec.resume(c.acc);
  Rng rng;
  rng.set_state(c.rng_state);
  return detail::drive(cfg, c.state, rng, rec, std::move(rows), log);
}

struct EnsembleReport {
  int n_paths = 0;
  int n_failed = 0;
  int n_stopped = 0;
  int tests_passed = 0;
  int tests_total = 0;
};

/// Record indices for the (s, t) grid of the supermartingale table.
inline std::vector<std::size_t> test_points(std::size_t records, int count = 5) {
  std::vector<std::size_t> pts;
  if (records < 2) return pts;
  for (int k = 0; k <= count; ++k) {
    const std::size_t idx = (records - 1) * static_cast<std::size_t>(k) / static_cast<std::size_t>(count);
    if (pts.empty() || idx != pts.back()) pts.push_back(idx);
  }
  return pts;
}

inline EnsembleReport ensemble(const RunConfig& cfg, std::ostream* log = nullptr) {
  const EnsembleConfig& e = cfg.ensemble;
  e.validate();
  const fs::path out(cfg.output);
  prepare_output(out);
  fs::create_directories(out / "paths");
  write_text(out / "config.ini", serialize_config(cfg));
  if (log) *log << "running " << e.n_paths << " paths on " << e.threads << " threads\n";
  const EnsembleResult res = run_ensemble(e);
  const EnsembleStats& st = res.stats;

  using schns::detail::format_double;
  for (const auto& p : res.paths) {
    char name[32];
    std::snprintf(name, sizeof name, "path_%04llu.csv", static_cast<unsigned long long>(p.index));
    write_csv(out / "paths" / name, p.diagnostics);
  }
  {
    std::ostringstream os;
    os << "t,E_mean,E_se,mass_mean,mass_se,G_mean,G_se\n";
    for (std::size_t n = 0; n < st.times.size(); ++n) {
      os << format_double(st.times[n]) << ',' << format_double(st.energy[n].mean) << ','
         << format_double(st.energy[n].se) << ',' << format_double(st.mass[n].mean) << ','
         << format_double(st.mass[n].se) << ',' << format_double(st.G[n].mean) << ',' << format_double(st.G[n].se)
         << '\n';
    }
    write_text(out / "ensemble.csv", os.str());
  }
  if (st.n_failed < st.n_paths) {
    std::ostringstream os;
    os << "name,mean,se\n";
    for (int k = 0; k < MomentTable::count; ++k) {
      os << MomentTable::names[k] << ',' << format_double(st.moments.at(k).mean) << ','
         << format_double(st.moments.at(k).se) << '\n';
    }
    write_text(out / "moments.csv", os.str());
  }
  EnsembleReport rep;
  rep.n_paths = st.n_paths;
  rep.n_failed = st.n_failed;
  rep.n_stopped = st.n_stopped;
  {
    std::ostringstream os;
    os << "s,t,event,verdict,statistic,se,n_event,n_excluded\n";
    const auto pts = test_points(st.times.size());
    for (std::size_t a = 0; a + 1 < pts.size(); ++a) {
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        for (int ev = 0; ev < 2; ++ev) {
          const EventFilter f = ev == 0 ? full_space() : low_energy_half(res, pts[a]);
          const SupermartingaleResult r = supermartingale_test(res, pts[a], pts[b], f);
          ++rep.tests_total;
          if (r.verdict == Verdict::pass) ++rep.tests_passed;
          os << format_double(st.times[pts[a]]) << ',' << format_double(st.times[pts[b]]) << ','
             << (ev == 0 ? "full" : "low_energy_half") << ',' << to_string(r.verdict) << ','
             << format_double(r.statistic) << ',' << format_double(r.se) << ',' << r.n_event << ',' << r.n_excluded
             << '\n';
        }
      }
    }
    write_text(out / "supermartingale.csv", os.str());
  }
  std::ostringstream sum;
  sum << "n_paths=" << rep.n_paths << " failed=" << rep.n_failed << " stopped=" << rep.n_stopped
      << " supermartingale_pass=" << rep.tests_passed << "/" << rep.tests_total << "\n";
  for (const auto& p : res.paths)
    if (!p.ok) sum << "path " << p.index << " failed: " << p.error << "\n";
  write_text(out / "summary.txt", sum.str());
  return rep;
}

/// Desk-scale invariant suites; deterministic and independent of wall-clock.
inline std::vector<checks::CheckResult> verify() {
  using namespace checks;
  std::vector<CheckResult> out;
  out.push_back(grid_adjointness());
  out.push_back(potentials_contract());
  out.push_back(mollifier_contract({16, 32, 64}));
  out.push_back(operator_identities(24, 20));
  out.push_back(noise_a1_a2(24, 10));
  out.push_back(ito_isometry(24, 10000, 4));
  out.push_back(cutoff_neutrality(24, 100));
  out.push_back(stopping_detector(24, 200));
  out.push_back(energy_law(32, 1e-4, 2000));
  out.push_back(mass_conservation(trajectory_invariants(24, 1e-4, 200, 2, 11)));
  return out;
}

}  // namespace schns::app
