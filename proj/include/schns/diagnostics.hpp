#pragma once

// Energy bookkeeping, the compensated squared-energy process G, Holder
// seminorms of weakly paired velocity paths, and moment tables.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "schns/dynamics.hpp"
#include "schns/regularization.hpp"

namespace schns {

struct EnergyReport {
  double t = 0.0;
  double E = 0.0;
  double kinetic = 0.0;
  double gradient_bulk = 0.0;
  double boundary_l2 = 0.0;
  double boundary_grad = 0.0;
  double bulk_potential = 0.0;
  double boundary_potential = 0.0;
  /// Dissipation rate realised in the step that produced the state.
  double D = 0.0;
  double mass = 0.0;
  bool operator==(const EnergyReport&) const = default;
};

/// eps > 0 evaluates the truncated primitives, matching the stepper.
inline EnergyReport energy(const Grid& g, const State& s, const PotentialSpec& pot, double eps = 0.0) {
  EnergyReport r;
  r.t = s.t;
  r.kinetic = 0.5 * norm_sq(g, s.u);
  r.gradient_bulk = 0.5 * grad_norm_sq_dirichlet(g, s.phi, s.psi);
  r.boundary_l2 = 0.5 * wall_norm_sq(g, s.psi);
  r.boundary_grad = 0.5 * boundary_grad_norm_sq(g, s.psi);
  double fb = 0.0;
  for (double v : s.phi.data()) fb += pot.F_at(v, eps);
  r.bulk_potential = fb * g.cell_area();
  double gb = 0.0;
  for (int i = 0; i < g.nx(); ++i) gb += pot.G_at(s.psi.bottom[i], eps) + pot.G_at(s.psi.top[i], eps);
  r.boundary_potential = gb * g.hx();
  r.E = r.kinetic + r.gradient_bulk + r.boundary_l2 + r.boundary_grad + r.bulk_potential + r.boundary_potential;
  r.D = s.last.dissipation.total();
  r.mass = mean(g, s.phi);
  return r;
}

inline EnergyReport energy(const State& s, const PotentialSpec& pot, const Grid& g) { return energy(g, s, pot); }

/// Mean chemical potential two ways: directly, and from the wall quantities
/// through the discrete Green identity with conserved mass.
struct MuMeanCheck {
  double direct = 0.0;
  double from_wall = 0.0;
};

inline MuMeanCheck mu_mean_identity(const Grid& g, const ChResult& r) {
  MuMeanCheck c;
  c.direct = mean(g, r.mu);
  const double ratio = g.wall_measure() / g.volume();
  c.from_wall = mean(g, r.f_explicit) -
                ratio * (wall_mean(g, r.kpsi) - wall_mean(g, r.psi_theta) - wall_mean(g, r.g_explicit));
  return c;
}

// ---------------------------------------------------------------------------
// Test fields for the weak velocity pairing X_m(t) = (u(t), w_m).

/// Unit-norm solenoidal fields from the stream functions
/// sin^2(pi y / ly) * {1 (shear), cos, sin}(2 pi m x / lx), m = 1..3.
inline std::vector<VectorField> probe_fields(const Grid& g) {
  std::vector<VectorField> out;
  const double ky = std::numbers::pi / g.ly();
  for (int m = 0; m <= 3; ++m) {
    for (int part = 0; part < (m == 0 ? 1 : 2); ++part) {
      const double kx = 2.0 * std::numbers::pi * m / g.lx();
      auto px = [&](double x) { return m == 0 ? 1.0 : (part == 0 ? std::cos(kx * x) : std::sin(kx * x)); };
      auto dpx = [&](double x) { return m == 0 ? 0.0 : (part == 0 ? -kx * std::sin(kx * x) : kx * std::cos(kx * x)); };
      VectorField w(sample(g, [&](double x, double y) { return px(x) * 2.0 * std::sin(ky * y) * std::cos(ky * y) * ky; }),
                    sample(g, [&](double x, double y) { return -dpx(x) * std::pow(std::sin(ky * y), 2); }));
      w *= 1.0 / std::sqrt(norm_sq(g, w));
      out.push_back(std::move(w));
    }
  }
  return out;
}

inline double holder_seminorm(std::span<const double> times, const std::vector<std::vector<double>>& samples,
                              double beta) {
  if (!(beta > 0.0 && beta < 0.5)) throw ParameterError("holder exponent must lie in (0, 1/2)");
  if (times.size() < 2) throw DataError("holder seminorm needs at least two samples");
  if (samples.size() != times.size()) throw DataError("holder seminorm: times and samples differ in length");
  double best = 0.0;
  for (std::size_t a = 0; a < times.size(); ++a) {
    for (std::size_t b = a + 1; b < times.size(); ++b) {
      const double dt = std::abs(times[b] - times[a]);
      if (dt == 0.0) continue;
      double d = 0.0;
      for (std::size_t m = 0; m < samples[a].size(); ++m) d = std::max(d, std::abs(samples[b][m] - samples[a][m]));
      best = std::max(best, d / std::pow(dt, beta));
    }
  }
  return best;
}

inline double holder_seminorm(std::span<const double> times, std::span<const double> values, double beta) {
  std::vector<std::vector<double>> s;
  s.reserve(values.size());
  for (double v : values) s.push_back({v});
  return holder_seminorm(times, s, beta);
}

// ---------------------------------------------------------------------------
// Path recording

/// Which pairing enters the quadratic-variation compensator of G.
enum class Pairing { velocity, phase_gradient };

/// Running sums over every step; restored on resume.
struct Accumulators {
  double E0 = 0.0;
  double E_last = 0.0;
  /// sum dt * (E_{k-1} + E_k)/2 * D_k
  double int_ED = 0.0;
  /// sum dt * E_{k-1} * ||h||_HS^2
  double int_EH = 0.0;
  /// sum dt * compensator pairing
  double int_Q = 0.0;
  double sup_u_sq = 0.0;
  double int_grad_u_sq = 0.0;
  double sup_v1_sq = 0.0;
  double int_grad_mu_sq = 0.0;
  double int_K_sq = 0.0;
  double int_delta_rate_sq = 0.0;
  std::uint64_t steps = 0;
  bool operator==(const Accumulators&) const = default;
};

struct PathRow {
  EnergyReport energy;
  double G = 0.0;
  Accumulators acc;
  NormSample norms;
  std::vector<double> probes;
};

struct PathDiagnostics {
  std::vector<double> times;
  std::vector<EnergyReport> energy_series;
  std::vector<double> mass_series;
  std::vector<double> G_series;
  /// Cumulative terms of G at each record.
  std::vector<Accumulators> noise_terms;
  std::vector<NormSample> norms;
  std::vector<std::vector<double>> probes;
  double holder_seminorm = 0.0;
  std::optional<std::size_t> stopped_at;

  std::size_t size() const { return times.size(); }
};

/// G_n = E_n^2/2 - E_0^2/2 + int E D - int E ||h||^2 - int Q, from the recorded
/// cumulative terms.
inline std::vector<double> supermartingale_process(const PathDiagnostics& path) {
  if (path.noise_terms.size() != path.energy_series.size()) {
    throw DataError("supermartingale_process: recorded terms missing for " +
                    std::to_string(path.energy_series.size() - path.noise_terms.size()) + " samples");
  }
  std::vector<double> out(path.energy_series.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Accumulators& a = path.noise_terms[n];
    const double e = path.energy_series[n].E;
    out[n] = 0.5 * e * e - 0.5 * a.E0 * a.E0 + a.int_ED - a.int_EH - a.int_Q;
  }
  return out;
}

struct RecorderOptions {
  double dt = 1e-4;
  int record_every = 1;
  double eps = 0.0;
  double holder_beta = 0.25;
  double stop_R = std::numeric_limits<double>::infinity();
  StopNorm stop_norm = StopNorm::euclidean;
  Pairing pairing = Pairing::velocity;
};

class PathRecorder {
 public:
  PathRecorder(const Grid& g, const PotentialSpec& pot, const RecorderOptions& opt)
      : grid_(g), pot_(pot), opt_(opt), probes_(probe_fields(g)) {
    if (opt.record_every < 1) throw ParameterError("record_every must be >= 1");
  }

  const RecorderOptions& options() const { return opt_; }
  const Accumulators& accumulators() const { return acc_; }

  /// Begin a fresh path at s, recording it.
  PathRow start(const State& s) {
    acc_ = Accumulators{};
    const EnergyReport e = energy(grid_, s, pot_, opt_.eps);
    acc_.E0 = e.E;
    acc_.E_last = e.E;
    track_sups(s);
    return record(s, e);
  }

  /// Continue a path from saved accumulators without recording.
  void resume(const Accumulators& acc) { acc_ = acc; }

  /// Account for the step that produced s; returns a row on record strides.
  std::optional<PathRow> observe(const State& s) {
    const EnergyReport e = energy(grid_, s, pot_, opt_.eps);
    const double dt = opt_.dt;
    const StepRecord& r = s.last;
    acc_.int_ED += dt * 0.5 * (acc_.E_last + e.E) * r.dissipation.total();
    acc_.int_EH += dt * acc_.E_last * r.hs_norm_sq;
    acc_.int_Q += dt * (opt_.pairing == Pairing::velocity ? r.pairing_u : r.pairing_gradphi);
    acc_.int_grad_u_sq += dt * r.dissipation.viscous;
    acc_.int_grad_mu_sq += dt * r.dissipation.chemical;
    acc_.int_K_sq += dt * r.dissipation.boundary;
    acc_.int_delta_rate_sq += dt * r.dissipation.regularization;
    acc_.E_last = e.E;
    acc_.steps += 1;
    track_sups(s);
    if (acc_.steps % static_cast<std::uint64_t>(opt_.record_every) != 0) return std::nullopt;
    return record(s, e);
  }

  static void append(PathDiagnostics& d, const PathRow& row) {
    d.times.push_back(row.energy.t);
    d.energy_series.push_back(row.energy);
    d.mass_series.push_back(row.energy.mass);
    d.G_series.push_back(row.G);
    d.noise_terms.push_back(row.acc);
    d.norms.push_back(row.norms);
    d.probes.push_back(row.probes);
  }

  /// Holder seminorm and stopping index over the recorded rows.
  void finalize(PathDiagnostics& d) const {
    if (d.times.size() >= 2) d.holder_seminorm = holder_seminorm(d.times, d.probes, opt_.holder_beta);
    if (!d.norms.empty() && std::isfinite(opt_.stop_R)) {
      d.stopped_at = stopping_time_index(d.norms, opt_.stop_R, opt_.stop_norm);
    }
  }

 private:
  void track_sups(const State& s) {
    acc_.sup_u_sq = std::max(acc_.sup_u_sq, norm_sq(grid_, s.u));
    const double v1 = v1_norm(grid_, s.phi, s.psi);
    acc_.sup_v1_sq = std::max(acc_.sup_v1_sq, v1 * v1);
  }

  PathRow record(const State& s, const EnergyReport& e) const {
    PathRow row;
    row.energy = e;
    row.acc = acc_;
    row.G = 0.5 * e.E * e.E - 0.5 * acc_.E0 * acc_.E0 + acc_.int_ED - acc_.int_EH - acc_.int_Q;
    row.norms = {std::sqrt(norm_sq(grid_, s.u)), v1_norm(grid_, s.phi, s.psi)};
    row.probes.reserve(probes_.size());
    for (const auto& w : probes_) row.probes.push_back(inner(grid_, s.u, w));
    return row;
  }

  Grid grid_;
  PotentialSpec pot_;
  RecorderOptions opt_;
  std::vector<VectorField> probes_;
  Accumulators acc_;
};

// ---------------------------------------------------------------------------
// Moments

struct Moment {
  double mean = 0.0;
  double se = 0.0;
};

struct MomentTable {
  double p = 1.0;
  Moment sup_u_sq;
  Moment int_grad_u_sq;
  Moment sup_v1_sq;
  Moment int_grad_mu_sq;
  Moment int_K_sq;
  Moment int_delta_rate_sq;

  static constexpr int count = 6;
  static constexpr const char* names[count] = {"sup_u_sq",       "int_grad_u_sq", "sup_v1_sq",
                                               "int_grad_mu_sq", "int_K_sq",      "int_delta_rate_sq"};
  Moment& at(int k) {
    Moment* m[count] = {&sup_u_sq, &int_grad_u_sq, &sup_v1_sq, &int_grad_mu_sq, &int_K_sq, &int_delta_rate_sq};
    return *m[k];
  }
  const Moment& at(int k) const { return const_cast<MomentTable*>(this)->at(k); }
};

inline double functional(const Accumulators& a, int k) {
  switch (k) {
    case 0: return a.sup_u_sq;
    case 1: return a.int_grad_u_sq;
    case 2: return a.sup_v1_sq;
    case 3: return a.int_grad_mu_sq;
    case 4: return a.int_K_sq;
    default: return a.int_delta_rate_sq;
  }
}

inline Moment sample_moment(const std::vector<double>& v) {
  Moment m;
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double q = 0.0;
    for (double x : v) q += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(q / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return m;
}

/// E[X^p] for each path functional, taken from the final accumulators.
inline MomentTable moment_estimates(const std::vector<Accumulators>& paths, double p) {
  if (paths.empty()) throw DataError("moment_estimates: empty ensemble");
  if (!(p >= 1.0)) throw ParameterError("moment order must be >= 1");
  MomentTable t;
  t.p = p;
  for (int k = 0; k < MomentTable::count; ++k) {
    std::vector<double> v;
    v.reserve(paths.size());
    for (const auto& a : paths) v.push_back(std::pow(functional(a, k), p));
    t.at(k) = sample_moment(v);
  }
  return t;
}

}  // namespace schns
