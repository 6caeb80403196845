#pragma once

// Invariant suites shared by `schns verify` and the acceptance runner. Each
// check is deterministic given its parameters.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "schns/ensemble.hpp"

namespace schns::checks {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Least-squares slope of log(err) against log(step).
inline double fitted_order(const std::vector<double>& step, const std::vector<double>& err) {
  const std::size_t n = step.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = std::log(step[k]), y = std::log(err[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline ScalarField random_field(const Grid& g, Rng& rng) {
  ScalarField f(g);
  for (double& v : f.data()) v = rng.normal();
  return f;
}

inline VectorField random_vector(const Grid& g, Rng& rng) { return {random_field(g, rng), random_field(g, rng)}; }

inline BoundaryField random_wall(const Grid& g, Rng& rng) {
  BoundaryField b(g);
  for (double& v : b.bottom) v = rng.normal();
  for (double& v : b.top) v = rng.normal();
  return b;
}

/// Smooth random field: a few low modes with wall-compatible profiles.
inline ScalarField smooth_random_field(const Grid& g, Rng& rng) {
  double a[3][3];
  for (auto& row : a)
    for (double& v : row) v = rng.normal();
  const double tau = 2.0 * std::numbers::pi;
  return sample(g, [&](double x, double y) {
    double v = 0.0;
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 3; ++n) {
        v += a[m][n] * std::cos(tau * m * x / g.lx() + n) * std::cos(std::numbers::pi * n * y / g.ly());
      }
    return v;
  });
}

inline std::string join_errors(const std::vector<double>& e) {
  std::string s;
  for (std::size_t k = 0; k < e.size(); ++k) s += (k ? "/" : "") + fmt(e[k]);
  return s;
}

}  // namespace detail

/// Baseline flow used by the dynamics checks: a cosine phase pattern and a
/// single-cell shear vortex.
inline InitialCondition standard_initial() {
  InitialCondition ic;
  ic.kind = "cosine";
  ic.phi_mean = 0.2;
  ic.phi_amp = 0.5;
  ic.u_amp = 1.0;
  return ic;
}

// ---------------------------------------------------------------------------
// Grid operators

inline CheckResult grid_adjointness(int n = 32, int trials = 10, std::uint64_t seed = 1) {
  const Grid g(n, n);
  Rng rng(seed);
  double worst_adj = 0.0, worst_sym = 0.0, worst_mean = 0.0, worst_green = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ScalarField f = detail::random_field(g, rng);
    const ScalarField h = detail::random_field(g, rng);
    const VectorField v = detail::random_vector(g, rng);
    const BoundaryField w = detail::random_wall(g, rng);
    worst_adj = std::max(worst_adj, std::abs(inner(g, divergence(g, v), f) + inner(g, v, gradient(g, f))));
    worst_sym = std::max(worst_sym, std::abs(inner(g, laplacian_neumann(g, f), h) -
                                             inner(g, f, laplacian_neumann(g, h))));
    worst_mean = std::max(worst_mean, std::abs(integrate(g, laplacian_neumann(g, f))));
    worst_green = std::max(worst_green, std::abs(integrate(g, laplacian_dirichlet(g, f, w)) -
                                                 wall_integral(g, wall_flux(g, f, w))));
  }
  const double worst = std::max({worst_adj, worst_sym, worst_mean, worst_green});
  return {"grid adjointness", worst <= 1e-10,
          "(div v,f)+(v,grad f)=" + detail::fmt(worst_adj) + " symmetry=" + detail::fmt(worst_sym) +
              " int lap=" + detail::fmt(worst_mean) + " green=" + detail::fmt(worst_green)};
}

// ---------------------------------------------------------------------------
// Potentials

inline CheckResult potentials_contract(std::uint64_t seed = 2) {
  const PotentialSpec pots[] = {
      PotentialSpec(),
      PotentialSpec(BulkKind::polynomial, {0.0, -0.5, 0.2, 1.0}, BoundaryKind::double_well),
  };
  Rng rng(seed);
  double worst_prim = 0.0, worst_trunc = 0.0, worst_lip = 0.0, worst_floor = 0.0;
  for (const auto& p : pots) {
    for (double eps : {0.5, 0.25}) {
      const double m = PotentialSpec::truncation_radius(eps);
      const double lf = p.lipschitz_f(eps), lg = p.lipschitz_g(eps);
      for (int t = 0; t < 200; ++t) {
        const double r = 3.0 * m * (2.0 * rng.uniform() - 1.0);
        const double s = 3.0 * m * (2.0 * rng.uniform() - 1.0);
        const double h = 1e-5 * std::max(1.0, std::abs(r));
        const double dF = (p.F_eps(r + h, eps) - p.F_eps(r - h, eps)) / (2 * h);
        const double dG = (p.G_eps(r + h, eps) - p.G_eps(r - h, eps)) / (2 * h);
        worst_prim = std::max({worst_prim, std::abs(dF - p.f_eps(r, eps)) / std::max(1.0, std::abs(p.f_eps(r, eps))),
                               std::abs(dG - p.g_eps(r, eps)) / std::max(1.0, std::abs(p.g_eps(r, eps)))});
        if (std::abs(r) <= m) {
          worst_trunc = std::max({worst_trunc, std::abs(p.f_eps(r, eps) - p.f(r)), std::abs(p.g_eps(r, eps) - p.g(r))});
        }
        const double d = std::abs(r - s);
        worst_lip = std::max({worst_lip, std::abs(p.f_eps(r, eps) - p.f_eps(s, eps)) - lf * d * (1 + 1e-12),
                              std::abs(p.g_eps(r, eps) - p.g_eps(s, eps)) - lg * d * (1 + 1e-12)});
        worst_floor = std::max({worst_floor, -p.c2() - p.F(r), -p.c2() - p.G(r)});
      }
    }
  }
  const bool ok = worst_prim <= 1e-6 && worst_trunc == 0.0 && worst_lip <= 1e-9 && worst_floor <= 1e-12;
  return {"potentials", ok,
          "F'=f rel=" + detail::fmt(worst_prim) + " inside-radius=" + detail::fmt(worst_trunc) +
              " lipschitz excess=" + detail::fmt(worst_lip) + " floor excess=" + detail::fmt(worst_floor)};
}

// ---------------------------------------------------------------------------
// Mollifier

inline CheckResult mollifier_contract(const std::vector<int>& sizes = {32, 64, 128}, std::uint64_t seed = 3) {
  Rng rng(seed);
  bool ok = true;
  std::ostringstream os;
  for (int n : sizes) {
    const Grid g(n, n);
    const double h = g.hx();
    double worst_norm = 0.0, worst_max = 0.0, worst_mean = 0.0, worst_wall = 0.0;
    for (int t = 0; t < 5; ++t) {
      const ScalarField f = detail::random_field(g, rng);
      const BoundaryField b = detail::random_wall(g, rng);
      for (double eps : {h, 2 * h, 4 * h}) {
        const ScalarField jf = mollify(g, f, eps);
        worst_norm = std::max(worst_norm, std::sqrt(norm_sq(g, jf)) - std::sqrt(norm_sq(g, f)));
        worst_max = std::max(worst_max, max_abs(jf) - max_abs(f));
        worst_mean = std::max(worst_mean, std::abs(mean(g, jf) - mean(g, f)));
        const BoundaryField jb = mollify_boundary(g, b, eps);
        worst_wall = std::max(worst_wall, std::sqrt(wall_norm_sq(g, jb)) - std::sqrt(wall_norm_sq(g, b)));
      }
    }
    // Convergence on a smooth field as eps decreases.
    const ScalarField s = detail::smooth_random_field(g, rng);
    std::vector<double> errs;
    for (double eps : {8 * h, 4 * h, 2 * h, h}) errs.push_back(std::sqrt(norm_sq(g, mollify(g, s, eps) - s)));
    bool monotone = true;
    for (std::size_t k = 1; k < errs.size(); ++k) monotone = monotone && errs[k] < errs[k - 1];
    const bool here = worst_norm <= 1e-12 && worst_max <= 1e-12 && worst_mean <= 1e-12 && worst_wall <= 1e-12 &&
                      monotone;
    ok = ok && here;
    os << "n=" << n << (here ? " ok" : " FAIL") << " (norm excess " << detail::fmt(std::max(worst_norm, worst_wall))
       << ", mean drift " << detail::fmt(worst_mean) << ", |J f - f| " << detail::join_errors(errs) << ") ";
  }
  return {"mollifier contract", ok, os.str()};
}

// ---------------------------------------------------------------------------
// Trilinear forms

inline CheckResult operator_identities(int n = 32, int trials = 100, std::uint64_t seed = 4) {
  const Grid g(n, n);
  const Projector proj(g);
  Rng rng(seed);
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    const VectorField u = proj.apply(detail::random_vector(g, rng));
    const VectorField v = detail::random_vector(g, rng);
    const ScalarField mu = detail::random_field(g, rng);
    const ScalarField phi = detail::random_field(g, rng);
    const BoundaryField psi = detail::random_wall(g, rng);
    const BoundaryField k = detail::random_wall(g, rng);
    const BoundaryField ut = wall_slip(g, u.x, BoundaryField(g));
    w0 = std::max(w0, std::abs(bilinear_b0(g, u, v, v)));
    w1 = std::max(w1, std::abs(bilinear_b1(g, mu, phi, u) - bilinear_b2(g, u, phi, mu)));
    const BoundaryField dpsi = boundary_gradient(g, psi);
    double direct = 0.0;
    for (int i = 0; i < g.nx(); ++i) {
      direct += k.bottom[i] * dpsi.bottom[i] * ut.bottom[i] + k.top[i] * dpsi.top[i] * ut.top[i];
    }
    direct *= g.hx();
    w2 = std::max(w2, std::abs(bilinear_bGamma(g, ut, psi, k) - direct));
  }
  const double worst = std::max({w0, w1, w2});
  return {"operator identities", worst <= 1e-10,
          "|B0(u,v,v)|=" + detail::fmt(w0) + " |B1-B2|=" + detail::fmt(w1) + " |BGamma-(K dpsi,u)|=" +
              detail::fmt(w2) + " over " + std::to_string(trials) + " triples"};
}

// ---------------------------------------------------------------------------
// Noise

inline CheckResult noise_a1_a2(int n = 32, int trials = 20, std::uint64_t seed = 5) {
  const Grid g(n, n);
  double worst_a1 = -1e300, worst_a2 = -1e300, worst_lin = 0.0;
  Rng rng(seed);
  for (const auto& [au, ap] : {std::pair{1.0, 0.0}, std::pair{0.0, 1.0}, std::pair{0.7, 0.4}}) {
    const NoiseModel m = NoiseModel::channel_modes(g, 16, 0.5, 1.0, au, ap);
    const double c = m.a1_constant();
    for (int t = 0; t < trials; ++t) {
      const VectorField u1 = detail::random_vector(g, rng), u2 = detail::random_vector(g, rng);
      const VectorField g1 = gradient(g, detail::random_field(g, rng));
      const VectorField g2 = gradient(g, detail::random_field(g, rng));
      const double hs = m.hs_norm_sq(u1, g1);
      worst_a1 = std::max(worst_a1, hs - c * (1.0 + norm_sq(g, u1) + norm_sq(g, g1)));
      double diff = 0.0;
      for (int k = 0; k < m.modes(); ++k) diff += norm_sq(g, m.mode_field(u1, g1, k) - m.mode_field(u2, g2, k));
      const VectorField du = u1 - u2, dg = g1 - g2;
      worst_a2 = std::max(worst_a2, diff - c * (norm_sq(g, du) + norm_sq(g, dg)));
      worst_lin = std::max(worst_lin, std::abs(diff - m.hs_norm_sq(du, dg)) / std::max(1.0, diff));
    }
  }
  const bool ok = worst_a1 <= 1e-10 && worst_a2 <= 1e-10 && worst_lin <= 1e-10;
  return {"noise A1/A2", ok,
          "max(hs - C(1+|x|^2))=" + detail::fmt(worst_a1) + " max(|dh|^2 - C|dx|^2)=" + detail::fmt(worst_a2) +
              " linearity=" + detail::fmt(worst_lin)};
}

/// Var <int h dW, v> against int sum_k (h_k, v)^2 for frozen arguments.
inline CheckResult ito_isometry(int n = 32, int samples = 10000, int steps = 10, std::uint64_t seed = 6) {
  const Grid g(n, n);
  const NoiseModel m = NoiseModel::channel_modes(g, 16, 0.5, 1.0, 1.0, 0.5);
  Rng rng(seed);
  const VectorField u = detail::random_vector(g, rng);
  const VectorField gp = gradient(g, detail::smooth_random_field(g, rng));
  const VectorField v = probe_fields(g)[1];
  const double dt = 1e-3;
  // The pairing is linear in dW: <h dW, v> = sum_k dW_k (h_k, v).
  const std::vector<double> pk = m.pairings(u, gp, v);
  double expect = 0.0;
  for (double p : pk) expect += p * p;
  expect *= dt * steps;
  std::vector<double> xs;
  xs.reserve(samples);
  for (int s = 0; s < samples; ++s) {
    std::vector<double> w(m.modes(), 0.0);
    for (int k = 0; k < steps; ++k) {
      const NoiseIncrement inc = m.sample_increments(dt, rng);
      for (int q = 0; q < m.modes(); ++q) w[q] += inc.dW[q];
    }
    const VectorField x = m.apply_h(u, gp, NoiseIncrement{w, dt * steps});
    xs.push_back(inner(g, x, v));
  }
  double var = 0.0, mean = 0.0;
  for (double x : xs) mean += x;
  mean /= samples;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= samples - 1;
  const double rel = std::abs(var / expect - 1.0);
  return {"ito isometry", rel <= 0.05,
          "Var=" + detail::fmt(var) + " expected=" + detail::fmt(expect) + " rel=" + detail::fmt(rel) + " over " +
              std::to_string(samples) + " samples"};
}

// ---------------------------------------------------------------------------
// Cut-off

inline NoiseSpec standard_noise() { return NoiseSpec{}; }

struct CutoffRun {
  std::vector<State> states;
  std::vector<NormSample> norms;
};

inline CutoffRun run_with_cutoff(const Grid& g, SchemeParams p, const std::optional<NoiseModel>& noise,
                                 const InitialCondition& ic, int steps, std::uint64_t seed, bool keep_states) {
  const Stepper st(g, p, PotentialSpec(), noise);
  State s = make_initial_state(g, ic, PotentialSpec(), p.eps, &st.projector());
  Rng rng(seed);
  CutoffRun out;
  auto record = [&] {
    out.norms.push_back({std::sqrt(norm_sq(g, s.u)), v1_norm(g, s.phi, s.psi)});
    if (keep_states) out.states.push_back(s);
  };
  record();
  for (int k = 0; k < steps; ++k) {
    s = st.step(s, rng);
    record();
  }
  return out;
}

/// R = 10 x the largest trajectory norm reproduces the disabled cut-off bit for bit.
inline CheckResult cutoff_neutrality(int n = 32, int steps = 200, double dt = 1e-4, std::uint64_t seed = 7) {
  const Grid g(n, n);
  SchemeParams p;
  p.dt = dt;
  const auto noise = standard_noise().build(g);
  const InitialCondition ic = standard_initial();
  const CutoffRun off = run_with_cutoff(g, p, noise, ic, steps, seed, true);
  double big = 0.0;
  for (const auto& s : off.norms) big = std::max({big, s.u_norm, s.v1_norm});
  p.R = 10.0 * big;
  const CutoffRun on = run_with_cutoff(g, p, noise, ic, steps, seed, true);
  std::size_t first_diff = on.states.size();
  for (std::size_t k = 0; k < on.states.size(); ++k) {
    State a = on.states[k], b = off.states[k];
    if (!(a.u == b.u && a.phi == b.phi && a.psi == b.psi && a.mu == b.mu && a.kpsi == b.kpsi)) {
      first_diff = k;
      break;
    }
  }
  const bool ok = first_diff == on.states.size();
  return {"cut-off neutrality", ok,
          "R=" + detail::fmt(p.R) + ", " + std::to_string(steps) + " steps " +
              (ok ? "bit-identical" : "differ from step " + std::to_string(first_diff))};
}

/// Small R: the detector's index equals a brute-force scan of the recorded norms.
inline CheckResult stopping_detector(int n = 32, int steps = 300, double dt = 1e-4, std::uint64_t seed = 8) {
  const Grid g(n, n);
  SchemeParams p;
  p.dt = dt;
  NoiseSpec ns;
  ns.sigma0 = 2.0;
  ns.alpha_phi = 1.0;
  const auto noise = ns.build(g);
  InitialCondition ic = standard_initial();
  ic.u_amp = 0.0;
  const CutoffRun pilot = run_with_cutoff(g, p, noise, ic, steps, seed, false);
  double top = 0.0;
  for (const auto& s : pilot.norms) top = std::max(top, s.u_norm);
  bool ok = true;
  int interior = 0;
  std::ostringstream os;
  for (double frac : {0.25, 0.5, 0.9, 2.0}) {
    p.R = 0.5 * frac * top;
    const CutoffRun r = run_with_cutoff(g, p, noise, ic, steps, seed, false);
    const auto idx = stopping_time_index(r.norms, p.R, StopNorm::velocity);
    std::optional<std::size_t> brute;
    for (std::size_t k = 0; k < r.norms.size() && !brute; ++k)
      if (r.norms[k].u_norm >= 2.0 * p.R) brute = k;
    ok = ok && idx == brute;
    if (idx && *idx > 0) ++interior;
    os << "R=" << detail::fmt(p.R) << ":" << (idx ? std::to_string(*idx) : std::string("END")) << " ";
  }
  // The euclidean monitor on the same recorded data.
  const auto e_idx = stopping_time_index(pilot.norms, 0.5 * pilot.norms.back().v1_norm, StopNorm::euclidean);
  std::optional<std::size_t> e_brute;
  for (std::size_t k = 0; k < pilot.norms.size() && !e_brute; ++k) {
    if (std::hypot(pilot.norms[k].u_norm, pilot.norms[k].v1_norm) >= pilot.norms.back().v1_norm) e_brute = k;
  }
  ok = ok && e_idx == e_brute && interior > 0;
  return {"stopping time", ok, os.str() + "(" + std::to_string(interior) + " interior crossings)"};
}

// ---------------------------------------------------------------------------
// Trajectory invariants

struct TrajectoryStats {
  double max_mass_drift = 0.0;
  double max_div = 0.0;
  double max_trace = 0.0;
  int failed_paths = 0;
  std::string first_error;
};

/// Noise-on paths: mass drift, divergence and trace after every step.
inline TrajectoryStats trajectory_invariants(int n, double dt, int steps, int paths, std::uint64_t seed) {
  const Grid g(n, n);
  SchemeParams p;
  p.dt = dt;
  const auto noise = standard_noise().build(g);
  const Stepper st(g, p, PotentialSpec(), noise);
  TrajectoryStats out;
  for (int i = 0; i < paths; ++i) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(i)));
    try {
      State s = make_initial_state(g, standard_initial(), PotentialSpec(), 0.0, &st.projector());
      const double m0 = mean(g, s.phi);
      for (int k = 0; k < steps; ++k) {
        s = st.step(s, rng);
        out.max_mass_drift = std::max(out.max_mass_drift, std::abs(mean(g, s.phi) - m0));
        out.max_div = std::max(out.max_div, max_abs(divergence(g, s.u)));
        out.max_trace = std::max(out.max_trace, trace_mismatch(g, s.phi, s.psi));
      }
    } catch (const Error& e) {
      ++out.failed_paths;
      if (out.first_error.empty()) out.first_error = e.what();
    }
  }
  return out;
}

inline CheckResult mass_conservation(const TrajectoryStats& t, double tol = 1e-9) {
  const bool ok = t.failed_paths == 0 && t.max_mass_drift <= tol;
  return {"mass conservation", ok,
          "max |<phi(t)> - <phi(0)>| = " + detail::fmt(t.max_mass_drift) +
              (t.failed_paths ? " failed paths: " + std::to_string(t.failed_paths) + " (" + t.first_error + ")" : "")};
}

inline CheckResult divergence_control(const TrajectoryStats& t, double tol = 1e-10) {
  const bool ok = t.failed_paths == 0 && t.max_div <= tol;
  return {"divergence control", ok, "max ||div u||_inf = " + detail::fmt(t.max_div)};
}

struct EnergyLawRun {
  double E0 = 0.0;
  /// max over n of |E(t_n) + sum dt D - E(0)|
  double max_defect = 0.0;
  /// the same at the final step
  double final_defect = 0.0;
};

inline EnergyLawRun energy_law_run(int n, double dt, int steps, const InitialCondition& ic) {
  const Grid g(n, n);
  SchemeParams p;
  p.dt = dt;
  const PotentialSpec pot;
  const Stepper st(g, p, pot);
  State s = make_initial_state(g, ic, pot, 0.0, &st.projector());
  EnergyLawRun r;
  r.E0 = energy(g, s, pot).E;
  double sumD = 0.0;
  for (int k = 0; k < steps; ++k) {
    s = st.step(s, nullptr);
    sumD += dt * s.last.dissipation.total();
    r.final_defect = std::abs(energy(g, s, pot).E + sumD - r.E0);
    r.max_defect = std::max(r.max_defect, r.final_defect);
  }
  return r;
}

/// Noise off: |E(t_n) + sum dt D - E(0)| within tol * max(E0, 1) at every step,
/// and halving dt shrinks the defect at the final time at least twofold.
inline CheckResult energy_law(int n = 64, double dt = 1e-4, int steps = 5000, double tol = 0.02) {
  const InitialCondition ic = standard_initial();
  const EnergyLawRun a = energy_law_run(n, dt, steps, ic);
  const EnergyLawRun b = energy_law_run(n, 0.5 * dt, 2 * steps, ic);
  const double bound = tol * std::max(a.E0, 1.0);
  const double ratio = a.final_defect / b.final_defect;
  const bool ok = a.max_defect <= bound && b.max_defect <= bound && ratio >= 2.0;
  return {"energy law", ok,
          "E0=" + detail::fmt(a.E0) + " max defect=" + detail::fmt(a.max_defect) + " bound=" + detail::fmt(bound) +
              "; final defect dt=" + detail::fmt(a.final_defect) + " dt/2=" + detail::fmt(b.final_defect) +
              " ratio=" + detail::fmt(ratio) + " (max-over-time ratio " +
              detail::fmt(a.max_defect / b.max_defect) + ")"};
}

// ---------------------------------------------------------------------------
// Manufactured solutions

/// phi = m + e^{-t} P(x, y) with P a sum of Laplace eigenterms whose y-derivative
/// vanishes on both walls, so d_n phi = d_n mu = 0 there.
struct ChExact {
  double m = 0.2, a = 0.5, b = 0.3, delta = 0.01;

  struct Term {
    double c, kx, ky;
    bool sine;
  };
  std::vector<Term> terms() const {
    const double tau = 2.0 * std::numbers::pi, pi = std::numbers::pi;
    return {{a, tau, pi, false}, {0.5 * b, tau, 0.0, true}, {0.5 * b, tau, tau, true}};
  }

  // P, grad P, Laplacian P, bilaplacian P at (x, y).
  void eval(double x, double y, double& p, double& px, double& py, double& lp, double& llp) const {
    p = px = py = lp = llp = 0.0;
    for (const Term& t : terms()) {
      const double cx = t.sine ? std::sin(t.kx * x) : std::cos(t.kx * x);
      const double dx = t.sine ? t.kx * std::cos(t.kx * x) : -t.kx * std::sin(t.kx * x);
      const double cy = std::cos(t.ky * y), dy = -t.ky * std::sin(t.ky * y);
      const double lam = t.kx * t.kx + t.ky * t.ky;
      p += t.c * cx * cy;
      px += t.c * dx * cy;
      py += t.c * cx * dy;
      lp -= lam * t.c * cx * cy;
      llp += lam * lam * t.c * cx * cy;
    }
  }

  double phi(double x, double y, double t) const {
    double p, px, py, lp, llp;
    eval(x, y, p, px, py, lp, llp);
    return m + std::exp(-t) * p;
  }

  /// phi_t - Lap mu with mu = -Lap phi + delta phi_t + phi^3 - phi.
  double source(double x, double y, double t) const {
    double p, px, py, lp, llp;
    eval(x, y, p, px, py, lp, llp);
    const double e = std::exp(-t);
    const double ph = m + e * p;
    const double grad2 = e * e * (px * px + py * py);
    const double lap_f = (3 * ph * ph - 1) * e * lp + 6 * ph * grad2;
    return -e * p + e * llp + delta * e * lp - lap_f;
  }

  /// psi_t + K with K = -psi_xx + psi + psi (linear g, zero normal derivative).
  double wall_source(double x, double y, double t) const {
    const double ps = phi(x, y, t);
    const double tau = 2.0 * std::numbers::pi;
    const double dev = ps - m;
    return -dev + tau * tau * dev + 2.0 * ps;
  }
};

/// How manufactured forcing is built: from the continuous operators, or from
/// the discrete operators applied to the sampled solution. The second makes the
/// sampled field an exact solution in space, so only the time error remains.
enum class Forcing { continuous, semi_discrete };

/// L2 error of phi after T for the default CN scheme with extrapolated explicit terms.
inline double ch_mms_error(int n, double dt, double T, Forcing forcing = Forcing::continuous) {
  const Grid g(n, n);
  const ChExact ex;
  const CahnHilliardSolver ch(g, dt, 0.5, ex.delta);
  const PotentialSpec pot;
  auto exact = [&](double t) { return sample(g, [&](double x, double y) { return ex.phi(x, y, t); }); };
  auto exact_wall = [&](double t) { return sample_walls(g, [&](double x, double y) { return ex.phi(x, y, t); }); };
  auto sources = [&](double t, ScalarField& s, BoundaryField& sw) {
    if (forcing == Forcing::continuous) {
      s = sample(g, [&](double x, double y) { return ex.source(x, y, t); });
      sw = sample_walls(g, [&](double x, double y) { return ex.wall_source(x, y, t); });
      return;
    }
    // phi_t = -(phi - m) and psi_t = -psi + m for the sampled solution.
    const ScalarField phi = exact(t);
    const BoundaryField psi = exact_wall(t);
    ScalarField rate = phi;
    for (double& v : rate.data()) v = ex.m - v;
    BoundaryField wrate = psi;
    wrate *= -1.0;
    wrate += BoundaryField(g, ex.m);
    ScalarField mu = map_field(phi, [&](double r) { return pot.f(r); }) - laplacian_dirichlet(g, phi, psi);
    mu.axpy(ex.delta, rate);
    s = rate - laplacian_neumann(g, mu);
    sw = wrate + wall_operator(g, phi, psi) + map_field(psi, [&](double r) { return pot.g(r); });
  };
  ScalarField phi = exact(0.0), phi_old = phi;
  BoundaryField psi = exact_wall(0.0), psi_old = psi;
  const int steps = static_cast<int>(std::lround(T / dt));
  double t = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double th = 0.5;
    ScalarField pe = phi;
    BoundaryField se = psi;
    if (k > 0) {
      pe = (1 + th) * phi;
      pe.axpy(-th, phi_old);
      se = (1 + th) * psi;
      se.axpy(-th, psi_old);
    }
    ChInput in;
    in.phi = phi;
    in.psi = psi;
    in.f_explicit = map_field(pe, [&](double r) { return pot.f(r); });
    in.g_explicit = map_field(se, [&](double r) { return pot.g(r); });
    in.advection = ScalarField(g);
    in.wall_advection = BoundaryField(g);
    in.source.emplace();
    in.wall_source.emplace();
    sources(t + th * dt, *in.source, *in.wall_source);
    ChResult r = ch.solve(in);
    phi_old = std::move(phi);
    psi_old = std::move(psi);
    phi = std::move(r.phi);
    psi = std::move(r.psi);
    t += dt;
  }
  return std::sqrt(norm_sq(g, phi - exact(t)) / g.volume());
}

/// Velocity from the stream function sin(2 pi x) sin^2(pi y) e^{-t} with pressure
/// 0.3 cos(2 pi x) cos(pi y) e^{-t}; force and slip data compensate.
struct StokesExact {
  static constexpr double pi = std::numbers::pi;
  static constexpr double tau = 2.0 * std::numbers::pi;
  double ux(double x, double y, double t) const { return pi * std::sin(tau * x) * std::sin(tau * y) * std::exp(-t); }
  double uy(double x, double y, double t) const {
    return -tau * std::cos(tau * x) * std::pow(std::sin(pi * y), 2) * std::exp(-t);
  }
  double fx(double x, double y, double t) const {
    return (8 * pi * pi - 1) * ux(x, y, t) - 0.3 * tau * std::sin(tau * x) * std::cos(pi * y) * std::exp(-t);
  }
  double fy(double x, double y, double t) const {
    const double e = std::exp(-t);
    const double lap = 4 * pi * pi * pi * std::cos(tau * x) - 8 * pi * pi * pi * std::cos(tau * x) * std::cos(tau * y);
    return -uy(x, y, t) - lap * e - 0.3 * pi * std::cos(tau * x) * std::sin(pi * y) * e;
  }
  /// -d_y u_x + u_x on the bottom wall; the top wall carries the negative.
  double ell_bottom(double x, double t) const { return -2 * pi * pi * std::sin(tau * x) * std::exp(-t); }
};

inline double stokes_mms_error(int n, double dt, double T, Forcing forcing = Forcing::continuous) {
  const Grid g(n, n);
  const StokesExact ex;
  const StokesSolver st(g, dt, 0.5);
  auto sampled = [&](double t) {
    return VectorField(sample(g, [&](double x, double y) { return ex.ux(x, y, t); }),
                       sample(g, [&](double x, double y) { return ex.uy(x, y, t); }));
  };
  // Semi-discrete: the discretely solenoidal U e^{-t} with pressure p e^{-t}.
  const Projector proj(g);
  const VectorField U = proj.apply(sampled(0.0));
  const ScalarField P = sample(g, [&](double x, double y) {
    return 0.3 * std::cos(StokesExact::tau * x) * std::cos(StokesExact::pi * y);
  });
  auto exact = [&](double t) {
    if (forcing == Forcing::continuous) return sampled(t);
    return std::exp(-t) * U;
  };
  auto slip = [&](double t) {
    BoundaryField ell(g);
    for (int i = 0; i < g.nx(); ++i) {
      ell.bottom[i] = ex.ell_bottom(g.x(i), t);
      ell.top[i] = -ell.bottom[i];
    }
    return ell;
  };
  auto force = [&](double t) {
    if (forcing == Forcing::continuous) {
      return VectorField(sample(g, [&](double x, double y) { return ex.fx(x, y, t); }),
                         sample(g, [&](double x, double y) { return ex.fy(x, y, t); }));
    }
    const VectorField u = exact(t);
    VectorField f = -1.0 * u;
    f -= vector_laplacian(g, u, slip(t));
    f.axpy(std::exp(-t), gradient(g, P));
    return f;
  };
  VectorField u = exact(0.0);
  const int steps = static_cast<int>(std::lround(T / dt));
  double t = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double tm = t + 0.5 * dt;
    u = st.solve(u, force(tm), slip(tm));
    t += dt;
  }
  return std::sqrt(norm_sq(g, u - exact(t)) / g.volume());
}

struct OrderLadder {
  std::vector<double> steps, errors;
  double order = 0.0;
};

inline OrderLadder ladder(const std::vector<double>& steps, auto&& error_at) {
  OrderLadder l;
  l.steps = steps;
  for (double s : steps) l.errors.push_back(error_at(s));
  l.order = detail::fitted_order(l.steps, l.errors);
  return l;
}

struct MmsPlan {
  std::vector<int> sizes = {16, 32, 64};
  double h_dt = 1e-4;
  double h_T = 0.01;
  int dt_n = 64;
  std::vector<double> dts = {0.02, 0.01, 0.005};
  double dt_T = 0.2;
};

inline CheckResult substep_orders(const MmsPlan& plan = {}) {
  std::vector<double> hs;
  for (int n : plan.sizes) hs.push_back(1.0 / n);
  auto size_of = [](double h) { return static_cast<int>(std::lround(1.0 / h)); };
  const OrderLadder ch_h = ladder(hs, [&](double h) { return ch_mms_error(size_of(h), plan.h_dt, plan.h_T); });
  const OrderLadder st_h = ladder(hs, [&](double h) { return stokes_mms_error(size_of(h), plan.h_dt, plan.h_T); });
  const OrderLadder ch_t = ladder(plan.dts, [&](double dt) { return ch_mms_error(plan.dt_n, dt, plan.dt_T, Forcing::semi_discrete); });
  const OrderLadder st_t = ladder(plan.dts, [&](double dt) { return stokes_mms_error(plan.dt_n, dt, plan.dt_T, Forcing::semi_discrete); });
  auto in_h = [](double p) { return p >= 1.8 && p <= 2.2; };
  const bool ok = in_h(ch_h.order) && in_h(st_h.order) && ch_t.order >= 0.9 && st_t.order >= 0.9;
  std::ostringstream os;
  os << "h-order CH " << detail::fmt(ch_h.order) << " [" << detail::join_errors(ch_h.errors) << "] Stokes "
     << detail::fmt(st_h.order) << " [" << detail::join_errors(st_h.errors) << "]; dt-order CH "
     << detail::fmt(ch_t.order) << " [" << detail::join_errors(ch_t.errors) << "] Stokes " << detail::fmt(st_t.order)
     << " [" << detail::join_errors(st_t.errors) << "]";
  return {"substep orders", ok, os.str()};
}

// ---------------------------------------------------------------------------
// Ensemble statistics

struct SupermartingalePlan {
  int n = 64;
  double dt = 1e-4;
  double T = 0.25;
  int paths = 64;
  int grid_points = 5;
  int threads = 1;
  std::uint64_t seed = 9;
};

inline CheckResult supermartingale(const SupermartingalePlan& plan = {}) {
  EnsembleConfig cfg;
  cfg.grid = Grid(plan.n, plan.n);
  cfg.scheme.dt = plan.dt;
  cfg.initial = standard_initial();
  cfg.n_paths = plan.paths;
  cfg.base_seed = plan.seed;
  cfg.steps = static_cast<std::uint64_t>(std::lround(plan.T / plan.dt));
  cfg.record_every = static_cast<int>(cfg.steps / plan.grid_points);
  cfg.threads = plan.threads;
  const EnsembleResult res = run_ensemble(cfg);
  int tested = 0, passed = 0, excluded = 0;
  double worst_z = -1e300;
  std::string fail;
  for (int si = 0; si < plan.grid_points; ++si) {
    for (int ti = si + 1; ti <= plan.grid_points; ++ti) {
      for (int ev = 0; ev < 2; ++ev) {
        const EventFilter a = ev == 0 ? full_space() : low_energy_half(res, static_cast<std::size_t>(si));
        const SupermartingaleResult r = supermartingale_test(res, si, ti, a);
        ++tested;
        excluded = std::max(excluded, r.n_excluded);
        if (r.verdict == Verdict::pass) ++passed;
        else if (fail.empty()) fail = " first failure (s,t,event)=(" + std::to_string(si) + "," + std::to_string(ti) +
                                      "," + std::to_string(ev) + "): " + to_string(r.verdict) + " " + r.note;
        if (r.se > 0) worst_z = std::max(worst_z, r.statistic / r.se);
      }
    }
  }
  const bool ok = passed == tested && excluded <= plan.paths / 20;
  return {"energy inequality in expectation", ok,
          std::to_string(passed) + "/" + std::to_string(tested) + " (s,t,event) tests pass, max statistic/se=" +
              detail::fmt(worst_z) + ", excluded paths=" + std::to_string(excluded) + fail};
}

struct RobustnessPlan {
  int n = 64;
  double dt = 1e-4;
  double T = 0.1;
  int paths = 16;
  int threads = 1;
  std::uint64_t seed = 10;
  double rel_tol = 0.25;
};

/// Paired-seed moment tables over eps in {4h, 2h} and delta in {1e-3, 1e-4}.
inline CheckResult regularization_robustness(const RobustnessPlan& plan = {}) {
  const Grid g(plan.n, plan.n);
  struct Cell {
    double eps, delta;
    MomentTable m;
  };
  std::vector<Cell> cells;
  for (double ef : {4.0, 2.0})
    for (double delta : {1e-3, 1e-4}) cells.push_back({ef * g.hx(), delta, {}});
  for (Cell& c : cells) {
    EnsembleConfig cfg;
    cfg.grid = g;
    cfg.scheme.dt = plan.dt;
    cfg.scheme.eps = c.eps;
    cfg.scheme.delta = c.delta;
    cfg.initial = standard_initial();
    cfg.n_paths = plan.paths;
    cfg.base_seed = plan.seed;
    cfg.steps = static_cast<std::uint64_t>(std::lround(plan.T / plan.dt));
    cfg.record_every = static_cast<int>(cfg.steps);
    cfg.threads = plan.threads;
    const EnsembleResult r = run_ensemble(cfg);
    if (r.stats.n_failed > 0) {
      return {"regularization robustness", false, std::to_string(r.stats.n_failed) + " paths failed"};
    }
    c.m = r.stats.moments;
  }
  // Entries 0-4 are compared across all cells; the delta-weighted rate only
  // between cells sharing delta, and must stay below the initial energy bound.
  double worst = 0.0;
  std::string where;
  auto compare = [&](const Cell& a, const Cell& b, int k) {
    const double x = a.m.at(k).mean, y = b.m.at(k).mean;
    const double rel = std::abs(x - y) / std::max(std::abs(x), std::abs(y));
    if (rel > worst) {
      worst = rel;
      where = MomentTable::names[k];
    }
  };
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j)
      for (int k = 0; k < MomentTable::count; ++k)
        if (k < 5 || cells[i].delta == cells[j].delta) compare(cells[i], cells[j], k);
  const State s0 = make_initial_state(g, standard_initial(), PotentialSpec());
  const double e0 = energy(g, s0, PotentialSpec()).E;
  double delta_entry = 0.0;
  for (const Cell& c : cells) delta_entry = std::max(delta_entry, c.m.at(5).mean);
  const bool ok = worst <= plan.rel_tol && delta_entry <= 2.0 * e0;
  std::ostringstream os;
  os << "max relative spread " << detail::fmt(worst) << " (" << where << "), max E[int delta|phi_t|^2]="
     << detail::fmt(delta_entry) << " vs E0=" << detail::fmt(e0);
  return {"regularization robustness", ok, os.str()};
}

}  // namespace schns::checks
