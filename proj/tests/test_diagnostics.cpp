#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "schns/diagnostics.hpp"
#include "support.hpp"

using namespace schns;
using namespace testing_support;

namespace {

State constant_state(const Grid& g, double phi, double psi) {
  State s;
  s.u = VectorField(g);
  s.phi = ScalarField(g, phi);
  s.psi = BoundaryField(g, psi);
  s.mu = ScalarField(g);
  s.kpsi = BoundaryField(g);
  s.ell = BoundaryField(g);
  return s;
}

InitialCondition smooth_start() {
  InitialCondition ic;
  ic.phi_amp = 0.5;
  ic.u_amp = 1.0;
  return ic;
}

}  // namespace

TEST(Energy, ZeroStateHasNoEnergy) {
  const Grid g(16, 16);
  const EnergyReport e = energy(g, constant_state(g, 0.0, 0.0), PotentialSpec{});
  EXPECT_EQ(e.E, 0.0);
  EXPECT_EQ(e.mass, 0.0);
}

TEST(Energy, UniformPhaseClosedForm) {
  const Grid g(16, 16);
  const EnergyReport e = energy(g, constant_state(g, 1.0, 1.0), PotentialSpec{});
  EXPECT_NEAR(e.boundary_l2, 1.0, 1e-14);
  EXPECT_NEAR(e.bulk_potential, -0.25, 1e-14);
  EXPECT_NEAR(e.boundary_potential, 1.0, 1e-14);
  EXPECT_NEAR(e.gradient_bulk, 0.0, 1e-14);
  EXPECT_NEAR(e.E, 1.75, 1e-13);
  EXPECT_NEAR(e.mass, 1.0, 1e-14);
}

TEST(Energy, ShearFlowKineticEnergy) {
  const Grid g(16, 32, 2.0, 1.0);
  State s = constant_state(g, 0.0, 0.0);
  s.u.x = sample(g, [](double, double y) { return std::sin(2 * std::numbers::pi * y); });
  EXPECT_NEAR(energy(g, s, PotentialSpec{}).E, 0.25 * g.lx() * g.ly(), 1e-13);
}

TEST(Energy, TruncatedPrimitivesUsedWhenRequested) {
  const Grid g(16, 16);
  const State s = constant_state(g, 3.0, 0.0);
  const PotentialSpec p;
  EXPECT_NEAR(energy(g, s, p, 0.5).bulk_potential, p.F_eps(3.0, 0.5), 1e-12);
  EXPECT_NEAR(energy(g, s, p).bulk_potential, p.F(3.0), 1e-12);
}

TEST(MuMean, GreenIdentityHolds) {
  std::mt19937_64 gen(31);
  const Grid g(24, 24);
  SchemeParams p;
  p.dt = 1e-3;
  const State s = make_initial_state(g, smooth_start(), PotentialSpec{});
  const ChResult r = ch_substep(g, s.phi, s.psi, s.u, p, PotentialSpec{});
  const MuMeanCheck c = mu_mean_identity(g, r);
  EXPECT_NEAR(c.direct, c.from_wall, 1e-9);
}

TEST(Supermartingale, ZeroPathIsIdenticallyZero) {
  const Grid g(16, 16);
  const PotentialSpec pot;
  const Stepper st(g, SchemeParams{}, pot);
  PathRecorder rec(g, pot, RecorderOptions{});
  PathDiagnostics d;
  State s = constant_state(g, 0.0, 0.0);
  PathRecorder::append(d, rec.start(s));
  for (int k = 0; k < 5; ++k) {
    s = st.step(s, nullptr);
    PathRecorder::append(d, *rec.observe(s));
  }
  for (double v : supermartingale_process(d)) EXPECT_EQ(v, 0.0);
}

TEST(Supermartingale, DeterministicPathDoesNotIncrease) {
  const Grid g(32, 32);
  const PotentialSpec pot;
  SchemeParams p;
  const Stepper st(g, p, pot);
  RecorderOptions o;
  o.dt = p.dt;
  o.record_every = 10;
  PathRecorder rec(g, pot, o);
  PathDiagnostics d;
  State s = make_initial_state(g, smooth_start(), pot, 0.0, &st.projector());
  PathRecorder::append(d, rec.start(s));
  for (int k = 0; k < 300; ++k) {
    s = st.step(s, nullptr);
    if (auto row = rec.observe(s)) PathRecorder::append(d, *row);
  }
  const std::vector<double> G = supermartingale_process(d);
  ASSERT_EQ(G.size(), 31u);
  // G(0) = 0, so the relative allowance alone would demand exactness at m = 0;
  // the absolute term covers the time-discretization defect of G.
  const double e0 = d.energy_series.front().E;
  const double slack = 1e-6 * e0 * e0;
  for (std::size_t m = 0; m < G.size(); ++m) {
    for (std::size_t n = m; n < G.size(); ++n) EXPECT_LE(G[n], G[m] + 0.02 * std::abs(G[m]) + slack);
  }
  EXPECT_EQ(G, d.G_series);
}

TEST(Supermartingale, RejectsMissingTerms) {
  PathDiagnostics d;
  d.energy_series.resize(3);
  d.noise_terms.resize(2);
  EXPECT_THROW(supermartingale_process(d), DataError);
}

TEST(Holder, ConstantPathIsZero) {
  const std::vector<double> t{0.0, 0.1, 0.2, 0.3}, x{2.0, 2.0, 2.0, 2.0};
  EXPECT_EQ(holder_seminorm(t, x, 0.25), 0.0);
}

TEST(Holder, LinearPathClosedForm) {
  const double T = 0.8, beta = 0.3;
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  const std::vector<double> v{0.5, -1.5};
  for (int k = 0; k <= 40; ++k) {
    t.push_back(T * k / 40.0);
    x.push_back({v[0] * t.back(), v[1] * t.back()});
  }
  EXPECT_NEAR(holder_seminorm(t, x, beta), 1.5 * std::pow(T, 1.0 - beta), 1e-12);
}

TEST(Holder, BrownianSweepIsMonotone) {
  std::mt19937_64 gen(32);
  std::normal_distribution<double> n01;
  const int n = 1000;
  const double dt = 1e-3;
  std::vector<double> t{0.0}, x{0.0};
  for (int k = 0; k < n; ++k) {
    t.push_back(t.back() + dt);
    x.push_back(x.back() + std::sqrt(dt) * n01(gen));
  }
  double prev = 0.0;
  for (double beta : {0.3, 0.4, 0.45, 0.49}) {
    const double h = holder_seminorm(t, x, beta);
    EXPECT_TRUE(std::isfinite(h));
    EXPECT_GT(h, prev);
    prev = h;
  }
}

TEST(Holder, RejectsBadInput) {
  const std::vector<double> t{0.0, 1.0}, x{0.0, 1.0}, one{0.0};
  EXPECT_THROW(holder_seminorm(t, x, 0.5), ParameterError);
  EXPECT_THROW(holder_seminorm(t, x, 0.0), ParameterError);
  EXPECT_THROW(holder_seminorm(one, one, 0.25), DataError);
}

TEST(Moments, ZeroPath) {
  const MomentTable t = moment_estimates({Accumulators{}}, 2.0);
  for (int k = 0; k < MomentTable::count; ++k) {
    EXPECT_EQ(t.at(k).mean, 0.0);
    EXPECT_EQ(t.at(k).se, 0.0);
  }
}

TEST(Moments, IdenticalPathsHaveNoSpread) {
  Accumulators a;
  a.sup_u_sq = 1.5;
  a.int_grad_mu_sq = 0.25;
  const MomentTable t = moment_estimates({a, a}, 1.0);
  EXPECT_DOUBLE_EQ(t.sup_u_sq.mean, 1.5);
  EXPECT_DOUBLE_EQ(t.int_grad_mu_sq.mean, 0.25);
  EXPECT_EQ(t.sup_u_sq.se, 0.0);
}

TEST(Moments, StandardErrorOfTwoValues) {
  Accumulators a, b;
  a.sup_v1_sq = 1.0;
  b.sup_v1_sq = 3.0;
  const MomentTable t = moment_estimates({a, b}, 1.0);
  EXPECT_DOUBLE_EQ(t.sup_v1_sq.mean, 2.0);
  EXPECT_DOUBLE_EQ(t.sup_v1_sq.se, 1.0);
  EXPECT_DOUBLE_EQ(moment_estimates({a, b}, 2.0).sup_v1_sq.mean, 5.0);
}

TEST(Moments, RejectsBadInput) {
  EXPECT_THROW(moment_estimates({}, 1.0), DataError);
  EXPECT_THROW(moment_estimates({Accumulators{}}, 0.5), ParameterError);
}

TEST(Recorder, RecordsOnStride) {
  const Grid g(24, 24);
  const PotentialSpec pot;
  const Stepper st(g, SchemeParams{}, pot);
  RecorderOptions o;
  o.record_every = 3;
  PathRecorder rec(g, pot, o);
  State s = make_initial_state(g, smooth_start(), pot);
  rec.start(s);
  int rows = 0;
  for (int k = 1; k <= 9; ++k) {
    s = st.step(s, nullptr);
    if (rec.observe(s)) {
      ++rows;
      EXPECT_EQ(k % 3, 0);
    }
  }
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(rec.accumulators().steps, 9u);
  EXPECT_THROW(PathRecorder(g, pot, RecorderOptions{.record_every = 0}), ParameterError);
}

TEST(Recorder, ResumeMatchesUninterrupted) {
  const Grid g(24, 24);
  const PotentialSpec pot;
  const NoiseModel noise = NoiseModel::channel_modes(g, 4, 1.0, 1.0, 1.0, 0.5);
  const Stepper st(g, SchemeParams{}, pot, noise);
  State s = make_initial_state(g, smooth_start(), pot);
  Rng rng(4);
  PathRecorder a(g, pot, RecorderOptions{});
  a.start(s);
  for (int k = 0; k < 4; ++k) a.observe(s = st.step(s, rng));
  PathRecorder b(g, pot, RecorderOptions{});
  b.resume(a.accumulators());
  for (int k = 0; k < 4; ++k) {
    s = st.step(s, rng);
    const auto ra = a.observe(s);
    const auto rb = b.observe(s);
    ASSERT_TRUE(ra && rb);
    EXPECT_EQ(ra->G, rb->G);
  }
  EXPECT_TRUE(a.accumulators() == b.accumulators());
}

TEST(Probes, AreUnitNorm) {
  const Grid g(32, 32);
  const auto w = probe_fields(g);
  EXPECT_EQ(w.size(), 7u);
  for (const auto& f : w) EXPECT_NEAR(norm_sq(g, f), 1.0, 1e-12);
}
