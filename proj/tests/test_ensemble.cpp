#include <gtest/gtest.h>

#include <cmath>

#include "schns/ensemble.hpp"

using namespace schns;

namespace {

EnsembleConfig small(int paths, std::uint64_t steps = 20) {
  EnsembleConfig c;
  c.grid = Grid(24, 24);
  c.n_paths = paths;
  c.steps = steps;
  c.record_every = 5;
  c.noise.modes = 6;
  c.noise.sigma0 = 1.0;
  c.noise.alpha_phi = 0.5;
  c.initial.phi_amp = 0.5;
  c.initial.u_amp = 1.0;
  return c;
}

bool same_paths(const EnsembleResult& a, const EnsembleResult& b) {
  if (a.paths.size() != b.paths.size()) return false;
  for (std::size_t i = 0; i < a.paths.size(); ++i) {
    const auto& x = a.paths[i].diagnostics;
    const auto& y = b.paths[i].diagnostics;
    if (x.G_series != y.G_series || x.times != y.times || !(a.paths[i].final_acc == b.paths[i].final_acc)) return false;
    for (std::size_t n = 0; n < x.size(); ++n)
      if (!(x.energy_series[n] == y.energy_series[n])) return false;
  }
  return true;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Ensemble, SinglePathIsReproducible) {
  const EnsembleConfig c = small(1);
  const EnsembleResult a = run_ensemble(c), b = run_ensemble(c);
  EXPECT_TRUE(same_paths(a, b));
  EXPECT_EQ(a.stats.energy.back().mean, b.stats.energy.back().mean);
  EXPECT_EQ(a.stats.times.size(), 5u);
}

TEST(Ensemble, NoNoiseMeansNoSpread) {
  EnsembleConfig c = small(4);
  c.noise.enabled = false;
  const EnsembleResult r = run_ensemble(c);
  for (const auto& s : r.stats.energy) EXPECT_EQ(s.se, 0.0);
  for (const auto& s : r.stats.G) EXPECT_EQ(s.se, 0.0);
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  EnsembleConfig c = small(6);
  const EnsembleResult one = run_ensemble(c);
  c.threads = 3;
  const EnsembleResult three = run_ensemble(c);
  EXPECT_TRUE(same_paths(one, three));
  for (std::size_t n = 0; n < one.stats.energy.size(); ++n) {
    EXPECT_EQ(one.stats.energy[n].mean, three.stats.energy[n].mean);
    EXPECT_EQ(one.stats.energy[n].se, three.stats.energy[n].se);
  }
}

TEST(Ensemble, PathReplaysFromItsIndex) {
  const EnsembleConfig c = small(4);
  const EnsembleResult r = run_ensemble(c);
  const Stepper st(c.grid, c.scheme, c.potentials, c.noise.build(c.grid));
  const PathResult p = run_path(st, c, 2);
  EXPECT_EQ(p.seed, split_seed(c.base_seed, 2));
  EXPECT_EQ(p.diagnostics.G_series, r.paths[2].diagnostics.G_series);
  EXPECT_TRUE(p.final_acc == r.paths[2].final_acc);
}

TEST(Ensemble, DisjointSeedRangesAreUncorrelated) {
  EnsembleConfig c = small(64, 10);
  c.grid = Grid(16, 16);
  c.initial.phi_amp = 0.1;
  c.record_every = 10;
  c.base_seed = 100;
  const EnsembleResult a = run_ensemble(c);
  c.base_seed = 200;
  const EnsembleResult b = run_ensemble(c);
  std::vector<double> ea, eb;
  for (int i = 0; i < 64; ++i) {
    ea.push_back(a.paths[i].diagnostics.energy_series.back().E);
    eb.push_back(b.paths[i].diagnostics.energy_series.back().E);
  }
  const double rho = correlation(ea, eb);
  EXPECT_GE(rho, -0.3);
  EXPECT_LE(rho, 0.3);
  EXPECT_GT(a.stats.energy.back().se, 0.0);
}

TEST(Ensemble, FailedPathsAreCountedNotThrown) {
  EnsembleConfig c = small(3, 5);
  c.scheme.blowup_guard = 1e-6;
  const EnsembleResult r = run_ensemble(c);
  EXPECT_EQ(r.stats.n_paths, 3);
  EXPECT_EQ(r.stats.n_failed, 3);
  for (const auto& p : r.paths) {
    EXPECT_FALSE(p.ok);
    EXPECT_NE(p.error.find("divergence"), std::string::npos);
  }
}

TEST(Ensemble, RejectsBadConfig) {
  EnsembleConfig c = small(0);
  EXPECT_THROW(run_ensemble(c), ParameterError);
  c = small(2);
  c.scheme.dt = 0.0;
  EXPECT_THROW(run_ensemble(c), ParameterError);
}

TEST(SupermartingaleTest, DeterministicDecayPasses) {
  EnsembleConfig c = small(4, 30);
  c.noise.enabled = false;
  const EnsembleResult r = run_ensemble(c);
  const SupermartingaleResult t = supermartingale_test(r, 0, r.stats.times.size() - 1, full_space());
  EXPECT_EQ(t.verdict, Verdict::pass);
  EXPECT_EQ(t.n_event, 4);
  EXPECT_EQ(t.se, 0.0);
}

TEST(SupermartingaleTest, EmptyEventIsInconclusive) {
  const EnsembleResult r = run_ensemble(small(4, 10));
  const SupermartingaleResult t = supermartingale_test(r, 0, 1, [](const TruncatedPath&) { return false; });
  EXPECT_EQ(t.verdict, Verdict::inconclusive);
  EXPECT_EQ(t.n_event, 0);
}

TEST(SupermartingaleTest, LowEnergyHalfSelectsHalf) {
  const EnsembleResult r = run_ensemble(small(8, 10));
  const SupermartingaleResult t = supermartingale_test(r, 1, 2, low_energy_half(r, 1));
  EXPECT_EQ(t.n_event, 4);
  EXPECT_NE(t.verdict, Verdict::inconclusive);
}

TEST(SupermartingaleTest, TooManyExclusionsIsInconclusive) {
  EnsembleResult r = run_ensemble(small(4, 10));
  r.paths[1].ok = false;
  const SupermartingaleResult t = supermartingale_test(r, 0, 1, full_space());
  EXPECT_EQ(t.verdict, Verdict::inconclusive);
  EXPECT_EQ(t.n_excluded, 1);
  EXPECT_THROW(supermartingale_test(r, 1, 1, full_space()), ParameterError);
}
