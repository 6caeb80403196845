#include <gtest/gtest.h>

#include <random>
#include <string>

#include "schns/config.hpp"

using namespace schns;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

RunConfig generated(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  RunConfig c;
  EnsembleConfig& e = c.ensemble;
  e.grid = Grid(16 + 8 * pick(gen), 16 + 4 * pick(gen), 0.5 + u(gen), 0.5 + u(gen));
  e.scheme.dt = 1e-5 + 1e-3 * u(gen);
  e.scheme.eps = pick(gen) == 0 ? 0.0 : 0.1 + 0.9 * u(gen);
  e.scheme.delta = 0.01 * pick(gen);
  e.scheme.R = pick(gen) == 0 ? std::numeric_limits<double>::infinity() : 1.0 + 10.0 * u(gen);
  e.scheme.theta = 0.5 + 0.5 * u(gen);
  e.scheme.extrapolate = pick(gen) % 2 == 0;
  const BulkKind bk = pick(gen) % 2 ? BulkKind::polynomial : BulkKind::double_well;
  std::vector<double> coeffs;
  if (bk == BulkKind::polynomial) coeffs = {0.0, -u(gen), 0.0, 1.0 + u(gen)};
  e.potentials = PotentialSpec(bk, coeffs, pick(gen) % 2 ? BoundaryKind::double_well : BoundaryKind::linear);
  e.noise.enabled = pick(gen) != 0;
  e.noise.modes = 1 + pick(gen);
  e.noise.sigma0 = u(gen);
  e.noise.gamma = 0.6 + u(gen);
  e.noise.alpha_u = u(gen);
  e.noise.alpha_phi = u(gen);
  const char* kinds[] = {"zero", "cosine", "random", "cosine"};
  e.initial.kind = kinds[pick(gen)];
  e.initial.phi_mean = u(gen) - 0.5;
  e.initial.phi_amp = u(gen);
  e.initial.u_amp = u(gen);
  e.initial.mode = 1 + pick(gen) % 2;
  e.initial.seed = gen();
  e.n_paths = 1 + pick(gen);
  e.base_seed = gen();
  e.steps = gen() % 1000;
  e.record_every = 1 + pick(gen);
  e.threads = 1 + pick(gen);
  e.holder_beta = 0.05 + 0.4 * u(gen);
  e.pairing = pick(gen) % 2 ? Pairing::phase_gradient : Pairing::velocity;
  const StopNorm norms[] = {StopNorm::euclidean, StopNorm::velocity, StopNorm::phase, StopNorm::sum};
  e.stop_norm = norms[pick(gen)];
  c.seed = gen();
  c.output = "out_" + std::to_string(pick(gen));
  c.checkpoint_every = gen() % 50;
  return c;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config("# nothing here\n\n");
  RunConfig d;
  d.ensemble.grid = Grid(64, 64);
  EXPECT_TRUE(c == d);
  EXPECT_EQ(c.ensemble.scheme.dt, 1e-4);
  EXPECT_EQ(c.output, "out");
}

TEST(Config, SectionsAndComments) {
  const RunConfig c = parse_config(
      "[grid]\nnx = 32   # cells\nny=16\n\n[scheme]\n dt = 5e-5\nR = inf\n[run]\nsteps = 7\noutput = here\n");
  EXPECT_EQ(c.ensemble.grid.nx(), 32);
  EXPECT_EQ(c.ensemble.grid.ny(), 16);
  EXPECT_EQ(c.ensemble.scheme.dt, 5e-5);
  EXPECT_FALSE(std::isfinite(c.ensemble.scheme.R));
  EXPECT_EQ(c.ensemble.steps, 7u);
  EXPECT_EQ(c.output, "here");
}

TEST(Config, NegativeStepNamesKey) {
  const std::string e = error_of("[scheme]\ndt = -0.1\n");
  EXPECT_NE(e.find("scheme.dt"), std::string::npos) << e;
}

TEST(Config, ErrorsNameTheLine) {
  EXPECT_NE(error_of("[grid]\nnx = 32\nbogus = 1\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("[grid]\nnx = 32\nbogus = 1\n").find("grid.bogus"), std::string::npos);
  EXPECT_NE(error_of("[grid\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("\nnot an assignment\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("[grid]\nnx = 1.5\n").find("grid.nx"), std::string::npos);
  EXPECT_NE(error_of("[noise]\nenabled = maybe\n").find("noise.enabled"), std::string::npos);
  EXPECT_NE(error_of("[grid]\nnx =\n").find("missing value"), std::string::npos);
}

TEST(Config, DuplicateKeysRejected) {
  const std::string e = error_of("[grid]\nnx = 32\n\n[grid]\nnx = 16\n");
  EXPECT_NE(e.find("line 5"), std::string::npos) << e;
  EXPECT_NE(e.find("line 2"), std::string::npos) << e;
}

TEST(Config, RangeChecksNameKeys) {
  EXPECT_NE(error_of("[grid]\nnx = 4\n").find("grid.nx"), std::string::npos);
  EXPECT_NE(error_of("[grid]\nly = 0\n").find("grid.ly"), std::string::npos);
  EXPECT_NE(error_of("[noise]\ngamma = 0.5\n").find("noise.gamma"), std::string::npos);
  EXPECT_NE(error_of("[initial]\nkind = spiral\n").find("initial.kind"), std::string::npos);
  EXPECT_NE(error_of("[ensemble]\nholder_beta = 0.5\n").find("ensemble.holder_beta"), std::string::npos);
  EXPECT_NE(error_of("[ensemble]\npairing = other\n").find("ensemble.pairing"), std::string::npos);
  EXPECT_NE(error_of("[potential]\nbulk_coefficients = 0, 1\n").find("potential.bulk_coefficients"),
            std::string::npos);
  EXPECT_NE(error_of("[potential]\nbulk = polynomial\nbulk_coefficients = 1, 1\n").find("potential.bulk_coefficients"),
            std::string::npos);
  EXPECT_NE(error_of("[scheme]\ntheta = 0.2\n").find("scheme."), std::string::npos);
}

TEST(Config, RoundTripsGeneratedConfigs) {
  std::mt19937_64 gen(2024);
  for (int k = 0; k < 20; ++k) {
    const RunConfig c = generated(gen);
    const std::string text = serialize_config(c);
    const RunConfig back = parse_config(text);
    EXPECT_TRUE(back == c) << text;
    EXPECT_EQ(serialize_config(back), text);
    EXPECT_EQ(config_hash(back), config_hash(c));
  }
}

TEST(Config, HashIgnoresRunControl) {
  RunConfig a;
  RunConfig b = a;
  b.output = "elsewhere";
  b.seed = 99;
  b.checkpoint_every = 10;
  b.ensemble.steps = 12345;
  b.ensemble.threads = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.ensemble.scheme.dt = 2e-4;
  EXPECT_NE(config_hash(a), config_hash(b));
  RunConfig c = a;
  c.ensemble.noise.alpha_phi = 0.25;
  EXPECT_NE(config_hash(a), config_hash(c));
  RunConfig d = a;
  d.ensemble.record_every = 3;
  EXPECT_NE(config_hash(a), config_hash(d));
  d = a;
  d.ensemble.pairing = Pairing::phase_gradient;
  EXPECT_NE(config_hash(a), config_hash(d));
}
