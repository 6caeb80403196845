#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "schns/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("schns_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome invoke(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("'") + SCHNS_CLI + "' " + args + " >'" + out.string() + "' 2>'" +
                            err.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    o.err = slurp(err);
    return o;
  }

  fs::path write_config(const std::string& text, const std::string& name = "cfg.ini") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  std::string q(const fs::path& p) const { return "'" + p.string() + "'"; }

  fs::path dir_;
};

const char* small_config =
    "[grid]\nnx = 16\nny = 24\n"
    "[noise]\nmodes = 4\nalpha_phi = 0.5\n"
    "[initial]\nu_amp = 0.5\n"
    "[ensemble]\nn_paths = 3\nrecord_every = 2\n"
    "[run]\nsteps = 10\n";

}  // namespace

TEST_F(Cli, RunWritesOutputs) {
  const fs::path out = dir_ / "run";
  const Outcome o = invoke("run --config " + q(write_config(small_config)) + " --out " + q(out) + " --quiet");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("step=10 "), std::string::npos) << o.out;
  EXPECT_TRUE(o.err.empty()) << o.err;
  for (const char* f : {"diagnostics.csv", "checkpoint.bin", "config.ini", "summary.txt"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(schns::read_csv(out / "diagnostics.csv").size(), 6u);
}

TEST_F(Cli, SeedAndStepsOverrides) {
  const fs::path cfg = write_config(small_config);
  const Outcome a = invoke("run --config " + q(cfg) + " --out " + q(dir_ / "a") + " --seed 5 --steps 4 --quiet");
  const Outcome b = invoke("run --config " + q(cfg) + " --out " + q(dir_ / "b") + " --seed 5 --steps 4 --quiet");
  const Outcome c = invoke("run --config " + q(cfg) + " --out " + q(dir_ / "c") + " --seed 6 --steps 4 --quiet");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("step=4 "), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "a" / "diagnostics.csv"), slurp(dir_ / "b" / "diagnostics.csv"));
  EXPECT_NE(slurp(dir_ / "a" / "diagnostics.csv"), slurp(dir_ / "c" / "diagnostics.csv"));
}

TEST_F(Cli, ResumeContinuesRun) {
  const fs::path cfg = write_config(small_config);
  ASSERT_EQ(invoke("run --config " + q(cfg) + " --out " + q(dir_ / "whole") + " --quiet").code, 0);
  ASSERT_EQ(invoke("run --config " + q(cfg) + " --out " + q(dir_ / "part") + " --steps 6 --quiet").code, 0);
  const Outcome r = invoke("resume --out " + q(dir_ / "part") + " --steps 10 --quiet");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("step=10 "), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "whole" / "diagnostics.csv"), slurp(dir_ / "part" / "diagnostics.csv"));
}

TEST_F(Cli, ResumeWithChangedPhysicsFails) {
  const fs::path cfg = write_config(small_config);
  ASSERT_EQ(invoke("run --config " + q(cfg) + " --out " + q(dir_ / "r") + " --steps 4 --quiet").code, 0);
  const fs::path other = write_config(std::string(small_config) + "[scheme]\ndt = 5e-5\n", "other.ini");
  const Outcome r = invoke("resume --config " + q(other) + " --out " + q(dir_ / "r") + " --quiet");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error kind=config"), std::string::npos) << r.err;
}

TEST_F(Cli, EnsembleWritesTables) {
  const fs::path out = dir_ / "ens";
  const Outcome o = invoke("ensemble --config " + q(write_config(small_config)) + " --out " + q(out) + " --quiet");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("n_paths=3 failed=0"), std::string::npos) << o.out;
  for (const char* f : {"ensemble.csv", "moments.csv", "supermartingale.csv", "summary.txt", "config.ini",
                        "paths/path_0000.csv", "paths/path_0002.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  const Outcome none = invoke("");
  EXPECT_EQ(none.code, 2);
  EXPECT_NE(none.err.find("error kind=usage"), std::string::npos) << none.err;
  EXPECT_EQ(invoke("run --steps many").code, 2);
  EXPECT_EQ(invoke("run --bogus").code, 2);
  EXPECT_EQ(invoke("run --config " + q(dir_ / "missing.ini")).code, 2);
}

TEST_F(Cli, BadConfigReportsKind) {
  const Outcome o = invoke("run --config " + q(write_config("[scheme]\ndt = -0.1\n")) + " --out " + q(dir_ / "x"));
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("error kind=config"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("scheme.dt"), std::string::npos) << o.err;
  EXPECT_EQ(o.err.find('\n'), o.err.size() - 1);
}

TEST_F(Cli, UnwritableOutputIsIoError) {
  const fs::path blocker = dir_ / "file";
  std::ofstream(blocker) << "x";
  const Outcome o = invoke("run --config " + q(write_config(small_config)) + " --out " + q(blocker / "sub") +
                           " --quiet");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("error kind=io"), std::string::npos) << o.err;
}

TEST_F(Cli, VerifyPasses) {
  const Outcome o = invoke("verify");
  EXPECT_EQ(o.code, 0) << o.out << o.err;
  EXPECT_NE(o.out.find("10/10 suites passed"), std::string::npos) << o.out;
  const Outcome quiet = invoke("verify --quiet");
  EXPECT_EQ(quiet.out, "10/10 suites passed\n");
}
