#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "schns/app.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::uint64_t> steps;
  std::string checkpoint;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o, bool with_config = true) {
  if (with_config) cmd->add_option("--config", o.config, "configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--steps", o.steps, "override the number of steps");
  cmd->add_flag("--quiet", o.quiet, "no progress output");
}

schns::RunConfig configure(const Options& o, bool ensemble) {
  schns::RunConfig cfg = o.config.empty() ? schns::RunConfig{} : schns::app::load_config(o.config);
  if (o.seed) (ensemble ? cfg.ensemble.base_seed : cfg.seed) = *o.seed;
  if (o.out) cfg.output = *o.out;
  if (o.steps) cfg.ensemble.steps = *o.steps;
  return cfg;
}

void fail(const std::string& kind, const std::string& message) {
  std::string flat = message;
  for (char& c : flat)
    if (c == '\n') c = ' ';
  std::cerr << "error kind=" << kind << " message=" << flat << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Cahn-Hilliard-Navier-Stokes channel simulator"};
  app.require_subcommand(1, 1);
  Options o;

  CLI::App* run = app.add_subcommand("run", "single path");
  add_common(run, o);
  CLI::App* ens = app.add_subcommand("ensemble", "independent paths and statistics");
  add_common(ens, o);
  CLI::App* ver = app.add_subcommand("verify", "invariant suites");
  ver->add_flag("--quiet", o.quiet, "print failures only");
  CLI::App* res = app.add_subcommand("resume", "continue a run from its checkpoint");
  add_common(res, o);
  res->add_option("--checkpoint", o.checkpoint, "checkpoint file (default OUT/checkpoint.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  std::ostream* log = o.quiet ? nullptr : &std::cerr;
  try {
    if (run->parsed()) {
      const schns::RunConfig cfg = configure(o, false);
      std::cout << schns::app::format_report(schns::app::run(cfg, log));
    } else if (ens->parsed()) {
      const schns::RunConfig cfg = configure(o, true);
      const schns::app::EnsembleReport r = schns::app::ensemble(cfg, log);
      std::cout << "n_paths=" << r.n_paths << " failed=" << r.n_failed << " stopped=" << r.n_stopped
                << " supermartingale_pass=" << r.tests_passed << "/" << r.tests_total << "\n";
      if (r.n_failed == r.n_paths) {
        fail("divergence", "every path failed; see summary.txt");
        return 1;
      }
    } else if (ver->parsed()) {
      int failed = 0, total = 0;
      for (const auto& c : schns::app::verify()) {
        ++total;
        if (!c.pass) ++failed;
        if (!o.quiet || !c.pass) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
      }
      std::cout << (total - failed) << "/" << total << " suites passed\n";
      if (failed > 0) {
        fail("verify", std::to_string(failed) + " of " + std::to_string(total) + " suites failed");
        return 1;
      }
    } else if (res->parsed()) {
      Options r = o;
      if (r.config.empty())
        r.config = (std::filesystem::path(o.out.value_or(schns::RunConfig{}.output)) / "config.ini").string();
      const schns::RunConfig cfg = configure(r, false);
      const std::string ck = o.checkpoint.empty() ? (std::filesystem::path(cfg.output) / "checkpoint.bin").string()
                                                  : o.checkpoint;
      std::cout << schns::app::format_report(schns::app::resume(cfg, ck, log));
    }
  } catch (const schns::Error& e) {
    fail(std::string(schns::to_string(e.kind())), e.what());
    return 1;
  } catch (const std::exception& e) {
    fail("internal", e.what());
    return 1;
  }
  return 0;
}
