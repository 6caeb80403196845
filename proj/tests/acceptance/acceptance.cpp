// Full-scale acceptance runner. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Arguments, if given, select criteria by name
// substring.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "schns/checks.hpp"

using namespace schns;
using namespace schns::checks;

namespace {

struct Criterion {
  std::string name;
  double budget_s;
  std::function<std::vector<CheckResult>()> run;
};

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

CheckResult both(std::string name, const std::vector<CheckResult>& parts) {
  CheckResult r{std::move(name), true, ""};
  for (const auto& p : parts) {
    r.pass = r.pass && p.pass;
    r.detail += (r.detail.empty() ? "" : " | ") + p.name + ": " + p.detail;
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  constexpr int paths = 2;
  constexpr int trajectory_steps = 5000;
  TrajectoryStats traj;
  bool have_traj = false;
  auto trajectory = [&]() -> const TrajectoryStats& {
    if (!have_traj) traj = trajectory_invariants(64, 1e-4, trajectory_steps, paths, 21);
    have_traj = true;
    return traj;
  };

  const std::vector<Criterion> criteria = {
      {"mass conservation", 120.0 * paths, [&] { return std::vector{mass_conservation(trajectory(), 1e-9)}; }},
      {"energy law", 300.0, [] { return std::vector{energy_law(64, 1e-4, 5000, 0.02)}; }},
      {"energy inequality in expectation", 1800.0,
       [] {
         SupermartingalePlan p;
         p.threads = worker_threads();
         return std::vector{supermartingale(p)};
       }},
      {"divergence control", 0.0, [&] { return std::vector{divergence_control(trajectory(), 1e-10)}; }},
      {"operator identities", 60.0, [] { return std::vector{operator_identities(32, 100)}; }},
      {"mollifier contract", 60.0, [] { return std::vector{mollifier_contract({32, 64, 128})}; }},
      {"noise assumptions", 60.0,
       [] { return std::vector{both("noise assumptions", {noise_a1_a2(32, 20), ito_isometry(32, 10000)})}; }},
      {"cut-off neutrality and stopping", 120.0,
       [] {
         return std::vector{both("cut-off neutrality and stopping",
                                 {cutoff_neutrality(64, 1000), stopping_detector(32, 300)})};
       }},
      {"substep orders", 300.0, [] { return std::vector{substep_orders()}; }},
      {"regularization robustness", 1200.0,
       [] {
         RobustnessPlan p;
         p.threads = worker_threads();
         return std::vector{regularization_robustness(p)};
       }},
  };

  auto selected = [&](const std::string& name) {
    if (argc < 2) return true;
    for (int k = 1; k < argc; ++k)
      if (name.find(argv[k]) != std::string::npos) return true;
    return false;
  };

  int failed = 0, total = 0;
  for (const Criterion& c : criteria) {
    if (!selected(c.name)) continue;
    ++total;
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;
    try {
      for (const CheckResult& r : c.run()) {
        pass = pass && r.pass;
        detail += r.detail;
      }
    } catch (const std::exception& e) {
      pass = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // A zero budget marks a criterion measured inside another one's run.
    const bool in_time = c.budget_s == 0.0 || secs <= c.budget_s;
    if (!in_time) detail += " (over runtime budget)";
    pass = pass && in_time;
    if (!pass) ++failed;
    std::printf("%s %s [%.1fs / %.0fs]: %s\n", pass ? "PASS" : "FAIL", c.name.c_str(), secs, c.budget_s,
                detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", total - failed, total);
  return failed == 0 ? 0 : 1;
}
