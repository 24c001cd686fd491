// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs against the library only; oracles live in oracles.hpp.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "edgeshare/optimizer.hpp"
#include "edgeshare/training_sim.hpp"
#include "oracles.hpp"

using namespace edgeshare;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void criterion(int id, const char* label, bool pass, const std::string& detail = "") {
  std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", id, label,
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Scenario skewed_k6_scenario(std::int64_t samples_per_device) {
  Scenario s = build_paper_scenario(8);
  for (auto& d : s.devices) d.initial_samples = samples_per_device;
  s.validate();
  return s;
}

}  // namespace

static void criterion1_dominance() {
  const auto t0 = Clock::now();
  bool ordering = true, gaps = true, growth = true;
  double prev_gap_p2 = -1.0, prev_gap_t1 = -1.0;
  std::string detail;
  for (int m : {1, 5, 10, 20}) {
    Scenario s = build_paper_scenario(m);
    OptimizationResult p1 = solve_p1(s);
    OptimizationResult p2 = solve_p2(s);
    const double t1 = baseline_T1(s);
    if (!p1.report.converged) ordering = false;
    if (!(p1.objective < p2.objective && p2.objective < t1)) ordering = false;
    if (!((p2.objective - p1.objective) / p2.objective > 0.01)) gaps = false;
    if (!((t1 - p2.objective) / t1 > 0.01)) gaps = false;
    const double gap_p2 = p2.objective - p1.objective;
    const double gap_t1 = t1 - p1.objective;
    if (prev_gap_p2 >= 0.0 &&
        (gap_p2 < prev_gap_p2 * (1.0 - 1e-6) || gap_t1 < prev_gap_t1 * (1.0 - 1e-6)))
      growth = false;
    prev_gap_p2 = gap_p2;
    prev_gap_t1 = gap_t1;
    char buf[128];
    std::snprintf(buf, sizeof buf, "M=%d P1=%.4g P2=%.4g T1=%.4g; ", m, p1.objective, p2.objective,
                  t1);
    detail += buf;
  }
  const double elapsed = seconds_since(t0);
  criterion(1, "dominance ordering P1 < P2 < T1, gaps > 1%, non-decreasing in M",
            ordering && gaps && growth && elapsed < 60.0,
            detail + "runtime " + std::to_string(elapsed) + " s");
}

static void criterion2_inner_oracle() {
  const auto t0 = Clock::now();
  Scenario s = oracle::tiny_k2_scenario();
  const double tau1 = 0.02 * baseline_T1(s);
  InnerSolution sol = solve_inner(tau1, s);
  const double grid = oracle::grid_inner_tau2(s, tau1, 201);
  const double rel = std::abs(sol.tau2 - grid) / grid;
  const double elapsed = seconds_since(t0);
  criterion(2, "inner solve matches K=2 exhaustive grid within 1%",
            sol.report.converged && rel < 0.01 && elapsed < 120.0,
            "solver tau2 = " + std::to_string(sol.tau2) + ", grid = " + std::to_string(grid) +
                ", rel = " + std::to_string(rel) + ", runtime " + std::to_string(elapsed) + " s");
}

static void criterion3_p1_oracle() {
  Scenario s = oracle::tiny_k2_scenario();
  OptimizationResult r = solve_p1(s);
  const double grid = oracle::grid_p1_objective(s, 201, 201);
  const double rel = std::abs(r.objective - grid) / grid;
  criterion(3, "full P1 matches K=2 exhaustive tau1 x inner grid within 1%",
            r.report.converged && rel < 0.01,
            "solver = " + std::to_string(r.objective) + ", grid = " + std::to_string(grid) +
                ", rel = " + std::to_string(rel));
}

static void criterion4_remarks() {
  bool pass = true;
  std::string detail;
  auto check_one = [&](const Scenario& s, const std::string& name) {
    OptimizationResult r = solve_p1(s);
    if (!r.report.converged) {
      pass = false;
      detail += name + ": not converged; ";
      return;
    }
    RemarkVerification v = verify_remarks(r.plan, s, 1e-3);
    if (!v.unidirectional || !v.equalized) {
      pass = false;
      detail += name + ": unidirectional=" + (v.unidirectional ? "y" : "n") +
                " equalized=" + (v.equalized ? "y" : "n") +
                " spread/tau2=" + std::to_string(v.spread / v.tau2) + "; ";
    }
  };
  check_one(build_paper_scenario(10), "paper");
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    check_one(random_scenario(4 + static_cast<int>(seed % 3), seed, 10), "seed" + std::to_string(seed));
  criterion(4, "remark verification (unidirectional sharing, equalized rounds)", pass, detail);
}

static void criterion5_p2_structure() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scenario s = random_scenario(4 + static_cast<int>(seed % 3), 100 + seed, 10);
    OptimizationResult r = solve_p2(s);
    const auto& pr = s.params;
    const double tau_star = r.plan.tau2;
    double sum_b = 0.0;
    for (int i = 0; i < s.K(); ++i) {
      const auto& dev = s.devices[i];
      const double t = local_update_delay(static_cast<double>(dev.initial_samples),
                                          pr.local_iters_N, pr.flops_per_sample_L,
                                          dev.flops_per_cycle_C, dev.cpu_freq_f) +
                       upload_delay(r.plan.b_upload[i], dev, pr);
      if (std::abs(t - tau_star) / tau_star > 1e-4) {
        pass = false;
        detail += "seed " + std::to_string(seed) + " dev " + std::to_string(i) + " rel " +
                  std::to_string(std::abs(t - tau_star) / tau_star) + "; ";
      }
      sum_b += r.plan.b_upload[i];
    }
    if (std::abs(sum_b - pr.bandwidth_B) / pr.bandwidth_B > 1e-6) {
      pass = false;
      detail += "seed " + std::to_string(seed) + " bandwidth sum off; ";
    }
  }
  criterion(5, "P2 optimum equalizes devices and spends the whole bandwidth", pass, detail);
}

static void criterion6_gradient() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 0.6);
  std::uniform_int_distribution<int> label(0, 3);
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    ModelConfig c{4, 5};
    Dataset d;
    for (int i = 0; i < 20; ++i) {
      Sample smp;
      smp.x = Eigen::VectorXd::NullaryExpr(c.features, [&](Eigen::Index) { return gauss(rng); });
      smp.y = label(rng);
      d.push_back(std::move(smp));
    }
    Eigen::VectorXd w =
        Eigen::VectorXd::NullaryExpr(c.dim(), [&](Eigen::Index) { return gauss(rng); });
    Eigen::VectorXd g = loss_and_gradient(w, d, c).second;
    Eigen::VectorXd fd = oracle::fd_gradient(w, d, c);
    worst = std::max(worst, (g - fd).norm() / std::max(1e-12, fd.norm()));
  }
  criterion(6, "analytic gradient vs central finite differences over 100 probes", worst <= 1e-5,
            "worst relative error " + std::to_string(worst));
}

static void criterion7_centralized() {
  Scenario s = build_paper_scenario();
  s.devices.resize(4);
  s.d2d.k = 4;
  s.d2d.gains.assign(16, 1e-8);
  for (int i = 0; i < 4; ++i) {
    s.d2d.at(i, i) = 0.0;
    s.devices[i].id = i;
    s.devices[i].initial_samples = 30;
  }
  s.geometry.reset();
  s.params.local_iters_N = 1;
  s.params.global_iters_M = 50;
  s.params.learning_rate_eta = 0.1;
  s.validate();

  ModelConfig c{3, 6};
  std::mt19937_64 rng(55);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, 2);
  Dataset pooled;
  for (int i = 0; i < 120; ++i) {
    Sample smp;
    smp.x = Eigen::VectorXd::NullaryExpr(c.features, [&](Eigen::Index) { return gauss(rng); });
    smp.y = label(rng);
    pooled.push_back(std::move(smp));
  }
  std::vector<Dataset> sets(4);
  for (int i = 0; i < 120; ++i) sets[static_cast<std::size_t>(i / 30)].push_back(pooled[i]);

  auto central = oracle::centralized_trajectory(pooled, c, 0.1, 50);
  Eigen::VectorXd w = ModelState::zeros(c).w;
  double worst = 0.0;
  for (int m = 1; m <= 50; ++m) {
    std::vector<std::pair<Eigen::VectorXd, std::int64_t>> models;
    for (const auto& d : sets)
      models.emplace_back(local_update(w, d, c, 0.1, 1), static_cast<std::int64_t>(d.size()));
    w = global_aggregate(models);
    worst = std::max(worst, (w - central[static_cast<std::size_t>(m)]).norm() /
                                std::max(1e-300, central[static_cast<std::size_t>(m)].norm()));
  }
  criterion(7, "distributed N=1 IID trajectory equals centralized BGD", worst <= 1e-10,
            "worst relative deviation " + std::to_string(worst));
}

static void criterion8_accuracy_benefit() {
  const std::int64_t samples = 600;
  Scenario s = skewed_k6_scenario(samples);
  s.params.learning_rate_eta = 0.1;
  OptimizationResult p1 = solve_p1(s);
  if (!p1.report.converged) {
    criterion(8, "non-IID accuracy benefit of the sharing plan", false, "P1 did not converge");
    return;
  }
  const SharingPlan baseline = equal_split_plan(s);

  double mean_with = 0.0, mean_without = 0.0;
  const int n_seeds = 10;
  for (int seed = 1; seed <= n_seeds; ++seed) {
    auto hists = make_noniid_partition(6, 10, samples, 2, static_cast<std::uint64_t>(seed));
    SyntheticTask task = make_synthetic_task(10, 10, samples * 6 * 2, 3.0,
                                             static_cast<std::uint64_t>(1000 + seed));
    Scenario sc = s;
    for (int i = 0; i < 6; ++i) sc.devices[i].label_histogram = hists[static_cast<std::size_t>(i)];
    SimOptions opt;
    opt.seed = static_cast<std::uint64_t>(seed);
    auto with_trace = run_training(sc, draw_datasets(task, hists), p1.plan, task.model, task.test, opt);
    auto without_trace =
        run_training(sc, draw_datasets(task, hists), baseline, task.model, task.test, opt);
    mean_with += with_trace.back().test_accuracy;
    mean_without += without_trace.back().test_accuracy;
  }
  mean_with /= n_seeds;
  mean_without /= n_seeds;
  criterion(8, "non-IID accuracy benefit of the sharing plan",
            mean_with >= mean_without + 0.02,
            "mean accuracy with sharing " + std::to_string(mean_with) + ", without " +
                std::to_string(mean_without));
}

static void criterion9_homogeneous_null() {
  Scenario s = build_paper_scenario();
  for (auto& d : s.devices) {
    d.flops_per_cycle_C = 12;
    d.cpu_freq_f = 2e9;
    d.initial_samples = 5000;
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j) s.d2d.at(i, j) = 1e-8;
  s.geometry.reset();
  s.validate();

  OptimizationResult p1 = solve_p1(s);
  OptimizationResult p2 = solve_p2(s);
  const double t1 = baseline_T1(s);
  const double eps_d = sharing_epsilon(s);
  bool no_sharing = true;
  for (double d : p1.plan.d)
    if (d > eps_d) no_sharing = false;
  const double rel1 = std::abs(p1.objective - t1) / t1;
  const double rel2 = std::abs(p2.objective - t1) / t1;
  criterion(9, "homogeneous scenario: P1 = P2 = T1 and zero sharing",
            p1.report.converged && rel1 <= 1e-4 && rel2 <= 1e-4 && no_sharing,
            "rel(P1,T1) = " + std::to_string(rel1) + ", rel(P2,T1) = " + std::to_string(rel2));
}

int main() {
  criterion1_dominance();
  criterion2_inner_oracle();
  criterion3_p1_oracle();
  criterion4_remarks();
  criterion5_p2_structure();
  criterion6_gradient();
  criterion7_centralized();
  criterion8_accuracy_benefit();
  criterion9_homogeneous_null();
  if (failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
