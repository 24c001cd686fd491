// CLI front end: scenario | optimize | sweep | simulate.
// Exit codes: 0 success, 2 usage/config error, 3 numerical failure.

#include <CLI11.hpp>
#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

#include "edgeshare/convex_core.hpp"
#include "edgeshare/optimizer.hpp"
#include "edgeshare/scenario.hpp"
#include "edgeshare/serialization.hpp"
#include "edgeshare/training_sim.hpp"

namespace es = edgeshare;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw es::config_error("cannot open output file " + path);
  f << content;
}

es::OptimizationResult run_scheme(const std::string& scheme, const es::Scenario& s,
                                  double duality_tol) {
  if (scheme == "fixed") return es::solve_fixed(s);
  if (scheme == "p2") return es::solve_p2(s);
  if (scheme == "p1") {
    es::P1SearchOptions opt;
    opt.inner.duality_tol = duality_tol;
    return es::solve_p1(s, opt);
  }
  throw es::config_error("unknown scheme: " + scheme);
}

std::string scheme_label(const std::string& scheme) {
  if (scheme == "p1") return "proposed_P1";
  if (scheme == "p2") return "adaptive_P2";
  return "fixed_T1";
}

struct SweepRow {
  std::string scheme;
  double value = 0.0;
  bool ok = false;
  double objective = 0.0;
  double tau1 = 0.0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D2D data-sharing delay optimizer and training simulator"};
  app.require_subcommand(1);

  // scenario
  auto* sc = app.add_subcommand("scenario", "generate a scenario file");
  bool sc_paper = false, sc_random = false;
  std::uint64_t sc_seed = 1;
  int sc_k = 6, sc_m = 10;
  double sc_radius = 100.0;
  std::string sc_out;
  sc->add_flag("--paper", sc_paper, "reference 6-device configuration");
  sc->add_flag("--random", sc_random, "randomized heterogeneous configuration");
  sc->add_option("--seed", sc_seed, "RNG seed");
  sc->add_option("--k", sc_k, "number of devices (with --random)");
  sc->add_option("--m", sc_m, "global iterations");
  sc->add_option("--radius", sc_radius, "device cluster radius in meters");
  sc->add_option("-o,--out", sc_out, "output path (stdout if omitted)");

  // optimize
  auto* op = app.add_subcommand("optimize", "solve one scheme on a scenario");
  std::string op_scenario, op_scheme = "p1", op_out, op_profile;
  double op_tol = 1e-8;
  op->add_option("-s,--scenario", op_scenario, "scenario JSON path")->required();
  op->add_option("--scheme", op_scheme, "p1 | p2 | fixed")
      ->check(CLI::IsMember({"p1", "p2", "fixed"}));
  op->add_option("-o,--out", op_out, "result JSON path");
  op->add_option("--profile-csv", op_profile, "tau1 profile CSV path (p1 only)");
  op->add_option("--tol", op_tol, "inner solver duality tolerance");

  // sweep
  auto* sw = app.add_subcommand("sweep", "sweep a variable across schemes");
  std::string sw_scenario, sw_variable, sw_out;
  std::vector<double> sw_values;
  std::vector<std::string> sw_schemes = {"p1", "p2", "fixed"};
  std::uint64_t sw_seed = 1;
  int sw_jobs = 1;
  double sw_tol = 1e-8;
  sw->add_option("-s,--scenario", sw_scenario, "base scenario JSON path")->required();
  sw->add_option("--variable", sw_variable, "M | B | K | tx_power")
      ->required()
      ->check(CLI::IsMember({"M", "B", "K", "tx_power"}));
  sw->add_option("--values", sw_values, "values to sweep")->delimiter(',');
  sw->add_option("--schemes", sw_schemes, "subset of p1,p2,fixed")->delimiter(',');
  sw->add_option("--seed", sw_seed, "seed for K-regeneration");
  sw->add_option("--jobs", sw_jobs, "parallel rows");
  sw->add_option("--tol", sw_tol, "inner solver duality tolerance");
  sw->add_option("-o,--out", sw_out, "CSV output path (stdout if omitted)");

  // simulate
  auto* si = app.add_subcommand("simulate", "run the distributed training simulator");
  std::string si_scenario, si_scheme = "p1", si_plan, si_out = "trace";
  bool si_compare = false;
  std::uint64_t si_seed = 1;
  int si_classes = 10, si_features = 8, si_labels = 2, si_m = -1;
  std::int64_t si_samples = 500;
  double si_sep = 3.0;
  std::string si_policy = "proportional";
  si->add_option("-s,--scenario", si_scenario, "scenario JSON path")->required();
  si->add_option("--scheme", si_scheme, "plan source: p1 | p2 | fixed")
      ->check(CLI::IsMember({"p1", "p2", "fixed"}));
  si->add_option("--plan", si_plan, "explicit plan JSON (overrides --scheme)");
  si->add_flag("--compare", si_compare, "also run the no-sharing baseline");
  si->add_option("--seed", si_seed, "RNG seed for data and sharing selection");
  si->add_option("--classes", si_classes, "number of classes");
  si->add_option("--features", si_features, "feature dimension");
  si->add_option("--samples-per-device", si_samples, "training samples per device");
  si->add_option("--labels-per-device", si_labels, "classes held per device");
  si->add_option("--separation", si_sep, "class cluster separation");
  si->add_option("--m", si_m, "override global iterations");
  si->add_option("--policy", si_policy, "proportional | class_rebalance")
      ->check(CLI::IsMember({"proportional", "class_rebalance"}));
  si->add_option("-o,--out", si_out, "output CSV path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sc) {
      if (sc_paper == sc_random)
        throw es::config_error("scenario: exactly one of --paper / --random required");
      es::Scenario s = sc_paper ? es::build_paper_scenario(sc_m, sc_radius, sc_seed)
                                : es::random_scenario(sc_k, sc_seed, sc_m, sc_radius);
      if (sc_out.empty())
        std::cout << es::to_json(s).dump(2) << "\n";
      else
        write_file(sc_out, es::to_json(s).dump(2) + "\n");
      return 0;
    }

    if (*op) {
      es::Scenario s = es::load_scenario(op_scenario);
      es::OptimizationResult r = run_scheme(op_scheme, s, op_tol);
      std::cout << nlohmann::json(r.objective).dump() << "\n";
      if (!op_out.empty()) write_file(op_out, es::to_json(r).dump(2) + "\n");
      if (!op_profile.empty()) write_file(op_profile, es::tau1_profile_csv(r));
      return r.report.converged ? 0 : kExitNumeric;
    }

    if (*sw) {
      if (sw_values.empty()) throw es::config_error("sweep: --values must be non-empty");
      es::Scenario base = es::load_scenario(sw_scenario);
      std::vector<SweepRow> rows;
      for (const auto& scheme : sw_schemes)
        for (double v : sw_values) rows.push_back({scheme_label(scheme), v, false, 0.0, 0.0});

      std::atomic<std::size_t> next{0};
      std::atomic<int> successes{0};
      auto worker = [&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= rows.size()) return;
          auto& row = rows[i];
          try {
            es::Scenario s = base;
            if (sw_variable == "M")
              s.params.global_iters_M = static_cast<int>(row.value);
            else if (sw_variable == "B")
              s.params.bandwidth_B = row.value;
            else if (sw_variable == "tx_power")
              for (auto& d : s.devices) d.tx_power_P = row.value;
            else if (sw_variable == "K")
              s = es::random_scenario(static_cast<int>(row.value), sw_seed,
                                      base.params.global_iters_M);
            s.validate();
            const std::string scheme = row.scheme == "proposed_P1"   ? "p1"
                                       : row.scheme == "adaptive_P2" ? "p2"
                                                                     : "fixed";
            es::OptimizationResult r = run_scheme(scheme, s, sw_tol);
            row.ok = r.report.converged;
            row.objective = r.objective;
            row.tau1 = r.plan.tau1;
            if (row.ok) ++successes;
          } catch (const std::exception&) {
            row.ok = false;
          }
        }
      };
      std::vector<std::thread> pool;
      for (int t = 0; t < std::max(1, sw_jobs); ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();

      std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return a.scheme != b.scheme ? a.scheme < b.scheme : a.value < b.value;
      });
      std::ostringstream os;
      os << "scheme,variable,value,objective_seconds,tau1,converged\n";
      for (const auto& r : rows) {
        os << r.scheme << "," << sw_variable << "," << nlohmann::json(r.value).dump() << ",";
        if (r.ok)
          os << nlohmann::json(r.objective).dump() << "," << nlohmann::json(r.tau1).dump();
        else
          os << ",";
        os << "," << (r.ok ? "true" : "false") << "\n";
      }
      if (sw_out.empty())
        std::cout << os.str();
      else
        write_file(sw_out, os.str());
      return successes > 0 ? 0 : kExitNumeric;
    }

    if (*si) {
      es::Scenario s = es::load_scenario(si_scenario);
      auto histograms = es::make_noniid_partition(s.K(), si_classes, si_samples, si_labels, si_seed);
      for (int i = 0; i < s.K(); ++i) {
        s.devices[i].initial_samples = si_samples;
        s.devices[i].label_histogram = histograms[static_cast<std::size_t>(i)];
      }
      s.validate();
      if (si_m >= 0) s.params.global_iters_M = si_m;  // 0 means initial point only

      es::SharingPlan plan;
      if (!si_plan.empty()) {
        std::ifstream f(si_plan);
        if (!f) throw es::config_error("cannot open plan file " + si_plan);
        nlohmann::json j;
        f >> j;
        plan = es::plan_from_json(j.contains("plan") ? j["plan"] : j);
      } else {
        plan = run_scheme(si_scheme, s, 1e-8).plan;
      }

      es::SyntheticTask task = es::make_synthetic_task(
          si_classes, si_features, static_cast<std::int64_t>(si_samples) * s.K() * 2, si_sep,
          si_seed);
      es::SimOptions sim;
      sim.seed = si_seed;
      sim.policy = si_policy == "proportional" ? es::SharingPolicy::proportional
                                               : es::SharingPolicy::class_rebalance;

      auto trace = es::run_training(s, es::draw_datasets(task, histograms), plan, task.model,
                                    task.test, sim);
      if (si_compare) {
        auto baseline = es::run_training(s, es::draw_datasets(task, histograms),
                                         es::equal_split_plan(s), task.model, task.test, sim);
        write_file(si_out + "_sharing.csv", es::trace_csv(trace));
        write_file(si_out + "_nosharing.csv", es::trace_csv(baseline));
      } else {
        write_file(si_out + ".csv", es::trace_csv(trace));
      }
      return 0;
    }
  } catch (const es::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
