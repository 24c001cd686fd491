#pragma once

// Top-level solvers: the sharing design (1D search over tau1 with an inner
// convex solve), the adaptive-bandwidth benchmark (min-max bisection), the
// fixed equal-split baseline, and structural optimality verification.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "edgeshare/convex_core.hpp"
#include "edgeshare/delay_model.hpp"
#include "edgeshare/scenario.hpp"

namespace edgeshare {

enum class Scheme { proposed_P1, adaptive_P2, fixed_T1 };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::proposed_P1: return "proposed_P1";
    case Scheme::adaptive_P2: return "adaptive_P2";
    case Scheme::fixed_T1: return "fixed_T1";
  }
  return "?";
}

struct Tau1Sample {
  double tau1 = 0.0;
  double objective = 0.0;
  bool converged = false;
};

struct OptimizationResult {
  Scheme scheme = Scheme::fixed_T1;
  SharingPlan plan;
  DelayBreakdown delay;
  SolverReport report;
  std::vector<Tau1Sample> tau1_profile;
  double objective = 0.0;
};

class optimization_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline OptimizationResult solve_fixed(const Scenario& s) {
  OptimizationResult r;
  r.scheme = Scheme::fixed_T1;
  r.plan = equal_split_plan(s);
  r.delay = total_delay(r.plan, s);
  r.plan.tau2 = r.delay.total / s.params.global_iters_M - r.delay.broadcast;
  r.plan.objective = r.objective = r.delay.total;
  r.report.converged = true;
  r.report.message = "closed form";
  return r;
}

// Min-max bisection on the per-round compute+upload time tau: a candidate tau
// is feasible iff the minimum bandwidths that let every device finish by tau
// fit in B.
inline OptimizationResult solve_p2(const Scenario& s, double rel_tol = 1e-12) {
  const int k = s.K();
  const auto& pr = s.params;
  std::vector<double> t_compute(k);
  for (int i = 0; i < k; ++i)
    t_compute[i] = local_update_delay(static_cast<double>(s.devices[i].initial_samples),
                                      pr.local_iters_N, pr.flops_per_sample_L,
                                      s.devices[i].flops_per_cycle_C, s.devices[i].cpu_freq_f);
  const double t_bcast = broadcast_delay(s);
  const double t1 = baseline_T1(s);

  double lo = *std::max_element(t_compute.begin(), t_compute.end());
  double hi = t1 / pr.global_iters_M - t_bcast;  // equal split achieves this

  for (int i = 0; i < k; ++i) {
    const double floor_i = t_compute[i] + pr.model_bits_Q /
                                              rate_ceiling(s.devices[i].tx_power_P,
                                                           s.devices[i].gain_to_server_g,
                                                           pr.noise_psd_n0);
    if (floor_i >= hi)
      throw optimization_error("solve_p2: device " + std::to_string(i) +
                               " cannot meet any feasible round time");
  }

  auto min_bandwidths = [&](double tau, std::vector<double>& b) -> bool {
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      const double slack = tau - t_compute[i];
      if (slack <= 0.0) return false;
      auto bi = min_bandwidth_for_rate(pr.model_bits_Q / slack, s.devices[i].tx_power_P,
                                       s.devices[i].gain_to_server_g, pr.noise_psd_n0);
      if (!bi) return false;
      b[i] = *bi;
      sum += *bi;
    }
    // slack absorbs round-off when the optimum sits exactly at the budget
    return sum <= pr.bandwidth_B * (1.0 + 1e-9);
  };

  std::vector<double> b(k);
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (min_bandwidths(mid, b))
      hi = mid;
    else
      lo = mid;
  }
  if (!min_bandwidths(hi, b)) throw optimization_error("solve_p2: bisection lost feasibility");

  // hand the residual bandwidth back proportionally; sum becomes exactly B
  double sum = 0.0;
  for (double v : b) sum += v;
  for (auto& v : b) v *= pr.bandwidth_B / sum;

  OptimizationResult r;
  r.scheme = Scheme::adaptive_P2;
  r.plan = SharingPlan::zero(k);
  r.plan.b_upload = b;
  r.delay = total_delay(r.plan, s);
  r.plan.tau2 = hi;
  r.plan.objective = r.objective = r.delay.total;
  r.report.converged = true;
  r.report.message = "bisection";
  return r;
}

struct P1SearchOptions {
  int grid_points = 64;
  double rel_tol = 1e-4;  // golden-section interval width relative to T1
  SolverOptions inner;
};

inline OptimizationResult solve_p1(const Scenario& s,
                                   const P1SearchOptions& opt = P1SearchOptions{}) {
  const double t1 = baseline_T1(s);
  const double t_bcast = broadcast_delay(s);
  const double m_iters = s.params.global_iters_M;

  OptimizationResult r;
  r.scheme = Scheme::proposed_P1;

  double best_obj = kInfiniteDelay;
  InnerSolution best_sol;
  double best_tau1 = 0.0;

  auto probe = [&](double tau1) -> double {
    InnerSolution sol = solve_inner(tau1, s, opt.inner);
    Tau1Sample sample{tau1, kInfiniteDelay, sol.report.converged};
    if (sol.report.converged) {
      sample.objective = tau1 + m_iters * (t_bcast + sol.tau2);
      if (sample.objective < best_obj) {
        best_obj = sample.objective;
        best_sol = std::move(sol);
        best_tau1 = tau1;
      }
    }
    r.tau1_profile.push_back(sample);
    return sample.objective;
  };

  const int g = std::max(2, opt.grid_points);
  std::vector<double> grid_obj(static_cast<std::size_t>(g), kInfiniteDelay);
  int best_idx = -1;
  for (int i = 0; i < g; ++i) {
    const double tau1 = t1 * i / (g - 1);
    grid_obj[static_cast<std::size_t>(i)] = probe(tau1);
    if (best_idx < 0 || grid_obj[static_cast<std::size_t>(i)] < grid_obj[static_cast<std::size_t>(best_idx)])
      best_idx = i;
  }
  if (!(best_obj < kInfiniteDelay))
    throw optimization_error("solve_p1: inner solver failed at every tau1 sample");

  // golden-section refinement around the grid minimum
  double a = t1 * std::max(0, best_idx - 1) / (g - 1);
  double b = t1 * std::min(g - 1, best_idx + 1) / (g - 1);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = probe(c), fd = probe(d);
  while (b - a > opt.rel_tol * t1) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = probe(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = probe(d);
    }
  }

  r.plan = best_sol.plan;
  r.plan.tau1 = best_tau1;
  r.report = best_sol.report;
  r.delay = total_delay(r.plan, s);
  r.plan.objective = r.objective = r.delay.total;
  std::stable_sort(r.tau1_profile.begin(), r.tau1_profile.end(),
                   [](const Tau1Sample& x, const Tau1Sample& y) { return x.tau1 < y.tau1; });
  return r;
}

struct RemarkVerification {
  bool unidirectional = true;   // min(d_ij, d_ji) below the zero threshold
  bool equalized = true;        // compute+upload spread small relative to tau2
  double worst_bidirectional = 0.0;
  double spread = 0.0;          // max - min of per-device compute+upload
  double tau2 = 0.0;
};

inline RemarkVerification verify_remarks(const SharingPlan& plan, const Scenario& s,
                                         double tol = 1e-3) {
  RemarkVerification v;
  const int k = plan.k;
  const double eps_d = sharing_epsilon(s);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double both = std::min(plan.at(plan.d, i, j), plan.at(plan.d, j, i));
      v.worst_bidirectional = std::max(v.worst_bidirectional, both);
    }
  v.unidirectional = v.worst_bidirectional <= eps_d;

  const auto counts = post_share_counts(plan.d, initial_counts(s));
  double lo = kInfiniteDelay, hi = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto& dev = s.devices[i];
    const double t = local_update_delay(counts[i], s.params.local_iters_N,
                                        s.params.flops_per_sample_L, dev.flops_per_cycle_C,
                                        dev.cpu_freq_f) +
                     upload_delay(plan.b_upload[i], dev, s.params);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  v.tau2 = hi;
  v.spread = hi - lo;
  v.equalized = v.spread <= tol * v.tau2;
  return v;
}

}  // namespace edgeshare
