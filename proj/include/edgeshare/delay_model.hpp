#pragma once

// Rate and delay expressions for the broadcast / local-update / upload /
// sharing phases. All functions are pure; infinite delays are ordinary
// representable values (never exceptions) so feasibility probes can cross
// boundary points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "edgeshare/scenario.hpp"

namespace edgeshare {

inline constexpr double kInfiniteDelay = std::numeric_limits<double>::infinity();

// b * log2(1 + g*p / (n0*b)), continuously extended to 0 at b = 0 or p = 0.
inline double shannon_rate(double bandwidth, double power, double gain, double n0) {
  if (bandwidth <= 0.0 || power <= 0.0) return 0.0;
  const double snr = gain * power / (n0 * bandwidth);
  return bandwidth * std::log1p(snr) / M_LN2;
}

// Capacity ceiling of shannon_rate as bandwidth -> infinity.
inline double rate_ceiling(double power, double gain, double n0) {
  return gain * power / (n0 * M_LN2);
}

struct SharingPlan {
  int k = 0;
  std::vector<double> d;         // K*K sample counts, diagonal zero
  std::vector<double> b_d2d;     // K*K Hz
  std::vector<double> p_d2d;     // K*K W
  std::vector<double> b_upload;  // K Hz
  double tau1 = 0.0;
  double tau2 = 0.0;
  double objective = 0.0;

  static SharingPlan zero(int k) {
    SharingPlan p;
    p.k = k;
    p.d.assign(static_cast<std::size_t>(k) * k, 0.0);
    p.b_d2d.assign(static_cast<std::size_t>(k) * k, 0.0);
    p.p_d2d.assign(static_cast<std::size_t>(k) * k, 0.0);
    p.b_upload.assign(static_cast<std::size_t>(k), 0.0);
    return p;
  }

  double at(const std::vector<double>& m, int i, int j) const {
    return m[static_cast<std::size_t>(i) * k + j];
  }
  double& at(std::vector<double>& m, int i, int j) {
    return m[static_cast<std::size_t>(i) * k + j];
  }

  void validate(const Scenario& s, double rel_tol = 1e-9) const {
    const auto& dev = s.devices;
    const double B = s.params.bandwidth_B;
    double sum_bd2d = 0.0, sum_bu = 0.0;
    for (int i = 0; i < k; ++i) {
      double row_d = 0.0, row_p = 0.0;
      for (int j = 0; j < k; ++j) {
        if (at(d, i, j) < 0.0 || at(b_d2d, i, j) < 0.0 || at(p_d2d, i, j) < 0.0)
          throw std::invalid_argument("SharingPlan: negative entry");
        if (i == j) continue;
        row_d += at(d, i, j);
        row_p += at(p_d2d, i, j);
        sum_bd2d += at(b_d2d, i, j);
      }
      if (row_d > static_cast<double>(dev[i].initial_samples) * (1.0 + rel_tol))
        throw std::invalid_argument("SharingPlan: outgoing samples exceed holdings");
      if (row_p > dev[i].tx_power_P * (1.0 + rel_tol))
        throw std::invalid_argument("SharingPlan: D2D power exceeds budget");
      if (b_upload[i] < 0.0) throw std::invalid_argument("SharingPlan: negative upload bandwidth");
      sum_bu += b_upload[i];
    }
    if (sum_bd2d > B * (1.0 + rel_tol))
      throw std::invalid_argument("SharingPlan: D2D bandwidth exceeds B");
    if (sum_bu > B * (1.0 + rel_tol))
      throw std::invalid_argument("SharingPlan: upload bandwidth exceeds B");
  }
};

struct DelayBreakdown {
  double broadcast = 0.0;            // t(I)
  std::vector<double> compute;       // t(II) per device, post-sharing counts
  std::vector<double> upload;        // t(III) per device
  double sharing = 0.0;              // t0
  double aggregation = 0.0;          // t(IV), negligible
  double total = 0.0;
};

inline double broadcast_delay(const Scenario& s) {
  double min_rate = kInfiniteDelay;
  for (const auto& dev : s.devices)
    min_rate = std::min(min_rate, shannon_rate(s.params.bandwidth_B, s.params.server_power_Ps,
                                               dev.gain_to_server_g, s.params.noise_psd_n0));
  if (!(min_rate > 0.0)) throw std::runtime_error("broadcast_delay: infeasible downlink");
  return s.params.model_bits_Q / min_rate;
}

inline double local_update_delay(double samples, int n_local, double flops_per_sample,
                                 double flops_per_cycle, double cpu_freq) {
  return n_local * flops_per_sample * samples / (flops_per_cycle * cpu_freq);
}

inline double upload_delay(double b_upload, const DeviceProfile& dev, const SystemParams& p) {
  const double r = shannon_rate(b_upload, dev.tx_power_P, dev.gain_to_server_g, p.noise_psd_n0);
  if (r <= 0.0) return kInfiniteDelay;
  return p.model_bits_Q / r;
}

inline double sharing_delay(const SharingPlan& plan, const Scenario& s) {
  double worst = 0.0;
  for (int i = 0; i < plan.k; ++i)
    for (int j = 0; j < plan.k; ++j) {
      if (i == j) continue;
      const double dij = plan.at(plan.d, i, j);
      if (dij <= 0.0) continue;
      const double r = shannon_rate(plan.at(plan.b_d2d, i, j), plan.at(plan.p_d2d, i, j),
                                    s.d2d.at(i, j), s.params.noise_psd_n0);
      worst = std::max(worst, r > 0.0 ? s.params.sample_bits_a * dij / r : kInfiniteDelay);
    }
  return worst;
}

inline std::vector<double> post_share_counts(const std::vector<double>& d,
                                             const std::vector<std::int64_t>& initial) {
  const int k = static_cast<int>(initial.size());
  std::vector<double> out(initial.begin(), initial.end());
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const double dij = d[static_cast<std::size_t>(i) * k + j];
      out[i] -= dij;
      out[j] += dij;
    }
  return out;
}

inline std::vector<std::int64_t> initial_counts(const Scenario& s) {
  std::vector<std::int64_t> c;
  for (const auto& d : s.devices) c.push_back(d.initial_samples);
  return c;
}

inline DelayBreakdown total_delay(const SharingPlan& plan, const Scenario& s) {
  DelayBreakdown out;
  out.broadcast = broadcast_delay(s);
  out.sharing = sharing_delay(plan, s);
  const auto counts = post_share_counts(plan.d, initial_counts(s));
  double worst = 0.0;
  for (int i = 0; i < plan.k; ++i) {
    const auto& dev = s.devices[i];
    out.compute.push_back(local_update_delay(counts[i], s.params.local_iters_N,
                                             s.params.flops_per_sample_L, dev.flops_per_cycle_C,
                                             dev.cpu_freq_f));
    out.upload.push_back(upload_delay(plan.b_upload[i], dev, s.params));
    worst = std::max(worst, out.compute.back() + out.upload.back());
  }
  out.aggregation = 0.0;
  out.total = out.sharing + s.params.global_iters_M * (out.broadcast + worst);
  return out;
}

// No sharing, equal upload bandwidth split.
inline SharingPlan equal_split_plan(const Scenario& s) {
  SharingPlan p = SharingPlan::zero(s.K());
  for (auto& b : p.b_upload) b = s.params.bandwidth_B / s.K();
  return p;
}

inline double baseline_T1(const Scenario& s) {
  const double t1 = broadcast_delay(s);
  double worst = 0.0;
  const double beq = s.params.bandwidth_B / s.K();
  for (const auto& dev : s.devices) {
    const double t2 = local_update_delay(static_cast<double>(dev.initial_samples),
                                         s.params.local_iters_N, s.params.flops_per_sample_L,
                                         dev.flops_per_cycle_C, dev.cpu_freq_f);
    worst = std::max(worst, t2 + upload_delay(beq, dev, s.params));
  }
  return s.params.global_iters_M * (t1 + worst);
}

// Integral rounding for the training simulator: floor everything, then hand
// units back in largest-remainder order without breaching row budgets.
inline std::vector<std::int64_t> round_sharing_counts(const std::vector<double>& d,
                                                      const std::vector<std::int64_t>& initial) {
  const int k = static_cast<int>(initial.size());
  std::vector<std::int64_t> out(d.size(), 0);
  std::vector<std::int64_t> row_sum(static_cast<std::size_t>(k), 0);
  double total = 0.0;
  std::vector<std::pair<double, std::size_t>> frac;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const std::size_t idx = static_cast<std::size_t>(i) * k + j;
      const double v = d[idx];
      total += v;
      const auto fl = static_cast<std::int64_t>(std::floor(v));
      out[idx] = fl;
      row_sum[static_cast<std::size_t>(i)] += fl;
      frac.emplace_back(v - static_cast<double>(fl), idx);
    }
  std::int64_t target = static_cast<std::int64_t>(std::llround(total));
  std::int64_t have = std::accumulate(out.begin(), out.end(), std::int64_t{0});
  std::stable_sort(frac.begin(), frac.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [f, idx] : frac) {
    if (have >= target) break;
    const int row = static_cast<int>(idx) / k;
    if (row_sum[static_cast<std::size_t>(row)] + 1 > initial[static_cast<std::size_t>(row)])
      continue;
    ++out[idx];
    ++row_sum[static_cast<std::size_t>(row)];
    ++have;
  }
  return out;
}

}  // namespace edgeshare
