#pragma once

// System configuration model: radio/training constants, device profiles,
// D2D channel matrix, channel generation from geometry and non-IID
// label partitioning.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgeshare {

class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// beta0 * (d/d0)^(-alpha)
inline double path_loss_gain(double distance_m, double beta0, double d0_m, double alpha) {
  if (distance_m <= 0.0) throw std::domain_error("path_loss_gain: distance must be > 0");
  if (d0_m <= 0.0) throw std::domain_error("path_loss_gain: d0 must be > 0");
  if (beta0 <= 0.0) throw std::domain_error("path_loss_gain: beta0 must be > 0");
  if (alpha < 0.0) throw std::domain_error("path_loss_gain: alpha must be >= 0");
  return beta0 * std::pow(distance_m / d0_m, -alpha);
}

struct SystemParams {
  double bandwidth_B = 0.0;       // Hz
  double noise_psd_n0 = 0.0;      // W/Hz
  double server_power_Ps = 0.0;   // W
  double model_bits_Q = 0.0;      // bits per model transfer
  double flops_per_sample_L = 0.0;
  int local_iters_N = 1;
  int global_iters_M = 1;
  double sample_bits_a = 0.0;     // bits per data sample
  double learning_rate_eta = 0.0;

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw config_error(std::string("SystemParams: ") + name + " must be strictly positive");
    };
    pos(bandwidth_B, "bandwidth_B");
    pos(noise_psd_n0, "noise_psd_n0");
    pos(server_power_Ps, "server_power_Ps");
    pos(model_bits_Q, "model_bits_Q");
    pos(flops_per_sample_L, "flops_per_sample_L");
    pos(sample_bits_a, "sample_bits_a");
    pos(learning_rate_eta, "learning_rate_eta");
    if (local_iters_N < 1) throw config_error("SystemParams: local_iters_N >= 1 required");
    if (global_iters_M < 1) throw config_error("SystemParams: global_iters_M >= 1 required");
  }

  bool operator==(const SystemParams&) const = default;
};

struct DeviceProfile {
  int id = 0;
  double flops_per_cycle_C = 1.0;
  double cpu_freq_f = 0.0;        // Hz
  double tx_power_P = 0.0;        // W
  double gain_to_server_g = 0.0;  // linear
  std::int64_t initial_samples = 0;
  std::vector<std::int64_t> label_histogram;  // empty = unspecified

  void validate() const {
    if (flops_per_cycle_C < 1.0)
      throw config_error("DeviceProfile: flops_per_cycle_C >= 1 required");
    if (!(cpu_freq_f > 0.0)) throw config_error("DeviceProfile: cpu_freq_f must be > 0");
    if (!(tx_power_P > 0.0)) throw config_error("DeviceProfile: tx_power_P must be > 0");
    if (!(gain_to_server_g > 0.0) || gain_to_server_g > 1.0)
      throw config_error("DeviceProfile: gain_to_server_g must be in (0, 1]");
    if (initial_samples < 0) throw config_error("DeviceProfile: initial_samples >= 0 required");
    if (!label_histogram.empty()) {
      std::int64_t sum = std::accumulate(label_histogram.begin(), label_histogram.end(),
                                         std::int64_t{0});
      if (sum != initial_samples)
        throw config_error("DeviceProfile: label_histogram must sum to initial_samples");
    }
  }

  bool operator==(const DeviceProfile&) const = default;
};

struct D2DChannelMatrix {
  int k = 0;
  std::vector<double> gains;  // row-major K*K, diagonal unused

  double at(int i, int j) const { return gains[static_cast<std::size_t>(i) * k + j]; }
  double& at(int i, int j) { return gains[static_cast<std::size_t>(i) * k + j]; }

  void validate() const {
    if (gains.size() != static_cast<std::size_t>(k) * k)
      throw config_error("D2DChannelMatrix: gains size must be K*K");
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        double h = at(i, j);
        if (!(h > 0.0) || h > 1.0)
          throw config_error("D2DChannelMatrix: off-diagonal gains must be in (0, 1]");
      }
  }

  bool operator==(const D2DChannelMatrix&) const = default;
};

struct Scenario {
  SystemParams params;
  std::vector<DeviceProfile> devices;
  D2DChannelMatrix d2d;
  std::optional<std::vector<std::array<double, 2>>> geometry;  // meters, server at origin

  int K() const { return static_cast<int>(devices.size()); }

  void validate() const {
    if (devices.size() < 2) throw config_error("Scenario: K >= 2 required");
    params.validate();
    for (const auto& d : devices) d.validate();
    if (d2d.k != K()) throw config_error("Scenario: D2DChannelMatrix dimension must equal K");
    d2d.validate();
    if (geometry && geometry->size() != devices.size())
      throw config_error("Scenario: geometry length must equal K");
  }

  bool operator==(const Scenario&) const = default;
};

// Default path-loss constants (beta0 = -30 dB at d0 = 1 m, exponent 3).
struct PathLossModel {
  double beta0 = 1e-3;
  double d0_m = 1.0;
  double alpha = 3.0;

  double gain(double distance_m) const {
    return std::min(1.0, path_loss_gain(distance_m, beta0, d0_m, alpha));
  }
};

namespace detail {
inline void fill_d2d_from_geometry(Scenario& s, const PathLossModel& pl) {
  const int k = s.K();
  s.d2d.k = k;
  s.d2d.gains.assign(static_cast<std::size_t>(k) * k, 0.0);
  const auto& geo = *s.geometry;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      double dx = geo[i][0] - geo[j][0];
      double dy = geo[i][1] - geo[j][1];
      double dist = std::max(1.0, std::hypot(dx, dy));
      s.d2d.at(i, j) = pl.gain(dist);
    }
}
}  // namespace detail

// Device cluster geometry: uniform in a disc of given radius centered at
// (center_distance, 0), with the server at the origin.
inline std::vector<std::array<double, 2>> disc_geometry(int k, double center_distance_m,
                                                        double radius_m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::array<double, 2>> geo(static_cast<std::size_t>(k));
  for (auto& p : geo) {
    double r = radius_m * std::sqrt(u01(rng));
    double th = 2.0 * M_PI * u01(rng);
    p = {center_distance_m + r * std::cos(th), r * std::sin(th)};
  }
  return geo;
}

// K=6 configuration: C = (8,8,12,12,16,16), f = (1.5,1.5,1.95,1.95,2.5,2.5) GHz,
// P_i = 33 dBm, P_s = 43 dBm, B = 1 MHz, n0 = -130 dBm/Hz, Q = 3.2 Gbit,
// L = 6 GFLOPs, a = 6276 bit, N = 5, eta = 0.01, 5000 samples per device,
// all devices 350 m from the server. D2D gains come from a seeded disc layout
// since pairwise distances are a free configuration choice.
inline Scenario build_paper_scenario(int global_iters_M = 10, double cluster_radius_m = 100.0,
                                     std::uint64_t geometry_seed = 1) {
  Scenario s;
  s.params.bandwidth_B = 1e6;
  s.params.noise_psd_n0 = dbm_to_watts(-130.0);
  s.params.server_power_Ps = dbm_to_watts(43.0);
  s.params.model_bits_Q = 3.2e9;
  s.params.flops_per_sample_L = 6e9;
  s.params.local_iters_N = 5;
  s.params.global_iters_M = global_iters_M;
  s.params.sample_bits_a = 6276.0;
  s.params.learning_rate_eta = 0.01;

  const double C[6] = {8, 8, 12, 12, 16, 16};
  const double f[6] = {1.5e9, 1.5e9, 1.95e9, 1.95e9, 2.5e9, 2.5e9};
  PathLossModel pl;
  const double g_server = pl.gain(350.0);
  for (int i = 0; i < 6; ++i) {
    DeviceProfile d;
    d.id = i;
    d.flops_per_cycle_C = C[i];
    d.cpu_freq_f = f[i];
    d.tx_power_P = dbm_to_watts(33.0);
    d.gain_to_server_g = g_server;
    d.initial_samples = 5000;
    s.devices.push_back(d);
  }
  s.geometry = disc_geometry(6, 350.0, cluster_radius_m, geometry_seed);
  detail::fill_d2d_from_geometry(s, pl);
  s.validate();
  return s;
}

// Randomized heterogeneous scenario for sweeps and property tests.
inline Scenario random_scenario(int k, std::uint64_t seed, int global_iters_M = 10,
                                double cluster_radius_m = 100.0) {
  if (k < 2) throw config_error("random_scenario: K >= 2 required");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_c(0, 2);
  std::uniform_real_distribution<double> freq(1.0e9, 2.5e9);
  std::uniform_real_distribution<double> pdbm(30.0, 33.0);
  std::uniform_int_distribution<std::int64_t> nsamp(2000, 8000);

  Scenario s = build_paper_scenario(global_iters_M);
  s.devices.clear();
  const double c_choices[3] = {8, 12, 16};
  for (int i = 0; i < k; ++i) {
    DeviceProfile d;
    d.id = i;
    d.flops_per_cycle_C = c_choices[pick_c(rng)];
    d.cpu_freq_f = freq(rng);
    d.tx_power_P = dbm_to_watts(pdbm(rng));
    d.initial_samples = nsamp(rng);
    d.gain_to_server_g = 1.0;  // filled from geometry below
    s.devices.push_back(d);
  }
  PathLossModel pl;
  s.geometry = disc_geometry(k, 350.0, cluster_radius_m, rng());
  for (int i = 0; i < k; ++i) {
    const auto& p = (*s.geometry)[i];
    s.devices[i].gain_to_server_g = pl.gain(std::hypot(p[0], p[1]));
  }
  detail::fill_d2d_from_geometry(s, pl);
  s.validate();
  return s;
}

// Each device gets samples from exactly labels_per_device classes, equal counts
// per chosen class. Class assignment is a seeded permutation walked round-robin
// so coverage stays even across devices.
inline std::vector<std::vector<std::int64_t>> make_noniid_partition(int num_devices,
                                                                    int num_classes,
                                                                    std::int64_t samples_per_device,
                                                                    int labels_per_device,
                                                                    std::uint64_t seed) {
  if (labels_per_device < 1 || labels_per_device > num_classes)
    throw config_error("make_noniid_partition: labels_per_device must be in [1, num_classes]");
  if (samples_per_device % labels_per_device != 0)
    throw config_error(
        "make_noniid_partition: samples_per_device must be divisible by labels_per_device");
  std::vector<int> perm(static_cast<std::size_t>(num_classes));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const std::int64_t per_class = samples_per_device / labels_per_device;
  std::vector<std::vector<std::int64_t>> out;
  int cursor = 0;
  for (int dev = 0; dev < num_devices; ++dev) {
    std::vector<std::int64_t> hist(static_cast<std::size_t>(num_classes), 0);
    for (int l = 0; l < labels_per_device; ++l) {
      hist[static_cast<std::size_t>(perm[cursor])] += per_class;
      cursor = (cursor + 1) % num_classes;
    }
    out.push_back(std::move(hist));
  }
  return out;
}

}  // namespace edgeshare
