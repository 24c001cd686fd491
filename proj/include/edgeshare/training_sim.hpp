#pragma once

// Desk-scale distributed BGD: broadcast -> N local gradient steps ->
// weighted aggregation, executed over M rounds on synthetic Gaussian-cluster
// data, with an optional up-front application of a sharing plan. Delay
// accounting comes from delay_model; learning dynamics and the delay model
// are deliberately decoupled.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "edgeshare/delay_model.hpp"
#include "edgeshare/scenario.hpp"

namespace edgeshare {

struct Sample {
  Eigen::VectorXd x;
  int y = 0;
};

using Dataset = std::vector<Sample>;

struct ModelConfig {
  int num_classes = 0;
  int features = 0;

  int dim() const { return num_classes * features + num_classes; }
};

// Flattened multinomial logistic regression: W (C x F, row-major) then bias.
struct ModelState {
  Eigen::VectorXd w;

  static ModelState zeros(const ModelConfig& c) { return {Eigen::VectorXd::Zero(c.dim())}; }
};

namespace detail {
inline Eigen::VectorXd softmax_logits(const Eigen::VectorXd& w, const ModelConfig& c,
                                      const Eigen::VectorXd& x) {
  Eigen::VectorXd z(c.num_classes);
  for (int cls = 0; cls < c.num_classes; ++cls)
    z[cls] = w.segment(cls * c.features, c.features).dot(x) + w[c.num_classes * c.features + cls];
  return z;
}
}  // namespace detail

// Mean softmax cross-entropy and its exact gradient.
inline std::pair<double, Eigen::VectorXd> loss_and_gradient(const Eigen::VectorXd& w,
                                                            const Dataset& data,
                                                            const ModelConfig& c) {
  if (data.empty()) throw std::invalid_argument("loss_and_gradient: empty dataset");
  double loss = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(c.dim());
  for (const auto& s : data) {
    Eigen::VectorXd z = detail::softmax_logits(w, c, s.x);
    const double zmax = z.maxCoeff();
    Eigen::VectorXd p = (z.array() - zmax).exp();
    const double norm = p.sum();
    p /= norm;
    loss += -(z[s.y] - zmax - std::log(norm));
    for (int cls = 0; cls < c.num_classes; ++cls) {
      const double coef = p[cls] - (cls == s.y ? 1.0 : 0.0);
      grad.segment(cls * c.features, c.features) += coef * s.x;
      grad[c.num_classes * c.features + cls] += coef;
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  return {loss * inv, grad * inv};
}

// N full-batch gradient-descent steps.
inline Eigen::VectorXd local_update(Eigen::VectorXd w, const Dataset& data, const ModelConfig& c,
                                    double eta, int n_steps) {
  for (int s = 0; s < n_steps; ++s) w -= eta * loss_and_gradient(w, data, c).second;
  return w;
}

// Sample-count-weighted average in a fixed reduction order.
inline Eigen::VectorXd global_aggregate(
    const std::vector<std::pair<Eigen::VectorXd, std::int64_t>>& models) {
  std::int64_t total = 0;
  for (const auto& [w, n] : models) total += n;
  if (total <= 0) throw std::invalid_argument("global_aggregate: all sample counts are zero");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(models.front().first.size());
  for (const auto& [w, n] : models)
    out += (static_cast<double>(n) / static_cast<double>(total)) * w;
  return out;
}

enum class SharingPolicy { proportional, class_rebalance };

struct SharingOutcome {
  std::vector<Dataset> datasets;
  bool policy_fallback = false;  // rebalance degenerated to proportional somewhere
};

// Move the rounded d_ij counts between devices. Proportional picks uniformly
// at random from the sender (seeded); class_rebalance prefers the sender's
// most over-represented classes.
inline SharingOutcome apply_sharing_plan(std::vector<Dataset> datasets,
                                         const std::vector<std::int64_t>& d_rounded,
                                         SharingPolicy policy, std::uint64_t seed) {
  const int k = static_cast<int>(datasets.size());
  std::mt19937_64 rng(seed);
  SharingOutcome out;

  // stage all outgoing transfers before any arrivals land
  std::vector<std::vector<Sample>> inbox(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      std::int64_t want = d_rounded[static_cast<std::size_t>(i) * k + j];
      if (want <= 0) continue;
      auto& src = datasets[static_cast<std::size_t>(i)];
      if (want > static_cast<std::int64_t>(src.size()))
        throw std::invalid_argument("apply_sharing_plan: transfer exceeds holdings");

      std::vector<std::size_t> order(src.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      if (policy == SharingPolicy::class_rebalance) {
        std::vector<std::int64_t> hist;
        for (const auto& s : src) {
          if (s.y >= static_cast<int>(hist.size())) hist.resize(s.y + 1, 0);
          ++hist[static_cast<std::size_t>(s.y)];
        }
        const int distinct =
            static_cast<int>(std::count_if(hist.begin(), hist.end(), [](auto v) { return v > 0; }));
        if (distinct <= 1) {
          out.policy_fallback = true;
          std::shuffle(order.begin(), order.end(), rng);
        } else {
          std::shuffle(order.begin(), order.end(), rng);
          std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return hist[static_cast<std::size_t>(src[a].y)] >
                   hist[static_cast<std::size_t>(src[b].y)];
          });
        }
      } else {
        std::shuffle(order.begin(), order.end(), rng);
      }

      std::vector<bool> taken(src.size(), false);
      for (std::int64_t t = 0; t < want; ++t) {
        inbox[static_cast<std::size_t>(j)].push_back(src[order[static_cast<std::size_t>(t)]]);
        taken[order[static_cast<std::size_t>(t)]] = true;
      }
      Dataset rest;
      rest.reserve(src.size() - static_cast<std::size_t>(want));
      for (std::size_t idx = 0; idx < src.size(); ++idx)
        if (!taken[idx]) rest.push_back(src[idx]);
      src = std::move(rest);
    }
  }
  for (int j = 0; j < k; ++j)
    for (auto& s : inbox[static_cast<std::size_t>(j)])
      datasets[static_cast<std::size_t>(j)].push_back(std::move(s));
  out.datasets = std::move(datasets);
  return out;
}

struct TraceRow {
  int iteration = 0;
  double elapsed_seconds = 0.0;
  double global_loss = 0.0;
  double test_accuracy = 0.0;
};

using TrainingTrace = std::vector<TraceRow>;

inline double test_accuracy(const Eigen::VectorXd& w, const ModelConfig& c, const Dataset& test) {
  if (test.empty()) return 0.0;
  int hits = 0;
  for (const auto& s : test) {
    Eigen::VectorXd z = detail::softmax_logits(w, c, s.x);
    int best;
    z.maxCoeff(&best);
    if (best == s.y) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

// Weighted global loss over non-empty partitions.
inline double global_loss(const Eigen::VectorXd& w, const std::vector<Dataset>& datasets,
                          const ModelConfig& c) {
  double num = 0.0;
  std::int64_t den = 0;
  for (const auto& d : datasets) {
    if (d.empty()) continue;
    num += static_cast<double>(d.size()) * loss_and_gradient(w, d, c).first;
    den += static_cast<std::int64_t>(d.size());
  }
  if (den == 0) throw std::invalid_argument("global_loss: all partitions empty");
  return num / static_cast<double>(den);
}

struct SimOptions {
  SharingPolicy policy = SharingPolicy::proportional;
  std::uint64_t seed = 0;
};

// Full protocol: apply the plan once (accruing its sharing delay), then M
// rounds of broadcast / local update / aggregate with modeled delays.
inline TrainingTrace run_training(const Scenario& s, std::vector<Dataset> datasets,
                                  const SharingPlan& plan, const ModelConfig& c,
                                  const Dataset& test, const SimOptions& opt = SimOptions{}) {
  const int k = s.K();
  if (static_cast<int>(datasets.size()) != k)
    throw std::invalid_argument("run_training: dataset count != K");

  const auto d_rounded = round_sharing_counts(plan.d, initial_counts(s));
  auto shared = apply_sharing_plan(std::move(datasets), d_rounded, opt.policy, opt.seed);
  auto& data = shared.datasets;

  double elapsed = sharing_delay(plan, s);
  const double t_bcast = broadcast_delay(s);
  double round_worst = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto& dev = s.devices[i];
    round_worst = std::max(
        round_worst, local_update_delay(static_cast<double>(data[static_cast<std::size_t>(i)].size()),
                                        s.params.local_iters_N, s.params.flops_per_sample_L,
                                        dev.flops_per_cycle_C, dev.cpu_freq_f) +
                         upload_delay(plan.b_upload[i], dev, s.params));
  }
  const double round_delay = t_bcast + round_worst;

  Eigen::VectorXd w = ModelState::zeros(c).w;
  TrainingTrace trace;
  trace.push_back({0, elapsed, global_loss(w, data, c), test_accuracy(w, c, test)});

  for (int m = 1; m <= s.params.global_iters_M; ++m) {
    std::vector<std::pair<Eigen::VectorXd, std::int64_t>> models;
    for (int i = 0; i < k; ++i) {
      const auto& di = data[static_cast<std::size_t>(i)];
      if (di.empty()) continue;  // zero weight, no contribution
      models.emplace_back(local_update(w, di, c, s.params.learning_rate_eta, s.params.local_iters_N),
                          static_cast<std::int64_t>(di.size()));
    }
    w = global_aggregate(models);
    elapsed += round_delay;
    trace.push_back({m, elapsed, global_loss(w, data, c), test_accuracy(w, c, test)});
  }
  return trace;
}

struct SyntheticTask {
  std::vector<Dataset> pool_by_class;
  Dataset test;
  ModelConfig model;
};

// Gaussian class clusters: class means are random directions scaled by
// class_separation, unit-variance noise around them.
inline SyntheticTask make_synthetic_task(int num_classes, int features, std::int64_t samples_total,
                                         double class_separation, std::uint64_t seed) {
  if (num_classes < 2 || features < 1 || samples_total < num_classes)
    throw std::invalid_argument("make_synthetic_task: sizes must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::VectorXd> means;
  for (int cls = 0; cls < num_classes; ++cls) {
    Eigen::VectorXd u(features);
    for (int f = 0; f < features; ++f) u[f] = gauss(rng);
    means.push_back(class_separation * u / std::max(1e-12, u.norm()));
  }
  auto draw = [&](int cls) {
    Sample s;
    s.y = cls;
    s.x = means[static_cast<std::size_t>(cls)];
    for (int f = 0; f < features; ++f) s.x[f] += gauss(rng);
    return s;
  };

  SyntheticTask task;
  task.model = {num_classes, features};
  const std::int64_t per_class = samples_total / num_classes;
  task.pool_by_class.resize(static_cast<std::size_t>(num_classes));
  for (int cls = 0; cls < num_classes; ++cls)
    for (std::int64_t i = 0; i < per_class; ++i)
      task.pool_by_class[static_cast<std::size_t>(cls)].push_back(draw(cls));
  const std::int64_t test_n = std::max<std::int64_t>(num_classes, samples_total / 5);
  for (std::int64_t i = 0; i < test_n; ++i)
    task.test.push_back(draw(static_cast<int>(i % num_classes)));
  return task;
}

// Materialize device datasets from per-class pools following label histograms.
inline std::vector<Dataset> draw_datasets(const SyntheticTask& task,
                                          const std::vector<std::vector<std::int64_t>>& histograms) {
  std::vector<std::size_t> cursor(task.pool_by_class.size(), 0);
  std::vector<Dataset> out;
  for (const auto& hist : histograms) {
    Dataset d;
    for (std::size_t cls = 0; cls < hist.size(); ++cls) {
      for (std::int64_t n = 0; n < hist[cls]; ++n) {
        if (cursor[cls] >= task.pool_by_class[cls].size())
          throw std::invalid_argument("draw_datasets: class pool exhausted");
        d.push_back(task.pool_by_class[cls][cursor[cls]++]);
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace edgeshare
