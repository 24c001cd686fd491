#pragma once

// Numerical machinery: scalar bisection, Shannon-rate inversion, and a
// log-barrier interior-point solver for the inner convex program at fixed
// sharing budget tau1.
//
// Variables (sharing enabled): d_ij, b_ij, p_ij over ordered pairs, upload
// bandwidths b̄_i, and the epigraph variable tau2. Everything is rescaled to
// order-1 magnitudes before Newton iterations; raw magnitudes span
// 1e-11..1e9 and destroy Hessian conditioning otherwise.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "edgeshare/delay_model.hpp"
#include "edgeshare/scenario.hpp"

namespace edgeshare {

class bracket_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Solve f(x) = target for monotone f on [lo, hi]; resolution limited by tol
// on x. Direction is inferred from the endpoint values.
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi,
                     double tol) {
  double flo = f(lo), fhi = f(hi);
  const bool increasing = fhi >= flo;
  const double fmin = std::min(flo, fhi), fmax = std::max(flo, fhi);
  if (target < fmin || target > fmax) throw bracket_error("bisect: target not bracketed");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < target) == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Smallest bandwidth achieving required_rate at the given power/gain/noise,
// or nullopt past the capacity ceiling g*p/(n0*ln2).
inline std::optional<double> min_bandwidth_for_rate(double required_rate, double power, double gain,
                                                    double n0, double rel_tol = 1e-13) {
  if (required_rate <= 0.0) return 0.0;
  const double ceiling = rate_ceiling(power, gain, n0);
  if (!(required_rate < ceiling)) return std::nullopt;
  double hi = required_rate;  // rate(b) < b at SNR below ~1, grow until enough
  while (shannon_rate(hi, power, gain, n0) < required_rate) {
    hi *= 2.0;
    if (!std::isfinite(hi)) return std::nullopt;
  }
  double lo = 0.0;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (shannon_rate(mid, power, gain, n0) >= required_rate)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

struct SolverOptions {
  double duality_tol = 1e-8;   // stop when (#constraints)/barrier_t <= this
  double feas_tol = 1e-6;      // relative feasibility requirement on the result
  double mu = 10.0;            // barrier parameter growth per outer stage
  double alpha = 0.25;         // Armijo constant
  double beta = 0.5;           // backtracking shrink
  int max_newton = 400;        // total Newton iterations across stages
  double t0 = 1.0;             // initial barrier parameter
};

struct SolverReport {
  bool converged = false;
  int iterations = 0;
  double final_duality_measure = 0.0;
  double max_constraint_violation = 0.0;
  std::string message;
};

struct InnerSolution {
  double tau2 = kInfiniteDelay;
  SharingPlan plan;
  SolverReport report;
};

namespace detail {

struct Rate2 {  // value and partials of b*log2(1 + h*p/(n0*b))
  double r, rb, rp, rbb, rbp, rpp;
};

inline Rate2 rate_partials(double b, double p, double h, double n0) {
  const double c = h / n0;
  const double s = c * p / b;
  const double l1p = std::log1p(s);
  const double inv = 1.0 / (1.0 + s);
  Rate2 o;
  o.r = b * l1p / M_LN2;
  o.rb = (l1p - s * inv) / M_LN2;
  o.rp = c * inv / M_LN2;
  const double common = inv * inv / (b * M_LN2);
  o.rbb = -s * s * common;
  o.rbp = c * s * common;
  o.rpp = -c * c * common;
  return o;
}

// Ordered pairs (i, j), j != i, row-major.
inline std::vector<std::pair<int, int>> ordered_pairs(int k) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) out.emplace_back(i, j);
  return out;
}

class InnerBarrier {
public:
  InnerBarrier(double tau1, const Scenario& s) : tau1_(tau1), s_(s), k_(s.K()) {
    pairs_ = ordered_pairs(k_);
    share_ = tau1_ > 0.0;
    np_ = share_ ? static_cast<int>(pairs_.size()) : 0;
    n_ = 3 * np_ + k_ + 1;
    id_ = 0;
    ib_ = np_;
    ip_ = 2 * np_;
    iu_ = 3 * np_;
    it_ = 3 * np_ + k_;

    const auto& pr = s_.params;
    d_scale_ = 1.0;
    for (const auto& dev : s_.devices)
      d_scale_ = std::max(d_scale_, static_cast<double>(dev.initial_samples));
    b_scale_ = pr.bandwidth_B;
    p_scale_ = 0.0;
    for (const auto& dev : s_.devices) p_scale_ = std::max(p_scale_, dev.tx_power_P);
    eps_b_ = 1e-9 * pr.bandwidth_B;

    compute_coeff_.resize(k_);
    for (int i = 0; i < k_; ++i)
      compute_coeff_[i] = pr.local_iters_N * pr.flops_per_sample_L /
                          (s_.devices[i].flops_per_cycle_C * s_.devices[i].cpu_freq_f);

    // tau2 scale from the strictly feasible start
    double t2 = 0.0;
    for (int i = 0; i < k_; ++i)
      t2 = std::max(t2, compute_coeff_[i] * s_.devices[i].initial_samples +
                            upload_delay(pr.bandwidth_B / (2.0 * k_), s_.devices[i], pr));
    t_scale_ = 2.0 * t2;

    m_ = 0;
    m_ += n_;                 // non-negativity / floors on every variable
    if (share_) m_ += k_;     // outgoing-sample budgets
    if (share_) m_ += 1;      // D2D bandwidth budget
    if (share_) m_ += k_;     // D2D power budgets
    m_ += 1;                  // upload bandwidth budget
    if (share_) m_ += np_;    // sharing-time epigraph (17c)
    m_ += k_;                 // compute+upload epigraph (17d)
  }

  int num_vars() const { return n_; }
  int num_constraints() const { return m_; }
  bool share_enabled() const { return share_; }
  double tau2_scale() const { return t_scale_; }

  Eigen::VectorXd strictly_feasible_start() const {
    Eigen::VectorXd x(n_);
    const auto& pr = s_.params;
    if (share_) {
      for (int q = 0; q < np_; ++q) {
        const double b0 = pr.bandwidth_B / (2.0 * np_);
        const double p0 = s_.devices[pairs_[q].first].tx_power_P / (2.0 * (k_ - 1));
        const auto [i, j] = pairs_[q];
        const double r0 = shannon_rate(b0, p0, s_.d2d.at(i, j), pr.noise_psd_n0);
        // d small enough to keep the sharing-time constraint strictly slack
        x[id_ + q] = std::min(1e-3, 0.25 * tau1_ * r0 / (pr.sample_bits_a * d_scale_));
        x[ib_ + q] = b0 / b_scale_;
        x[ip_ + q] = p0 / p_scale_;
      }
    }
    for (int i = 0; i < k_; ++i) x[iu_ + i] = pr.bandwidth_B / (2.0 * k_) / b_scale_;
    x[it_] = 1.0;  // t_scale_ is twice the worst start delay
    return x;
  }

  // Physical accessors
  double d_phys(const Eigen::VectorXd& x, int q) const { return x[id_ + q] * d_scale_; }
  double b_phys(const Eigen::VectorXd& x, int q) const { return x[ib_ + q] * b_scale_; }
  double p_phys(const Eigen::VectorXd& x, int q) const { return x[ip_ + q] * p_scale_; }
  double bu_phys(const Eigen::VectorXd& x, int i) const { return x[iu_ + i] * b_scale_; }
  double tau2_phys(const Eigen::VectorXd& x) const { return x[it_] * t_scale_; }

  // Net sample flow into device i (physical units).
  double net_inflow(const Eigen::VectorXd& x, int i) const {
    if (!share_) return 0.0;
    double net = 0.0;
    for (int q = 0; q < np_; ++q) {
      if (pairs_[q].second == i) net += d_phys(x, q);
      if (pairs_[q].first == i) net -= d_phys(x, q);
    }
    return net;
  }

  // true iff x is strictly inside the barrier domain
  bool in_domain(const Eigen::VectorXd& x) const {
    double dummy = 0.0;
    return evaluate(x, 1.0, dummy, nullptr, nullptr);
  }

  // phi = t*tau2_scaled + barrier. Returns false outside the domain. grad and
  // hess may be null when only the value is needed.
  bool evaluate(const Eigen::VectorXd& x, double t, double& phi, Eigen::VectorXd* grad,
                Eigen::MatrixXd* hess) const {
    const auto& pr = s_.params;
    phi = t * x[it_];
    if (grad) {
      grad->setZero(n_);
      (*grad)[it_] = t;
    }
    if (hess) hess->setZero(n_, n_);

    // sparse constraint accumulator: -log(-g), g < 0
    auto add = [&](double g, const std::vector<std::pair<int, double>>& jac,
                   const std::vector<std::tuple<int, int, double>>& hes) -> bool {
      if (!(g < 0.0) || !std::isfinite(g)) return false;
      phi += -std::log(-g);
      if (grad || hess) {
        const double c1 = 1.0 / (-g);
        const double c2 = c1 * c1;
        if (grad)
          for (const auto& [i, v] : jac) (*grad)[i] += c1 * v;
        if (hess) {
          for (const auto& [i, vi] : jac)
            for (const auto& [j, vj] : jac) (*hess)(i, j) += c2 * vi * vj;
          for (const auto& [i, j, v] : hes) {
            (*hess)(i, j) += c1 * v;
            if (i != j) (*hess)(j, i) += c1 * v;
          }
        }
      }
      return true;
    };
    const std::vector<std::tuple<int, int, double>> no_h;

    // variable floors
    if (share_) {
      for (int q = 0; q < np_; ++q) {
        if (!add(-x[id_ + q], {{id_ + q, -1.0}}, no_h)) return false;
        if (!add(eps_b_ / b_scale_ - x[ib_ + q], {{ib_ + q, -1.0}}, no_h)) return false;
        if (!add(-x[ip_ + q], {{ip_ + q, -1.0}}, no_h)) return false;
      }
    }
    for (int i = 0; i < k_; ++i)
      if (!add(eps_b_ / b_scale_ - x[iu_ + i], {{iu_ + i, -1.0}}, no_h)) return false;
    if (!add(-x[it_], {{it_, -1.0}}, no_h)) return false;

    if (share_) {
      // outgoing-sample budgets: sum_j d_ij <= |D_i|
      for (int i = 0; i < k_; ++i) {
        double g = -static_cast<double>(s_.devices[i].initial_samples) / d_scale_;
        std::vector<std::pair<int, double>> jac;
        for (int q = 0; q < np_; ++q)
          if (pairs_[q].first == i) {
            g += x[id_ + q];
            jac.emplace_back(id_ + q, 1.0);
          }
        if (!add(g, jac, no_h)) return false;
      }
      // D2D bandwidth budget
      {
        double g = -1.0;
        std::vector<std::pair<int, double>> jac;
        for (int q = 0; q < np_; ++q) {
          g += x[ib_ + q];
          jac.emplace_back(ib_ + q, 1.0);
        }
        if (!add(g, jac, no_h)) return false;
      }
      // per-device D2D power budgets
      for (int i = 0; i < k_; ++i) {
        double g = -s_.devices[i].tx_power_P / p_scale_;
        std::vector<std::pair<int, double>> jac;
        for (int q = 0; q < np_; ++q)
          if (pairs_[q].first == i) {
            g += x[ip_ + q];
            jac.emplace_back(ip_ + q, 1.0);
          }
        if (!add(g, jac, no_h)) return false;
      }
    }
    // upload bandwidth budget
    {
      double g = -1.0;
      std::vector<std::pair<int, double>> jac;
      for (int i = 0; i < k_; ++i) {
        g += x[iu_ + i];
        jac.emplace_back(iu_ + i, 1.0);
      }
      if (!add(g, jac, no_h)) return false;
    }

    if (share_) {
      // a*d_ij <= tau1 * r(b_ij, p_ij)
      for (int q = 0; q < np_; ++q) {
        const auto [i, j] = pairs_[q];
        const double b = b_phys(x, q), p = p_phys(x, q);
        const Rate2 r = rate_partials(b, p, s_.d2d.at(i, j), pr.noise_psd_n0);
        // normalize by (a*d_scale) so g stays order-1
        const double norm = pr.sample_bits_a * d_scale_;
        const double g = (pr.sample_bits_a * d_phys(x, q) - tau1_ * r.r) / norm;
        std::vector<std::pair<int, double>> jac = {
            {id_ + q, pr.sample_bits_a * d_scale_ / norm},
            {ib_ + q, -tau1_ * r.rb * b_scale_ / norm},
            {ip_ + q, -tau1_ * r.rp * p_scale_ / norm}};
        std::vector<std::tuple<int, int, double>> hes = {
            {ib_ + q, ib_ + q, -tau1_ * r.rbb * b_scale_ * b_scale_ / norm},
            {ib_ + q, ip_ + q, -tau1_ * r.rbp * b_scale_ * p_scale_ / norm},
            {ip_ + q, ip_ + q, -tau1_ * r.rpp * p_scale_ * p_scale_ / norm}};
        if (!add(g, jac, hes)) return false;
      }
    }

    // compute + upload <= tau2
    for (int i = 0; i < k_; ++i) {
      const double bu = bu_phys(x, i);
      const Rate2 r =
          rate_partials(bu, s_.devices[i].tx_power_P, s_.devices[i].gain_to_server_g,
                        pr.noise_psd_n0);
      const double u = pr.model_bits_Q / r.r;
      const double up = -pr.model_bits_Q * r.rb / (r.r * r.r);
      const double upp =
          pr.model_bits_Q * (2.0 * r.rb * r.rb / (r.r * r.r * r.r) - r.rbb / (r.r * r.r));
      const double samples = static_cast<double>(s_.devices[i].initial_samples) + net_inflow(x, i);
      const double g = (compute_coeff_[i] * samples + u - tau2_phys(x)) / t_scale_;
      std::vector<std::pair<int, double>> jac;
      if (share_) {
        for (int q = 0; q < np_; ++q) {
          if (pairs_[q].second == i)
            jac.emplace_back(id_ + q, compute_coeff_[i] * d_scale_ / t_scale_);
          else if (pairs_[q].first == i)
            jac.emplace_back(id_ + q, -compute_coeff_[i] * d_scale_ / t_scale_);
        }
      }
      jac.emplace_back(iu_ + i, up * b_scale_ / t_scale_);
      jac.emplace_back(it_, -1.0);
      const std::vector<std::tuple<int, int, double>> hes = {
          {iu_ + i, iu_ + i, upp * b_scale_ * b_scale_ / t_scale_}};
      if (!add(g, jac, hes)) return false;
    }
    return true;
  }

  SharingPlan extract_plan(const Eigen::VectorXd& x) const {
    SharingPlan plan = SharingPlan::zero(k_);
    plan.tau1 = tau1_;
    if (share_) {
      for (int q = 0; q < np_; ++q) {
        const auto [i, j] = pairs_[q];
        plan.at(plan.d, i, j) = d_phys(x, q);
        plan.at(plan.b_d2d, i, j) = b_phys(x, q);
        plan.at(plan.p_d2d, i, j) = p_phys(x, q);
      }
    }
    for (int i = 0; i < k_; ++i) plan.b_upload[i] = bu_phys(x, i);
    plan.tau2 = tau2_phys(x);
    return plan;
  }

private:
  double tau1_;
  const Scenario& s_;
  int k_, np_, n_, m_;
  int id_, ib_, ip_, iu_, it_;
  bool share_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<double> compute_coeff_;
  double d_scale_, b_scale_, p_scale_, t_scale_, eps_b_;
};

}  // namespace detail

// Threshold below which an optimized d_ij counts as zero.
inline double sharing_epsilon(const Scenario& s) {
  double dmax = 0.0;
  for (const auto& dev : s.devices)
    dmax = std::max(dmax, static_cast<double>(dev.initial_samples));
  return 1e-6 * dmax;
}

// Strictly interior starting plan for the barrier method.
inline SharingPlan strictly_feasible_start(double tau1, const Scenario& s) {
  detail::InnerBarrier prob(tau1, s);
  return prob.extract_plan(prob.strictly_feasible_start());
}

namespace detail {

// Snap near-zero sharing to exactly zero, then spend every remaining budget:
// upload bandwidths scale up to sum B; active D2D rows get the full power and
// bandwidth freed by pruned pairs.
inline void polish_plan(SharingPlan& plan, const Scenario& s) {
  const int k = plan.k;
  const double eps_d = sharing_epsilon(s);
  // Opposing flows d_ij / d_ji cancel without changing any post-share count
  // (the objective is flat along that direction, so the barrier centers there).
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double c = std::min(plan.at(plan.d, i, j), plan.at(plan.d, j, i));
      if (c > 0.0) {
        plan.at(plan.d, i, j) -= c;
        plan.at(plan.d, j, i) -= c;
      }
    }
  bool any_share = false;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      if (plan.at(plan.d, i, j) <= eps_d) {
        plan.at(plan.d, i, j) = 0.0;
        plan.at(plan.b_d2d, i, j) = 0.0;
        plan.at(plan.p_d2d, i, j) = 0.0;
      } else {
        any_share = true;
      }
    }
  double sum_bu = 0.0;
  for (double b : plan.b_upload) sum_bu += b;
  if (sum_bu > 0.0) {
    const double f = s.params.bandwidth_B / sum_bu;
    if (f > 1.0)
      for (auto& b : plan.b_upload) b *= f;
  }
  if (any_share) {
    double sum_bd = 0.0;
    for (double b : plan.b_d2d) sum_bd += b;
    if (sum_bd > 0.0) {
      const double f = s.params.bandwidth_B / sum_bd;
      if (f > 1.0)
        for (auto& b : plan.b_d2d) b *= f;
    }
    for (int i = 0; i < k; ++i) {
      double row_p = 0.0;
      for (int j = 0; j < k; ++j)
        if (j != i) row_p += plan.at(plan.p_d2d, i, j);
      if (row_p > 0.0) {
        const double f = s.devices[i].tx_power_P / row_p;
        if (f > 1.0)
          for (int j = 0; j < k; ++j)
            if (j != i) plan.at(plan.p_d2d, i, j) *= f;
      }
    }
  }
  // recompute achieved phase times from the cleaned plan
  const auto counts = post_share_counts(plan.d, initial_counts(s));
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto& dev = s.devices[i];
    worst = std::max(worst, local_update_delay(counts[i], s.params.local_iters_N,
                                               s.params.flops_per_sample_L, dev.flops_per_cycle_C,
                                               dev.cpu_freq_f) +
                                upload_delay(plan.b_upload[i], dev, s.params));
  }
  plan.tau2 = worst;
}

}  // namespace detail

// Minimize tau2 over the inner convex program at fixed tau1 with a log-barrier
// interior-point method (damped Newton, backtracking line search).
inline InnerSolution solve_inner(double tau1, const Scenario& s,
                                 const SolverOptions& opt = SolverOptions{}) {
  InnerSolution out;
  detail::InnerBarrier prob(tau1, s);
  const int n = prob.num_vars();
  const int m = prob.num_constraints();

  Eigen::VectorXd x = prob.strictly_feasible_start();
  if (!prob.in_domain(x)) {
    out.report.message = "no strictly feasible start";
    return out;
  }

  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hess(n, n);
  double t = opt.t0;
  int total_iters = 0;
  bool failed = false;

  while (static_cast<double>(m) / t > opt.duality_tol && !failed) {
    for (int it = 0; it < opt.max_newton; ++it) {
      double phi;
      if (!prob.evaluate(x, t, phi, &grad, &hess)) {
        out.report.message = "iterate left barrier domain";
        failed = true;
        break;
      }
      // Newton step with escalating Tikhonov fallback
      Eigen::VectorXd step;
      double reg = 0.0;
      for (;;) {
        Eigen::MatrixXd h = hess;
        if (reg > 0.0) h.diagonal().array() += reg;
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() == Eigen::Success) {
          step = llt.solve(-grad);
          if (step.allFinite() && grad.dot(step) < 0.0) break;
        }
        reg = (reg == 0.0) ? 1e-10 * (1.0 + hess.diagonal().maxCoeff()) : reg * 100.0;
        if (!std::isfinite(reg) || reg > 1e20 * (1.0 + hess.diagonal().maxCoeff())) {
          out.report.message = "Newton system not solvable";
          failed = true;
          break;
        }
      }
      if (failed) break;

      const double slope = grad.dot(step);
      const double decrement = -slope;  // lambda^2
      ++total_iters;
      // phi scales with t, so the stage tolerance must as well; the induced
      // tau2 error is ~ (lambda^2 / t) * t_scale.
      if (decrement * 0.5 <= 1e-10 * std::max(1.0, t)) break;  // stage converged

      double ss = 1.0;
      double phi_new;
      bool ok = false;
      while (ss > 1e-16) {
        Eigen::VectorXd xn = x + ss * step;
        if (prob.evaluate(xn, t, phi_new, nullptr, nullptr) &&
            phi_new <= phi + opt.alpha * ss * slope) {
          x = std::move(xn);
          ok = true;
          break;
        }
        ss *= opt.beta;
      }
      if (!ok) break;  // stalled at numerical precision; move to next stage
      if (it + 1 >= opt.max_newton) break;  // per-stage cap; not fatal
    }
    t *= opt.mu;
  }

  out.report.iterations = total_iters;
  out.report.final_duality_measure = static_cast<double>(m) / (t / opt.mu);
  if (failed && !prob.in_domain(x)) {
    out.report.converged = false;
    return out;
  }

  out.plan = prob.extract_plan(x);
  detail::polish_plan(out.plan, s);
  out.tau2 = out.plan.tau2;

  // residual audit on the polished plan
  double viol = 0.0;
  {
    const auto& pr = s.params;
    const int k = s.K();
    double sum_bd = 0.0, sum_bu = 0.0;
    for (int i = 0; i < k; ++i) {
      double row_d = 0.0, row_p = 0.0;
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        row_d += out.plan.at(out.plan.d, i, j);
        row_p += out.plan.at(out.plan.p_d2d, i, j);
        sum_bd += out.plan.at(out.plan.b_d2d, i, j);
        const double dij = out.plan.at(out.plan.d, i, j);
        if (dij > 0.0) {
          const double r = shannon_rate(out.plan.at(out.plan.b_d2d, i, j),
                                        out.plan.at(out.plan.p_d2d, i, j), s.d2d.at(i, j),
                                        pr.noise_psd_n0);
          viol = std::max(viol, (pr.sample_bits_a * dij - tau1 * r) /
                                    (pr.sample_bits_a * std::max(1.0, dij)));
        }
      }
      viol = std::max(viol, (row_d - s.devices[i].initial_samples) /
                                std::max(1.0, static_cast<double>(s.devices[i].initial_samples)));
      viol = std::max(viol, (row_p - s.devices[i].tx_power_P) / s.devices[i].tx_power_P);
      sum_bu += out.plan.b_upload[i];
    }
    viol = std::max(viol, (sum_bd - pr.bandwidth_B) / pr.bandwidth_B);
    viol = std::max(viol, (sum_bu - pr.bandwidth_B) / pr.bandwidth_B);
    viol = std::max(viol, 0.0);
  }
  out.report.max_constraint_violation = viol;
  out.report.converged = !failed && viol <= opt.feas_tol;
  if (out.report.converged && out.report.message.empty()) out.report.message = "ok";
  return out;
}

}  // namespace edgeshare
