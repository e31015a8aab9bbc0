#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adamcert/data.hpp"
#include "adamcert/errors.hpp"
#include "adamcert/schedule.hpp"
#include "adamcert/sop.hpp"

namespace adamcert {

struct adam_config {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 1;

  /// beta2 > beta1^2, required by the moment-ratio analysis.
  bool beta2_gt_beta1sq() const { return beta2 > beta1 * beta1; }
};

inline void validate(const adam_config& c) {
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0))
    throw input_error("adam.beta1 must lie in [0, 1)");
  if (!(c.beta2 > 0.0 && c.beta2 < 1.0))
    throw input_error("adam.beta2 must lie in (0, 1)");
  if (!(c.eps > 0.0)) throw input_error("adam.eps must be > 0");
  if (c.batch_size < 1) throw input_error("adam.batch_size must be >= 1");
}

struct adam_state {
  long step = 0;  // number of completed updates
  Eigen::VectorXd theta;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

inline adam_state make_state(const Eigen::VectorXd& theta0) {
  adam_state s;
  s.step = 0;
  s.theta = theta0;
  s.m = Eigen::VectorXd::Zero(theta0.size());
  s.v = Eigen::VectorXd::Zero(theta0.size());
  return s;
}

/// Per-step diagnostic factors: bias corrections and the effective
/// per-coordinate step multipliers
///   eff_i = gamma_n / ((1 - beta1^n) (eps + sqrt(v_i / (1 - beta2^n)))).
struct step_factors {
  double bias1 = 0.0;  // 1 - beta1^n
  double bias2 = 0.0;  // 1 - beta2^n
  Eigen::VectorXd eff;
};

/// One update with a precomputed batch gradient:
///   m <- beta1 m + (1 - beta1) g
///   v <- beta2 v + (1 - beta2) g.^2
///   theta_i <- theta_i - gamma_n m_i / ((1-beta1^n)(eps + sqrt(v_i/(1-beta2^n))))
/// where n is the step index after the update. Bias corrections use the raw
/// statistics at n = 1 (both reduce to g and g.^2 exactly).
inline void adam_step(adam_state& s, const adam_config& c, double gamma_n,
                      const Eigen::VectorXd& grad, step_factors* factors = nullptr) {
  if (!grad.allFinite())
    throw numerical_error("adam_step: non-finite gradient at step " +
                          std::to_string(s.step + 1));
  const long n = s.step + 1;
  s.m *= c.beta1;
  s.m.noalias() += (1.0 - c.beta1) * grad;
  s.v *= c.beta2;
  s.v.array() += (1.0 - c.beta2) * grad.array().square();
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(n));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(n));
  if (factors) {
    factors->bias1 = bias1;
    factors->bias2 = bias2;
    factors->eff.resize(s.theta.size());
  }
  for (Eigen::Index i = 0; i < s.theta.size(); ++i) {
    const double denom = bias1 * (c.eps + std::sqrt(s.v[i] / bias2));
    const double eff = gamma_n / denom;
    s.theta[i] -= eff * s.m[i];
    if (factors) factors->eff[i] = eff;
  }
  s.step = n;
}

/// Observer invoked after every update; theta_prev is the iterate before the
/// update. Used by invariant tests and the running-sup audits.
using step_observer = std::function<void(long n, const adam_state& s,
                                         const step_factors& f,
                                         const Eigen::VectorXd& theta_prev)>;

struct trajectory_result {
  std::vector<long> checkpoints;
  std::vector<Eigen::VectorXd> theta_at;   // iterate at each checkpoint
  std::vector<double> running_sup;         // max_{0<=k<=n} ||theta_k||
  double sup_norm_max = 0.0;               // over the whole trajectory
  adam_state final_state;
};

/// Runs the mini-batch recursion for n_steps updates. The batch gradient is
/// (1/M) sum_m grad_theta(theta_{n-1}, X_{n,m}) with X_{n,m} drawn from the
/// stream at (trajectory_id, n, m). Checkpoints may include 0 (the initial
/// iterate). The hot loop reuses preallocated buffers throughout.
inline trajectory_result run_trajectory(
    const problem& prob, const adam_config& cfg, const polynomial_schedule& sched,
    const sample_stream& stream, std::uint32_t trajectory_id,
    const Eigen::VectorXd& theta0, long n_steps,
    const std::vector<long>& checkpoints, const step_observer& observer = {}) {
  validate(cfg);
  validate(sched);
  if (theta0.size() != prob.dim_theta)
    throw input_error("run_trajectory: theta0 has wrong dimension");
  if (n_steps < 0) throw input_error("run_trajectory: n_steps must be >= 0");
  for (long cp : checkpoints)
    if (cp < 0 || cp > n_steps)
      throw input_error("run_trajectory: checkpoint outside [0, n_steps]");

  trajectory_result res;
  res.checkpoints = checkpoints;
  res.theta_at.resize(checkpoints.size());
  res.running_sup.resize(checkpoints.size());

  adam_state s = make_state(theta0);
  double sup = theta0.norm();
  auto record = [&](long n) {
    for (std::size_t k = 0; k < checkpoints.size(); ++k)
      if (checkpoints[k] == n) {
        res.theta_at[k] = s.theta;
        res.running_sup[k] = sup;
      }
  };
  record(0);

  grad_workspace ws;
  Eigen::VectorXd grad(prob.dim_theta);
  Eigen::VectorXd raw(prob.dim_data);
  Eigen::VectorXd lifted;
  Eigen::VectorXd theta_prev;
  step_factors factors;
  const bool observing = static_cast<bool>(observer);

  for (long n = 1; n <= n_steps; ++n) {
    grad.setZero();
    for (int m = 0; m < cfg.batch_size; ++m) {
      sample_into(stream, trajectory_id, static_cast<std::uint32_t>(n),
                  static_cast<std::uint32_t>(m), raw);
      lift_into(prob, stream.spec.p_box, raw, lifted);
      grad_theta_accumulate(prob, s.theta, lifted, ws, grad);
    }
    grad /= static_cast<double>(cfg.batch_size);
    if (observing) theta_prev = s.theta;
    adam_step(s, cfg, gamma(sched, n), grad, observing ? &factors : nullptr);
    sup = std::max(sup, s.theta.norm());
    if (observing) observer(n, s, factors, theta_prev);
    record(n);
  }
  res.sup_norm_max = sup;
  res.final_state = std::move(s);
  return res;
}

}  // namespace adamcert
