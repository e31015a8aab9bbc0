#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adamcert/errors.hpp"
#include "adamcert/schedule.hpp"

namespace adamcert {

/// Inputs of the a priori bound ladder. alpha/beta are the first/second
/// moment decay rates; m_init_bound dominates |m_{0,i}| and v_init_bound^2
/// dominates v_{0,i}; theta0_dist is the distance of the initial iterate from
/// the reference minimizer and theta_star_norm the minimizer's norm.
struct bound_inputs {
  double alpha = 0.9;
  double beta = 0.999;
  double eps = 1e-8;
  int d = 1;
  double tau1 = 0.0;
  double tau2 = 0.25;
  double kappa = 1.0;
  double big_k = 1.0;
  double c_data = 1.0;
  double rho = 1.0;
  double m_init_bound = 0.0;
  double v_init_bound = 0.0;
  double gamma1 = 0.1;
  polynomial_schedule schedule;
  double theta0_dist = 0.0;
  double theta_star_norm = 0.0;
};

inline void validate(const bound_inputs& in) {
  if (!(in.alpha >= 0.0 && in.alpha < 1.0))
    throw input_error("bounds.alpha must lie in [0, 1)");
  if (!(in.beta > 0.0 && in.beta < 1.0))
    throw input_error("bounds.beta must lie in (0, 1)");
  if (in.beta <= in.alpha * in.alpha)
    throw domain_error("bounds: beta must exceed alpha^2");
  if (!(in.eps > 0.0)) throw input_error("bounds.eps must be > 0");
  if (in.d < 1) throw input_error("bounds.d must be >= 1");
  if (!(in.tau1 >= 0.0 && in.tau2 >= 0.0))
    throw input_error("bounds.tau1 and tau2 must be >= 0");
  const double t1 = in.tau1, t2 = in.tau2;
  if (!(3.0 * t1 + 2.0 * t2 + t1 * t1 + 2.0 * t1 * t2 < 2.0))
    throw input_error("bounds: 3 tau1 + 2 tau2 + tau1^2 + 2 tau1 tau2 must be < 2");
  if (!(t1 + 2.0 * t2 < 1.0))
    throw input_error("bounds: tau1 + 2 tau2 must be < 1");
  if (!(in.kappa > 0.0)) throw input_error("bounds.kappa must be > 0");
  if (!(in.big_k > 0.0)) throw input_error("bounds.big_k must be > 0");
  if (!(in.c_data >= 1.0)) throw input_error("bounds.c_data must be >= 1");
  if (!(in.rho > 0.0)) throw input_error("bounds.rho must be > 0");
  if (!(in.m_init_bound >= 0.0 && in.v_init_bound >= 0.0))
    throw input_error("bounds.m_init_bound and v_init_bound must be >= 0");
  if (!(in.gamma1 > 0.0)) throw input_error("bounds.gamma1 must be > 0");
  if (!(in.theta0_dist >= 0.0)) throw input_error("bounds.theta0_dist must be >= 0");
  if (!(in.theta_star_norm >= 0.0))
    throw input_error("bounds.theta_star_norm must be >= 0");
}

struct bound_constants {
  double eta = 0.0;
  double big_gamma = 0.0;
  long n_threshold = 1;  // N
  long n_frak = 1;       // ceil of the max of the three thresholds
  double delta = 0.0;
  double chi = 4.0;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0, a5 = 0.0, a6 = 0.0;
  double big_a = 1.0;
  double bound_b = 0.0;
  double a5_exponent = 2.0;  // 4 / (2 - 3 tau1 - 2 tau2 - tau1^2 - 2 tau1 tau2)
};

/// B = ||theta*|| + sqrt(2 A (1 + Gamma) / kappa).
inline double bound_from_parts(double kappa, double big_a, double big_gamma,
                               double theta_star_norm) {
  if (!(kappa > 0.0)) throw input_error("bound_from_parts: kappa must be > 0");
  if (!(big_a >= 0.0 && big_gamma >= 0.0 && theta_star_norm >= 0.0))
    throw input_error("bound_from_parts: parts must be >= 0");
  return theta_star_norm + std::sqrt(2.0 * big_a * (1.0 + big_gamma) / kappa);
}

namespace detail {

/// sum_{n>=1} n^{-p} for p > 1: partial sum to 10^6 plus the integral tail
/// bound (an upper bound; overshoot only loosens the final constant).
inline double zeta_upper(double p) {
  if (!(p > 1.0))
    throw numerical_error("bounds: Gamma series diverges (schedule exponent too small)");
  const long cut = 1000000;
  double s = 0.0;
  for (long n = cut; n >= 1; --n) s += std::pow(static_cast<double>(n), -p);
  return s + std::pow(static_cast<double>(cut), 1.0 - p) / (p - 1.0);
}

}  // namespace detail

/// The full constant ladder. Evaluates, in order: eta, Gamma, the threshold
/// N, the burn-in index, delta, chi, the six intermediate constants, their
/// max, and the final bound B.
inline bound_constants compute_constants(const bound_inputs& in) {
  validate(in);
  const double alpha = in.alpha, beta = in.beta, eps = in.eps;
  const double d = static_cast<double>(in.d);
  const double t1 = in.tau1, t2 = in.tau2;
  const double kappa = in.kappa, K = in.big_k, c = in.c_data, rho = in.rho;
  const double M0 = in.m_init_bound, V0 = in.v_init_bound;
  const double g1 = in.gamma1;
  const double vt = in.theta_star_norm;  // ||theta*||
  const double D0 = in.theta0_dist;      // ||Theta_0 - theta*||

  bound_constants out;
  out.eta = d / std::sqrt((beta - alpha * alpha) * (1.0 / beta - 1.0)) +
            M0 * d / (eps * (1.0 - alpha));

  // Gamma = tau1 * eta^2 * sum_n gamma_n^2; exactly zero when tau1 = 0.
  if (t1 == 0.0) {
    out.big_gamma = 0.0;
  } else {
    const double p = 2.0 * in.schedule.exponent;
    out.big_gamma =
        t1 * out.eta * out.eta * g1 * g1 * detail::zeta_upper(p);
  }
  const double Gp1 = 1.0 + out.big_gamma;

  // N: smallest n at which both step-size expressions drop to 1/8. Both are
  // non-increasing in n, so gallop then bisect; the cap can only be hit for
  // schedules that do not decay.
  const auto crit = [&](long n) {
    const double gn = gamma(in.schedule, n);
    const double lhs1 =
        K / eps * gn * (3.0 + std::pow(g1 * out.eta / d, t1));
    const double lhs2 = 2.0 * K * c * std::sqrt(d) * (1.0 + t2) *
                        std::pow(2.0 * gn / eps, 1.0 + t2);
    return std::max(lhs1, lhs2) <= 0.125;
  };
  const long cap = 1000000000L;
  long n_thr;
  if (crit(1)) {
    n_thr = 1;
  } else {
    long lo = 1, hi = 2;
    while (!crit(hi)) {
      if (hi >= cap)
        throw numerical_error("bounds: threshold N not found below the 1e9 cap");
      lo = hi;
      hi = std::min(cap, hi * 2);
    }
    while (hi - lo > 1) {
      const long mid = lo + (hi - lo) / 2;
      (crit(mid) ? hi : lo) = mid;
    }
    n_thr = hi;
  }
  out.n_threshold = n_thr;

  const double log2_term =
      alpha == 0.0 ? 0.0 : -std::log2(alpha);
  const double logb_term = std::log((beta - alpha * alpha) / (1.0 - alpha * alpha)) /
                           std::log(beta);
  out.n_frak = static_cast<long>(std::ceil(
      std::max({static_cast<double>(n_thr), log2_term, logb_term})));
  if (out.n_frak < n_thr) out.n_frak = n_thr;
  const double nf = static_cast<double>(out.n_frak);

  out.delta = std::sqrt(nf) * d / std::sqrt(1.0 - alpha * alpha / beta) +
              M0 * d / (eps * (1.0 - alpha));
  out.chi = std::max(alpha / (1.0 - alpha), 4.0);

  const double reach = nf * g1 * out.delta + D0;
  const double growth = 1.0 + std::pow(reach, t1) + 2.0 * std::pow(vt, t1);
  out.a1 = 0.5 * K * reach * reach * growth +
           d / (2.0 * (1.0 - alpha)) *
               (K * reach * growth + rho + M0) * g1 * out.delta;

  if (t2 == 0.0)
    throw numerical_error(
        "bounds: exponent 1/tau2 is undefined at tau2 = 0");
  out.a2 = std::max({8.0 * Gp1 * K * K / (kappa * d * d), kappa / 2.0,
                     kappa * vt * vt / 2.0, rho * rho * kappa / (2.0 * K * K),
                     kappa * std::pow(V0 * V0 / (K * K * (1.0 - beta)),
                                      1.0 / (1.0 + t1)),
                     kappa * std::pow(eps / K, 2.0 / (1.0 + t1)),
                     std::pow((1.0 + 32.0 * K * K * c * c) / (K * K * c * c),
                              1.0 / t2) *
                         kappa});

  const double s = 1.0 + t1 + 2.0 * t2;
  out.a3 = std::pow(rho, 4.0 / s) * kappa /
           std::pow(out.chi * d / eps * c * c, 2.0 / s);

  out.a4 = std::max(
      1610.0 * (1.0 + g1) * std::pow(K, 1.5) * std::pow(kappa, -(5.0 + t1 + 2.0 * t2) / 4.0) *
          (1.0 + kappa) * c * std::pow(eps, -1.5) * (1.0 + eps) *
          (1.0 + std::sqrt(out.chi)) * d * std::pow(Gp1, s / 4.0),
      1.0);

  const double a5_den = 2.0 - 3.0 * t1 - 2.0 * t2 - t1 * t1 - 2.0 * t1 * t2;
  out.a5_exponent = 4.0 / a5_den;
  out.a5 = std::pow(K * (1.0 + std::pow(vt, t1)) * std::pow(out.a4, 2.0 + t1),
                    out.a5_exponent);
  if (!std::isfinite(out.a5))
    throw numerical_error(
        "bounds: a5 overflowed at exponent 4/(2 - 3 tau1 - 2 tau2 - tau1^2 - "
        "2 tau1 tau2) = " + std::to_string(out.a5_exponent));

  const double a6_exp = 2.0 / (1.0 - t1 - 2.0 * t2);
  out.a6 = std::pow(328000.0 / (1.0 - alpha) * g1 * K * K * K *
                        std::pow(kappa, -s / 2.0) * c * c * d / (eps * eps) *
                        std::pow(Gp1, s / 2.0),
                    a6_exp);
  if (!std::isfinite(out.a6))
    throw numerical_error(
        "bounds: a6 overflowed at exponent 2/(1 - tau1 - 2 tau2) = " +
        std::to_string(a6_exp));

  out.big_a = std::max({1.0, out.a1, out.a2, out.a3, out.a5, out.a6});
  out.bound_b = bound_from_parts(kappa, out.big_a, out.big_gamma, vt);
  if (!std::isfinite(out.bound_b))
    throw numerical_error("bounds: final bound overflowed");
  return out;
}

/// The pathwise bound B alone.
inline double apriori_bound(const bound_inputs& in) {
  return compute_constants(in).bound_b;
}

/// Envelope shape of the uniform-in-beta bound:
///   c (1-alpha)^{-1/2} ||Theta_0|| + c |ln(alpha + 1_{0}(alpha))|^2
///   + c (beta - alpha^2)^{-2} + c (1 - alpha)^{-2}.
inline double uniform_bound_rhs(double alpha, double beta, double eps,
                                double theta0_norm, double c) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw input_error("uniform_bound_rhs: alpha must lie in [0, 1)");
  if (!(beta > alpha * alpha && beta < 1.0))
    throw input_error("uniform_bound_rhs: beta must lie in (alpha^2, 1)");
  if (!(eps > 0.0 && eps < 1.0))
    throw input_error("uniform_bound_rhs: eps must lie in (0, 1)");
  if (!(c > 0.0)) throw input_error("uniform_bound_rhs: c must be > 0");
  if (!(theta0_norm >= 0.0))
    throw input_error("uniform_bound_rhs: theta0_norm must be >= 0");
  const double lnterm = std::log(alpha + (alpha == 0.0 ? 1.0 : 0.0));
  const double da = beta - alpha * alpha;
  return c * theta0_norm / std::sqrt(1.0 - alpha) + c * lnterm * lnterm +
         c / (da * da) + c / ((1.0 - alpha) * (1.0 - alpha));
}

/// Closed-form upper bound for the burn-in threshold
/// log_beta((beta - alpha^2)/(1 - alpha^2)); also checks it dominates the
/// exact value.
inline double log_beta_upper(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw input_error("log_beta_upper: alpha must lie in [0, 1)");
  if (!(beta > alpha * alpha && beta < 1.0))
    throw input_error("log_beta_upper: beta must lie in (alpha^2, 1)");
  const double bound =
      std::max(4.0 / (1.0 - alpha), 2.0 / (beta - alpha * alpha));
  const double exact =
      std::log((beta - alpha * alpha) / (1.0 - alpha * alpha)) / std::log(beta);
  if (exact > bound)
    throw numerical_error("log_beta_upper: closed-form bound violated");
  return bound;
}

/// Single-step second-moment ratio inequality: for n past the burn-in
/// threshold,
///   alpha (eps + sqrt(beta v / (1-beta^n)))^{-1} (1-alpha^n)^{-1}
///     <= (eps + sqrt(v / (1-beta^{n-1})))^{-1} (1-alpha^{n-1})^{-1}.
inline bool v_ratio_holds(double alpha, double beta, double eps, long n,
                          double v) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw input_error("v_ratio_holds: alpha must lie in [0, 1)");
  if (!(beta > alpha * alpha && beta < 1.0))
    throw input_error("v_ratio_holds: beta must lie in (alpha^2, 1)");
  if (!(eps > 0.0)) throw input_error("v_ratio_holds: eps must be > 0");
  if (!(v >= 0.0)) throw input_error("v_ratio_holds: v must be >= 0");
  if (alpha == 0.0) return true;
  if (n < 2)
    throw input_error("v_ratio_holds: n must be >= 2 when alpha > 0");
  const double nn = static_cast<double>(n);
  const double lhs = alpha /
                     ((eps + std::sqrt(beta * v / (1.0 - std::pow(beta, nn)))) *
                      (1.0 - std::pow(alpha, nn)));
  const double rhs =
      1.0 / ((eps + std::sqrt(v / (1.0 - std::pow(beta, nn - 1.0)))) *
             (1.0 - std::pow(alpha, nn - 1.0)));
  return lhs <= rhs;
}

/// Exact burn-in threshold for v_ratio_holds.
inline double v_ratio_threshold(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw input_error("v_ratio_threshold: alpha must lie in [0, 1)");
  if (!(beta > alpha * alpha && beta < 1.0))
    throw input_error("v_ratio_threshold: beta must lie in (alpha^2, 1)");
  return std::log((beta - alpha * alpha) / (1.0 - alpha * alpha)) /
         std::log(beta);
}

struct increment_audit {
  double max_lhs = 0.0;
  std::vector<double> rhs;  // per-step bound values
  bool verdict = true;
};

/// Scalar moment-ratio audit: runs m_n = alpha m_{n-1} + (1-alpha) x_n and
/// V_n = beta V_{n-1} + (1-beta) x_n^2, then checks every step against
///   sqrt(sum_{k<n} beta^k) / sqrt(1 - alpha^2/beta) + |m_0| / (eps (1-alpha)).
inline increment_audit increment_bound_check(double alpha, double beta,
                                             double eps, double m0, double v0,
                                             const std::vector<double>& xs) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw input_error("increment_bound_check: alpha must lie in [0, 1)");
  if (!(beta > alpha * alpha && beta < 1.0))
    throw input_error("increment_bound_check: beta must lie in (alpha^2, 1)");
  if (!(eps > 0.0)) throw input_error("increment_bound_check: eps must be > 0");
  if (!(v0 >= 0.0)) throw input_error("increment_bound_check: v0 must be >= 0");

  increment_audit out;
  out.rhs.reserve(xs.size());
  const double tail = std::abs(m0) / (eps * (1.0 - alpha));
  const double root = std::sqrt(1.0 - alpha * alpha / beta);
  double m = m0, V = v0;
  double geo = 0.0;  // sum_{k=0}^{n-1} beta^k
  double bpow = 1.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double n = static_cast<double>(j + 1);
    m = alpha * m + (1.0 - alpha) * xs[j];
    V = beta * V + (1.0 - beta) * xs[j] * xs[j];
    geo += bpow;
    bpow *= beta;
    const double lhs = std::abs(m) / (1.0 - std::pow(alpha, n)) /
                       (eps + std::sqrt(V / (1.0 - std::pow(beta, n))));
    const double rhs = std::sqrt(geo) / root + tail;
    out.max_lhs = std::max(out.max_lhs, lhs);
    out.rhs.push_back(rhs);
    if (lhs > rhs) out.verdict = false;
  }
  return out;
}

}  // namespace adamcert
