#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "adamcert/errors.hpp"

namespace adamcert {

/// gamma_n = gamma1 * n^(-exponent), non-increasing for exponent in (0, 1).
struct polynomial_schedule {
  double gamma1 = 0.1;
  double exponent = 2.0 / 3.0;
};

inline void validate(const polynomial_schedule& s) {
  if (!(s.gamma1 > 0.0)) throw input_error("schedule.gamma1 must be > 0");
  if (!(s.exponent > 0.0 && s.exponent < 1.0))
    throw input_error("schedule.exponent must lie in (0, 1)");
}

inline double gamma(const polynomial_schedule& s, long n) {
  if (n < 1) throw input_error("gamma: step index must be >= 1");
  return s.gamma1 * std::pow(static_cast<double>(n), -s.exponent);
}

/// Admissibility of a step-size schedule: the step-ratio condition
/// (gamma_n)^-2 (gamma_n - gamma_{n+1}) -> 0 and, for the moment exponent p,
/// a summable tail sum_{m>=n} gamma_m^p. For the polynomial family both are
/// decidable analytically: the first holds iff exponent < 1 (the family
/// already enforces that), the second iff exponent * p > 1.
struct schedule_verdict {
  bool accept = false;
  bool step_ratio_ok = false;
  bool tail_ok = false;
  // Finite-n proxies at n = 1e2, 1e4, 1e6: the step-ratio value and an upper
  // bound for the tail sum (infinity when divergent).
  std::vector<long> probe_n;
  std::vector<double> step_ratio_proxy;
  std::vector<double> tail_proxy;
};

inline double step_ratio_proxy_at(const polynomial_schedule& s, long n) {
  const double gn = gamma(s, n);
  const double gn1 = gamma(s, n + 1);
  return (gn - gn1) / (gn * gn);
}

/// Upper bound for sum_{m>=n} gamma_m^p (first term + integral tail);
/// +infinity when exponent * p <= 1.
inline double tail_sum_upper(const polynomial_schedule& s, double p, long n) {
  const double a = s.exponent * p;
  if (a <= 1.0) return std::numeric_limits<double>::infinity();
  const double gp = std::pow(s.gamma1, p);
  const double nd = static_cast<double>(n);
  return gp * (std::pow(nd, -a) + std::pow(nd, 1.0 - a) / (a - 1.0));
}

inline schedule_verdict validate_schedule(const polynomial_schedule& s,
                                          double p_moment) {
  if (!(p_moment > 0.0)) throw input_error("p_moment must be > 0");
  if (!(s.gamma1 > 0.0)) throw input_error("schedule.gamma1 must be > 0");
  if (!(s.exponent > 0.0)) throw input_error("schedule.exponent must be > 0");
  schedule_verdict v;
  v.step_ratio_ok = s.exponent < 1.0;
  v.tail_ok = s.exponent * p_moment > 1.0;
  v.accept = v.step_ratio_ok && v.tail_ok;
  v.probe_n = {100, 10000, 1000000};
  for (long n : v.probe_n) {
    v.step_ratio_proxy.push_back(step_ratio_proxy_at(s, n));
    v.tail_proxy.push_back(tail_sum_upper(s, p_moment, n));
  }
  return v;
}

/// Numeric-proxy check for a user-supplied tabulated schedule. The
/// admissibility conditions are asymptotic, so finitely many values can
/// refute but never certify them: the verdict is "reject" only on a concrete
/// violation
/// (increasing step or a large finite-n step-ratio proxy), else
/// "inconclusive".
enum class tabulated_verdict { reject, inconclusive };

struct tabulated_check_result {
  tabulated_verdict verdict = tabulated_verdict::inconclusive;
  std::string reason;
  double last_step_ratio_proxy = 0.0;
  double partial_tail_sum = 0.0;
};

inline tabulated_check_result check_tabulated(const std::vector<double>& g,
                                              double p_moment) {
  if (g.size() < 2) throw input_error("tabulated schedule needs >= 2 values");
  if (!(p_moment > 0.0)) throw input_error("p_moment must be > 0");
  tabulated_check_result r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0)) {
      r.verdict = tabulated_verdict::reject;
      r.reason = "gamma_" + std::to_string(i + 1) + " is not positive";
      return r;
    }
    if (i + 1 < g.size() && g[i + 1] > g[i]) {
      r.verdict = tabulated_verdict::reject;
      r.reason = "schedule increases at n = " + std::to_string(i + 1);
      return r;
    }
    r.partial_tail_sum += std::pow(g[i], p_moment);
  }
  const std::size_t last = g.size() - 2;
  r.last_step_ratio_proxy = (g[last] - g[last + 1]) / (g[last] * g[last]);
  if (r.last_step_ratio_proxy > 0.5) {
    r.verdict = tabulated_verdict::reject;
    r.reason = "step-ratio proxy still large at the end of the table";
    return r;
  }
  r.reason = "finite data cannot certify the asymptotic conditions";
  return r;
}

}  // namespace adamcert
