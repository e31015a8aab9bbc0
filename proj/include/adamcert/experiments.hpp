#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "adamcert/adam.hpp"
#include "adamcert/bounds.hpp"
#include "adamcert/data.hpp"
#include "adamcert/errors.hpp"
#include "adamcert/philox.hpp"
#include "adamcert/schedule.hpp"
#include "adamcert/sop.hpp"

namespace adamcert {

struct beta_pair {
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool out_of_region = false;  // exploratory pair, excluded from audits
};

/// (beta1, beta2) in [q, 1)^2 with beta1^2 + q <= beta2.
inline bool in_admissible_region(double beta1, double beta2, double q) {
  if (!(q > 0.0 && q < 0.5)) throw input_error("q_floor must lie in (0, 1/2)");
  return beta1 >= q && beta2 >= q && beta1 < 1.0 && beta2 < 1.0 &&
         beta1 * beta1 + q <= beta2;
}

struct experiment_plan {
  std::string experiment_id = "experiment";
  std::uint64_t seed = 1;
  problem prob;
  data_spec data;
  polynomial_schedule schedule;
  double eps = 1e-8;
  Eigen::VectorXd theta0;
  std::vector<int> batch_sizes{1};
  std::vector<beta_pair> beta_grid{{}};
  double q_floor = 0.05;
  std::vector<long> checkpoints{100};
  int replications = 1;
  double p_moment = 2.0;
  int probe_count = 4096;   // constant-certification probes
  double anchor_tol = 1e-10;
};

inline void validate(const experiment_plan& plan) {
  validate(plan.prob);
  validate(plan.data);
  if (plan.prob.dim_data != plan.data.dim_data)
    throw input_error("plan: problem.dim_data != data.dim_data");
  validate(plan.schedule);
  if (!(plan.eps > 0.0)) throw input_error("plan: adam.eps must be > 0");
  if (plan.theta0.size() != plan.prob.dim_theta)
    throw input_error("plan: theta0 has wrong dimension");
  if (plan.batch_sizes.empty()) throw input_error("plan: batch_sizes is empty");
  for (int m : plan.batch_sizes)
    if (m < 1) throw input_error("plan: batch sizes must be >= 1");
  if (plan.batch_sizes.size() >= 1024 || plan.beta_grid.size() >= 1024 ||
      plan.checkpoints.size() >= 1024)
    throw input_error("plan: grids larger than 1023 entries are not supported");
  if (plan.beta_grid.empty()) throw input_error("plan: beta_grid is empty");
  if (!(plan.q_floor > 0.0 && plan.q_floor < 0.5))
    throw input_error("plan: q_floor must lie in (0, 1/2)");
  for (std::size_t i = 0; i < plan.beta_grid.size(); ++i) {
    const auto& b = plan.beta_grid[i];
    if (!(b.beta1 >= 0.0 && b.beta1 < 1.0 && b.beta2 > 0.0 && b.beta2 < 1.0))
      throw input_error("plan: beta_grid[" + std::to_string(i) +
                        "] outside [0,1) x (0,1)");
    if (!b.out_of_region &&
        !in_admissible_region(b.beta1, b.beta2, plan.q_floor))
      throw input_error("plan: beta_grid[" + std::to_string(i) +
                        "] outside the admissible region and not tagged "
                        "out_of_region");
  }
  if (plan.checkpoints.empty()) throw input_error("plan: checkpoints is empty");
  for (std::size_t k = 0; k < plan.checkpoints.size(); ++k) {
    if (plan.checkpoints[k] < 0)
      throw input_error("plan: checkpoints must be >= 0");
    if (k > 0 && plan.checkpoints[k] <= plan.checkpoints[k - 1])
      throw input_error("plan: checkpoints must be strictly increasing");
  }
  if (plan.replications < 1)
    throw input_error("plan: replications must be >= 1");
  if (!(plan.p_moment >= 1.0))
    throw input_error("plan: p_moment must be >= 1");
  if (plan.probe_count < 1)
    throw input_error("plan: constants.probe_count must be >= 1");
  if (!(plan.anchor_tol > 0.0))
    throw input_error("plan: constants.anchor_tol must be > 0");
}

namespace detail {

/// Runs body(i) for i in [0, count) across `workers` threads; worker w owns
/// the strided indices w, w + workers, ... so writes to per-index slots never
/// race. The first exception is rethrown after all threads join.
template <class F>
inline void parallel_for(int count, int workers, F&& body) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr first_error = nullptr;
  std::atomic<bool> failed{false};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::atomic<int> error_guard{0};
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        for (int i = w; i < count; i += workers) {
          if (failed.load(std::memory_order_relaxed)) return;
          body(i);
        }
      } catch (...) {
        if (error_guard.fetch_add(1) == 0) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline double halton(long index, int base) {
  double f = 1.0, r = 0.0;
  long i = index;
  while (i > 0) {
    f /= base;
    r += f * (i % base);
    i /= base;
  }
  return r;
}

constexpr int kHaltonPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                 23, 29, 31, 37, 41, 43, 47, 53};

/// Fixed, seed-free quadrature nodes for the uniform box: 5e4 Halton points
/// mapped to [-p, p]^dd together with their negations (1e5 nodes total), so
/// odd integrands cancel exactly.
inline std::vector<Eigen::VectorXd> box_quadrature(int dim, double p_box) {
  if (dim > 16)
    throw input_error("box_quadrature: more than 16 data dimensions");
  const long half = 50000;
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(2 * half);
  Eigen::VectorXd x(dim);
  for (long k = 1; k <= half; ++k) {
    for (int j = 0; j < dim; ++j)
      x[j] = p_box * (2.0 * halton(k, kHaltonPrimes[j]) - 1.0);
    pts.push_back(x);
    pts.push_back(-x);
  }
  return pts;
}

/// Atom/weight list of a discrete distribution (exact expectations).
inline void discrete_support(const data_spec& spec,
                             std::vector<Eigen::VectorXd>& atoms,
                             std::vector<double>& weights) {
  atoms.clear();
  weights.clear();
  switch (spec.kind) {
    case dist_kind::two_point: {
      Eigen::VectorXd plus = Eigen::VectorXd::Constant(spec.dim_data, spec.p_box);
      atoms = {plus, -plus};
      weights = {0.5, 0.5};
      return;
    }
    case dist_kind::point_mass:
      atoms = {spec.atoms.front()};
      weights = {1.0};
      return;
    case dist_kind::finite_atoms:
      atoms = spec.atoms;
      weights = spec.probs;
      return;
    case dist_kind::uniform_box:
      throw input_error("discrete_support: distribution is continuous");
  }
  throw input_error("discrete_support: unknown distribution kind");
}

}  // namespace detail

/// Minimizer of theta -> E[loss(theta, lift(X))]. Discrete distributions use
/// the exact weighted expectation; the uniform box uses the fixed quadrature
/// nodes. Without regularizers the stationarity condition is linear and
/// solved in closed form; otherwise full-gradient descent with step 1/L runs
/// to gradient norm <= tol.
inline Eigen::VectorXd estimate_minimizer(const problem& prob,
                                          const data_spec& spec, double tol) {
  if (!(tol > 0.0)) throw input_error("estimate_minimizer: tol must be > 0");
  validate(prob);
  validate(spec);
  if (prob.dim_data != spec.dim_data)
    throw input_error("estimate_minimizer: problem.dim_data != data.dim_data");

  std::vector<Eigen::VectorXd> raw_pts;
  std::vector<double> weights;
  if (spec.kind == dist_kind::uniform_box) {
    raw_pts = detail::box_quadrature(spec.dim_data, spec.p_box);
    weights.assign(raw_pts.size(), 1.0 / static_cast<double>(raw_pts.size()));
  } else {
    detail::discrete_support(spec, raw_pts, weights);
  }
  std::vector<Eigen::VectorXd> lifted(raw_pts.size());
  for (std::size_t i = 0; i < raw_pts.size(); ++i)
    lifted[i] = lift(prob, spec.p_box, raw_pts[i]);

  const int d = prob.dim_theta;
  if (prob.num_reg() == 0) {
    Eigen::VectorXd mean_f0 = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < lifted.size(); ++i)
      mean_f0 += weights[i] * lifted[i].head(d);
    return prob.a0.fullPivLu().solve(mean_f0);
  }

  const double lip = theta_grad_lipschitz(prob, spec.p_box);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd grad(d), term(d);
  grad_workspace ws;
  double grad_norm = std::numeric_limits<double>::infinity();
  const long cap = 1000000;
  for (long it = 0; it < cap; ++it) {
    grad.setZero();
    for (std::size_t i = 0; i < lifted.size(); ++i) {
      term.setZero();
      grad_theta_accumulate(prob, theta, lifted[i], ws, term);
      grad.noalias() += weights[i] * term;
    }
    grad_norm = grad.norm();
    if (grad_norm <= tol) return theta;
    theta -= (1.0 / lip) * grad;
  }
  throw numerical_error(
      "estimate_minimizer: no convergence within the iteration cap; last "
      "gradient norm " + std::to_string(grad_norm));
}

struct lp_estimate {
  double value = 0.0;
  double se = 0.0;  // bootstrap standard error
};

namespace detail {

/// One replication's distances-to-minimizer and running sup-norms at the
/// requested checkpoints.
struct replication_summary {
  std::vector<double> dist;
  std::vector<double> run_sup;
  double sup_norm_max = 0.0;
};

inline replication_summary summarize_replication(
    const experiment_plan& plan, int batch, const beta_pair& beta,
    std::uint32_t replication, const std::vector<long>& checkpoints,
    const Eigen::VectorXd& theta_star) {
  adam_config cfg;
  cfg.beta1 = beta.beta1;
  cfg.beta2 = beta.beta2;
  cfg.eps = plan.eps;
  cfg.batch_size = batch;
  sample_stream stream{plan.data};
  const long n_steps = checkpoints.empty() ? 0 : checkpoints.back();
  trajectory_result tr =
      run_trajectory(plan.prob, cfg, plan.schedule, stream, replication,
                     plan.theta0, n_steps, checkpoints);
  replication_summary out;
  out.dist.resize(checkpoints.size());
  out.run_sup = tr.running_sup;
  out.sup_norm_max = tr.sup_norm_max;
  for (std::size_t k = 0; k < checkpoints.size(); ++k)
    out.dist[k] = (tr.theta_at[k] - theta_star).norm();
  return out;
}

/// All replications for one (M, beta) cell; slot r of the result is
/// replication r, so the aggregation order never depends on scheduling.
inline std::vector<replication_summary> run_cell(
    const experiment_plan& plan, int batch, const beta_pair& beta,
    const std::vector<long>& checkpoints, const Eigen::VectorXd& theta_star,
    int parallel) {
  std::vector<replication_summary> reps(plan.replications);
  parallel_for(plan.replications, parallel, [&](int r) {
    reps[r] = summarize_replication(plan, batch, beta,
                                    static_cast<std::uint32_t>(r), checkpoints,
                                    theta_star);
  });
  return reps;
}

inline double lp_from_distances(const std::vector<double>& dist, double p) {
  double acc = 0.0;
  for (double v : dist) acc += std::pow(v, p);
  return std::pow(acc / static_cast<double>(dist.size()), 1.0 / p);
}

/// Bootstrap standard error of the L^p statistic, resampled with the
/// deterministic counter stream so the same row always reproduces byte-for-
/// byte. The row key packs (batch index, beta index, checkpoint index).
inline double bootstrap_se(std::uint64_t seed, std::uint32_t row_key,
                           const std::vector<double>& dist, double p) {
  const int resamples = 1000;
  const auto r_count = static_cast<std::uint32_t>(dist.size());
  double mean = 0.0, sq = 0.0;
  std::vector<double> sample(dist.size());
  for (int b = 0; b < resamples; ++b) {
    for (std::uint32_t j = 0; j < r_count; ++j) {
      const double u = philox_u53(seed, 0xB007u, row_key,
                                  static_cast<std::uint32_t>(b), j);
      auto idx = static_cast<std::size_t>(u * r_count);
      if (idx >= dist.size()) idx = dist.size() - 1;
      sample[j] = dist[idx];
    }
    const double stat = lp_from_distances(sample, p);
    mean += stat;
    sq += stat * stat;
  }
  mean /= resamples;
  sq = sq / resamples - mean * mean;
  return std::sqrt(std::max(0.0, sq) * resamples / (resamples - 1.0));
}

inline std::uint32_t row_key(std::size_t batch_idx, std::size_t beta_idx,
                             std::size_t cp_idx) {
  return static_cast<std::uint32_t>((batch_idx << 20) | (beta_idx << 10) |
                                    cp_idx);
}

template <class T>
inline std::size_t index_of(const std::vector<T>& xs, const T& x,
                            const std::string& what) {
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] == x) return i;
  throw input_error("plan does not contain the requested " + what);
}

}  // namespace detail

/// L^p distance to the global surrogate minimizer at one plan checkpoint,
/// with a bootstrap standard error. Trajectory r always consumes the same
/// sample stream (trajectory_id = r), so values agree with sweep output.
inline lp_estimate estimate_lp_error(const experiment_plan& plan, int batch,
                                     const beta_pair& beta, long n,
                                     int parallel = 1) {
  validate(plan);
  const std::size_t mi = detail::index_of(plan.batch_sizes, batch, "batch size");
  std::size_t bi = plan.beta_grid.size();
  for (std::size_t i = 0; i < plan.beta_grid.size(); ++i)
    if (plan.beta_grid[i].beta1 == beta.beta1 &&
        plan.beta_grid[i].beta2 == beta.beta2)
      bi = i;
  if (bi == plan.beta_grid.size())
    throw input_error("plan does not contain the requested beta pair");
  const std::size_t ci = detail::index_of(plan.checkpoints, n, "checkpoint");

  const Eigen::VectorXd theta_star =
      estimate_minimizer(plan.prob, plan.data, plan.anchor_tol);
  const std::vector<long> cps{n};
  const auto reps =
      detail::run_cell(plan, batch, plan.beta_grid[bi], cps, theta_star, parallel);
  std::vector<double> dist(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) dist[r] = reps[r].dist[0];
  lp_estimate out;
  out.value = detail::lp_from_distances(dist, plan.p_moment);
  out.se = detail::bootstrap_se(plan.seed, detail::row_key(mi, bi, ci), dist,
                                plan.p_moment);
  return out;
}

// ------------------------------- rate fitting ------------------------------

struct fit_result {
  double coefficient = 0.0;  // multiplicative constant exp(intercept)
  double slope = 0.0;        // exponent of gamma_n
  double r2 = 0.0;
  double floor_hat = 0.0;
  bool floor_engaged = false;
};

/// Least squares of log(err - floor) on log(gamma). The floor is the error
/// at the largest n, subtracted only when the two largest-n errors are
/// statistically indistinguishable (within two combined standard errors);
/// whenever it is subtracted, each adjusted error keeps at least 10% of its
/// raw value so the logarithm stays defined. Rows must be ordered by
/// increasing n (decreasing gamma).
inline fit_result fit_rate(const std::vector<double>& gammas,
                           const std::vector<double>& errors,
                           const std::vector<double>& std_errors = {}) {
  const std::size_t n = gammas.size();
  if (errors.size() != n ||
      (!std_errors.empty() && std_errors.size() != n))
    throw input_error("fit_rate: input lengths differ");
  if (n < 4) throw input_error("fit_rate: need at least 4 checkpoints");
  double gmin = gammas[0], gmax = gammas[0];
  for (double g : gammas) {
    if (!(g > 0.0)) throw input_error("fit_rate: gammas must be > 0");
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
  }
  if (gmax / gmin < 10.0)
    throw input_error("fit_rate: gamma values must span at least one decade");
  for (double e : errors)
    if (!(e > 0.0)) throw input_error("fit_rate: errors must be > 0");

  fit_result out;
  const double last = errors[n - 1], prev = errors[n - 2];
  double band = 0.0;
  if (!std_errors.empty())
    band = 2.0 * std::sqrt(std_errors[n - 1] * std_errors[n - 1] +
                           std_errors[n - 2] * std_errors[n - 2]);
  if (std::abs(last - prev) <= band) {
    out.floor_engaged = true;
    out.floor_hat = last;
  }

  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double adj = out.floor_engaged
                           ? std::max(errors[i] - out.floor_hat, 0.1 * errors[i])
                           : errors[i];
    lx[i] = std::log(gammas[i]);
    ly[i] = std::log(adj);
  }
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw input_error("fit_rate: gammas are degenerate");
  out.slope = sxy / sxx;
  out.coefficient = std::exp(my - out.slope * mx);
  out.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return out;
}

// --------------------------------- sweeps ----------------------------------

struct sweep_row {
  std::string experiment_id;
  int batch = 1;
  double beta1 = 0.9, beta2 = 0.999;
  long n = 0;
  double gamma_n = 0.0;
  double lp_error = 0.0;
  double lp_error_se = 0.0;
  double sup_norm_max = 0.0;
  double bound_b = std::numeric_limits<double>::infinity();
  int replications = 1;
  std::uint64_t seed = 0;
};

struct sweep_series {
  int batch = 1;
  beta_pair beta;
  double bound_b = std::numeric_limits<double>::infinity();
  std::vector<long> n;
  std::vector<double> gamma_n, lp_error, lp_error_se, sup_norm_max;
  double trajectory_sup_max = 0.0;  // over all replications and all steps
};

struct sweep_report {
  std::vector<sweep_row> rows;
  std::vector<sweep_series> series;
  Eigen::VectorXd theta_star;        // global surrogate minimizer
  problem_constants constants;       // certified problem constants
};

/// Bound inputs for one beta pair given certified constants. The reference
/// minimizer here is the anchor minimizer (fixed anchor data point), matching
/// the pathwise bound's construction.
inline bound_inputs bound_inputs_for(const experiment_plan& plan,
                                     const problem_constants& pc,
                                     const beta_pair& beta) {
  bound_inputs bi;
  bi.alpha = beta.beta1;
  bi.beta = beta.beta2;
  bi.eps = plan.eps;
  bi.d = plan.prob.dim_theta;
  bi.tau1 = pc.tau1;
  bi.tau2 = pc.tau2;
  bi.kappa = pc.kappa;
  bi.big_k = pc.big_k;
  bi.c_data = pc.c_data;
  bi.rho = pc.rho;
  bi.m_init_bound = 0.0;
  bi.v_init_bound = 0.0;
  bi.gamma1 = plan.schedule.gamma1;
  bi.schedule = plan.schedule;
  bi.theta0_dist = (plan.theta0 - pc.theta_star_anchor).norm();
  bi.theta_star_norm = pc.theta_star_anchor.norm();
  return bi;
}

/// Pathwise bound for one pair; +inf when the pair violates beta2 > beta1^2
/// or the ladder overflows (no finite certificate).
inline double bound_b_for(const experiment_plan& plan,
                          const problem_constants& pc, const beta_pair& beta) {
  if (beta.beta2 <= beta.beta1 * beta.beta1)
    return std::numeric_limits<double>::infinity();
  try {
    return compute_constants(bound_inputs_for(plan, pc, beta)).bound_b;
  } catch (const numerical_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Full sweep over batch_sizes x beta_grid x checkpoints. Replications run
/// concurrently; each (M, beta, replication) triple reuses trajectory_id =
/// replication index, so batch sizes and beta pairs are compared on common
/// random numbers.
inline sweep_report run_sweep(const experiment_plan& plan, int parallel = 1) {
  validate(plan);
  sweep_report rep;
  rep.theta_star = estimate_minimizer(plan.prob, plan.data, plan.anchor_tol);
  rep.constants = certify_constants(plan.prob, plan.data, plan.probe_count);

  for (std::size_t mi = 0; mi < plan.batch_sizes.size(); ++mi) {
    for (std::size_t bi = 0; bi < plan.beta_grid.size(); ++bi) {
      const auto& beta = plan.beta_grid[bi];
      const double bb = bound_b_for(plan, rep.constants, beta);
      const auto reps = detail::run_cell(plan, plan.batch_sizes[mi], beta,
                                         plan.checkpoints, rep.theta_star,
                                         parallel);
      sweep_series series;
      series.batch = plan.batch_sizes[mi];
      series.beta = beta;
      series.bound_b = bb;
      for (std::size_t ci = 0; ci < plan.checkpoints.size(); ++ci) {
        const long n = plan.checkpoints[ci];
        std::vector<double> dist(reps.size());
        double sup = 0.0;
        for (std::size_t r = 0; r < reps.size(); ++r) {
          dist[r] = reps[r].dist[ci];
          sup = std::max(sup, reps[r].run_sup[ci]);
        }
        sweep_row row;
        row.experiment_id = plan.experiment_id;
        row.batch = plan.batch_sizes[mi];
        row.beta1 = beta.beta1;
        row.beta2 = beta.beta2;
        row.n = n;
        row.gamma_n = n >= 1 ? gamma(plan.schedule, n) : 0.0;
        row.lp_error = detail::lp_from_distances(dist, plan.p_moment);
        row.lp_error_se = detail::bootstrap_se(
            plan.seed, detail::row_key(mi, bi, ci), dist, plan.p_moment);
        row.sup_norm_max = sup;
        row.bound_b = bb;
        row.replications = plan.replications;
        row.seed = plan.seed;
        rep.rows.push_back(row);
        series.n.push_back(n);
        series.gamma_n.push_back(row.gamma_n);
        series.lp_error.push_back(row.lp_error);
        series.lp_error_se.push_back(row.lp_error_se);
        series.sup_norm_max.push_back(sup);
      }
      for (const auto& r : reps)
        series.trajectory_sup_max =
            std::max(series.trajectory_sup_max, r.sup_norm_max);
      rep.series.push_back(std::move(series));
    }
  }
  return rep;
}

// --------------------------------- audits ----------------------------------

struct pathwise_audit {
  bool verdict = true;
  double max_ratio = 0.0;       // worst sup_norm / bound
  int worst_replication = -1;
  double worst_sup = 0.0;
};

/// Checks every replication's running sup-norm against the certified bound,
/// including the initial iterate. Runs the plan's first batch size and first
/// beta pair. An infinite bound is trivially satisfied.
inline pathwise_audit audit_pathwise_bound(const experiment_plan& plan,
                                           double bound_b, int parallel = 1) {
  validate(plan);
  pathwise_audit out;
  if (std::isinf(bound_b) && bound_b > 0.0) return out;
  if (!(bound_b > 0.0))
    throw input_error("audit_pathwise_bound: bound must be > 0");
  const Eigen::VectorXd theta_star =
      estimate_minimizer(plan.prob, plan.data, plan.anchor_tol);
  const auto reps =
      detail::run_cell(plan, plan.batch_sizes.front(), plan.beta_grid.front(),
                       plan.checkpoints, theta_star, parallel);
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const double ratio = reps[r].sup_norm_max / bound_b;
    if (ratio > out.max_ratio) {
      out.max_ratio = ratio;
      out.worst_replication = static_cast<int>(r);
      out.worst_sup = reps[r].sup_norm_max;
    }
  }
  out.verdict = out.max_ratio <= 1.0;
  return out;
}

struct uniform_audit_row {
  beta_pair beta;
  double sup_obs = 0.0;   // max over replications/steps of ||theta_n||
  double shape = 0.0;     // envelope shape value at c = 1
  double ratio = 0.0;     // sup_obs / shape
  double slack = 0.0;     // c_fit * shape - sup_obs
};

struct uniform_audit {
  std::vector<uniform_audit_row> rows;
  double c_fit = 0.0;           // smallest c with sup <= c * shape everywhere
  double sup_max = 0.0;         // worst observed sup-norm
  bool bounded = true;          // every pair stayed below the blow-up guard
  double blow_up_guard = 1e3;
};

/// Sup-norm audit across the beta grid against the envelope shape
///   (1-b1)^{-1/2} ||theta0|| + |ln(b1 + 1_{0}(b1))|^2 + (b2 - b1^2)^{-2}
///   + (1 - b1)^{-2};
/// fits the smallest multiplier c that dominates every observation. Uses the
/// plan's first batch size.
inline uniform_audit audit_uniform_in_beta(const experiment_plan& plan,
                                           int parallel = 1) {
  validate(plan);
  uniform_audit out;
  const Eigen::VectorXd theta_star =
      estimate_minimizer(plan.prob, plan.data, plan.anchor_tol);
  const double theta0_norm = plan.theta0.norm();
  for (const auto& beta : plan.beta_grid) {
    const auto reps =
        detail::run_cell(plan, plan.batch_sizes.front(), beta,
                         plan.checkpoints, theta_star, parallel);
    uniform_audit_row row;
    row.beta = beta;
    for (const auto& r : reps)
      row.sup_obs = std::max(row.sup_obs, r.sup_norm_max);
    row.shape =
        uniform_bound_rhs(beta.beta1, beta.beta2, plan.eps, theta0_norm, 1.0);
    row.ratio = row.sup_obs / row.shape;
    out.c_fit = std::max(out.c_fit, row.ratio);
    out.sup_max = std::max(out.sup_max, row.sup_obs);
    out.rows.push_back(row);
  }
  for (auto& row : out.rows) row.slack = out.c_fit * row.shape - row.sup_obs;
  out.bounded = out.sup_max < out.blow_up_guard;
  return out;
}

struct floor_audit {
  std::vector<int> batches;
  std::vector<double> errors;
  std::vector<double> std_errors;
  bool verdict = true;  // non-increasing in M within two combined SEs
};

/// Large-n mini-batch floor monotonicity from an existing sweep report
/// (first beta pair): error must not increase with M beyond twice the
/// combined bootstrap standard errors of adjacent batch sizes.
inline floor_audit audit_batch_floor(const sweep_report& report, long large_n) {
  floor_audit out;
  if (report.series.empty())
    throw input_error("audit_batch_floor: empty report");
  const beta_pair beta0 = report.series.front().beta;
  for (const auto& s : report.series) {
    if (s.beta.beta1 != beta0.beta1 || s.beta.beta2 != beta0.beta2) continue;
    for (std::size_t k = 0; k < s.n.size(); ++k)
      if (s.n[k] == large_n) {
        out.batches.push_back(s.batch);
        out.errors.push_back(s.lp_error[k]);
        out.std_errors.push_back(s.lp_error_se[k]);
      }
  }
  if (out.batches.size() < 2)
    throw input_error("audit_batch_floor: need at least two batch sizes at the "
                      "requested checkpoint");
  for (std::size_t k = 0; k + 1 < out.batches.size(); ++k) {
    if (out.batches[k + 1] <= out.batches[k])
      throw input_error("audit_batch_floor: batch sizes must increase");
    const double band =
        2.0 * std::sqrt(out.std_errors[k] * out.std_errors[k] +
                        out.std_errors[k + 1] * out.std_errors[k + 1]);
    if (out.errors[k + 1] > out.errors[k] + band) out.verdict = false;
  }
  return out;
}

/// Same audit, running the sweep for the plan first.
inline floor_audit audit_batch_floor(const experiment_plan& plan, long large_n,
                                     int parallel = 1) {
  return audit_batch_floor(run_sweep(plan, parallel), large_n);
}

// --------------------------------- output ----------------------------------

inline std::string format_g17(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline constexpr const char* kCsvHeader =
    "experiment_id,M,beta1,beta2,n,gamma_n,lp_error,lp_error_stderr,"
    "sup_norm_max,bound_b,replications,seed";

inline void write_csv(const sweep_report& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot open " + path + " for writing");
  os << kCsvHeader << "\n";
  for (const auto& r : report.rows) {
    os << r.experiment_id << ',' << r.batch << ',' << format_g17(r.beta1)
       << ',' << format_g17(r.beta2) << ',' << r.n << ','
       << format_g17(r.gamma_n) << ',' << format_g17(r.lp_error) << ','
       << format_g17(r.lp_error_se) << ',' << format_g17(r.sup_norm_max)
       << ',' << format_g17(r.bound_b) << ',' << r.replications << ','
       << r.seed << "\n";
  }
  if (!os) throw io_error("write failed for " + path);
}

inline std::string plot_file_name(int batch, const beta_pair& beta) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "plot_M%d_b1%g_b2%g.dat", batch, beta.beta1,
                beta.beta2);
  return buf;
}

/// One two-column (gamma_n, lp_error) file per (M, beta) series.
inline void write_plot_files(const sweep_report& report,
                             const std::string& dir) {
  for (const auto& s : report.series) {
    const std::string path = dir + "/" + plot_file_name(s.batch, s.beta);
    std::ofstream os(path);
    if (!os) throw io_error("cannot open " + path + " for writing");
    for (std::size_t k = 0; k < s.n.size(); ++k)
      os << format_g17(s.gamma_n[k]) << ' ' << format_g17(s.lp_error[k])
         << "\n";
    if (!os) throw io_error("write failed for " + path);
  }
}

}  // namespace adamcert
