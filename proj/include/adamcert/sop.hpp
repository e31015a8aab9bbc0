#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "adamcert/data.hpp"
#include "adamcert/errors.hpp"
#include "adamcert/philox.hpp"

namespace adamcert {

// ---------------------------------------------------------------------------
// Feature-map catalog. The catalog is deliberately small so that coordinate
// ranges over the data box are available in closed form (affine maps by
// interval arithmetic, clipped maps by their clip constants), which keeps the
// certified constants analytic.
// ---------------------------------------------------------------------------

/// f0(x) = W x + b, W is d x dim_data.
struct affine_map {
  Eigen::MatrixXd weight;
  Eigen::VectorXd offset;
};

/// f0(x)_i = clamp(sum_k coeffs[k] * (x_{i mod dim_data})^k, -clip, clip).
struct clipped_poly_map {
  int dim_out = 1;
  Eigen::VectorXd coeffs;  // c0 + c1 t + c2 t^2 + ...
  double clip = 1.0;
};

using f0_map = std::variant<affine_map, clipped_poly_map>;

/// f_i(x) = c, c >= 0.
struct const_weight {
  double value = 1.0;
};

/// f_i(x) = |x_j|.
struct abs_coord_weight {
  int coord = 0;
};

/// f_i(x) = min(scale * x_j^2, clip), scale > 0, clip > 0.
struct clipped_quad_weight {
  int coord = 0;
  double scale = 1.0;
  double clip = 1.0;
};

using weight_map = std::variant<const_weight, abs_coord_weight, clipped_quad_weight>;

struct regularizer {
  Eigen::MatrixXd a;  // w x d
  double mu = 1.0;
  double r = 0.5;  // in [1/2, 3/4)
  weight_map f;
};

/// The regularized quadratic problem family:
///   loss(theta, x) = ||A0 theta - x_{1:d}||^2
///                    + sum_i (||A_i theta||^2 + mu_i)^{r_i} * x_{d+i},
/// evaluated on lifted data x = (f0(X), f1(X), ..., fv(X)).
struct problem {
  int dim_theta = 1;
  int dim_data = 1;
  int dim_reg = 1;
  Eigen::MatrixXd a0;  // d x d, invertible
  f0_map f0;
  std::vector<regularizer> regularizers;

  int num_reg() const { return static_cast<int>(regularizers.size()); }
  int lifted_dim() const { return dim_theta + num_reg(); }

  /// 2 * max_i r_i - 1 (0 with no regularizers); lies in [0, 1/2).
  double r_frak() const {
    double rmax = 0.5;
    bool any = false;
    for (const auto& reg : regularizers) {
      rmax = any ? std::max(rmax, reg.r) : reg.r;
      any = true;
    }
    return any ? 2.0 * rmax - 1.0 : 0.0;
  }

  /// max{r_frak, 1/4}.
  double r_cap() const { return std::max(r_frak(), 0.25); }
};

inline double smallest_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().minCoeff();
}

inline double operator_norm(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().maxCoeff();
}

inline void validate(const problem& p) {
  const int d = p.dim_theta;
  if (d < 1) throw input_error("problem.dim_theta must be >= 1");
  if (p.dim_data < 1) throw input_error("problem.dim_data must be >= 1");
  if (p.a0.rows() != d || p.a0.cols() != d)
    throw input_error("problem.a0 must be dim_theta x dim_theta");
  if (!(smallest_singular_value(p.a0) > 0.0))
    throw input_error("problem.a0 must be invertible (smallest singular value > 0)");
  if (const auto* aff = std::get_if<affine_map>(&p.f0)) {
    if (aff->weight.rows() != d || aff->weight.cols() != p.dim_data ||
        aff->offset.size() != d)
      throw input_error("problem.f0: affine map dimensions must be dim_theta x dim_data");
  } else {
    const auto& cp = std::get<clipped_poly_map>(p.f0);
    if (cp.dim_out != d) throw input_error("problem.f0: clipped_poly dim_out must equal dim_theta");
    if (cp.coeffs.size() < 1) throw input_error("problem.f0: clipped_poly needs coefficients");
    if (!(cp.clip > 0.0)) throw input_error("problem.f0: clip must be > 0");
  }
  for (std::size_t i = 0; i < p.regularizers.size(); ++i) {
    const auto& reg = p.regularizers[i];
    const std::string where = "problem.regularizers[" + std::to_string(i) + "]";
    if (reg.a.rows() != p.dim_reg || reg.a.cols() != d)
      throw input_error(where + ".a must be dim_reg x dim_theta");
    if (!(reg.mu > 0.0)) throw input_error(where + ".mu must be > 0");
    if (!(reg.r >= 0.5 && reg.r < 0.75))
      throw input_error(where + ".r must lie in [1/2, 3/4)");
    if (const auto* ac = std::get_if<abs_coord_weight>(&reg.f)) {
      if (ac->coord < 0 || ac->coord >= p.dim_data)
        throw input_error(where + ".f: coordinate out of range");
    } else if (const auto* cq = std::get_if<clipped_quad_weight>(&reg.f)) {
      if (cq->coord < 0 || cq->coord >= p.dim_data)
        throw input_error(where + ".f: coordinate out of range");
      if (!(cq->scale > 0.0) || !(cq->clip > 0.0))
        throw input_error(where + ".f: scale and clip must be > 0");
    } else if (std::get<const_weight>(reg.f).value < 0.0) {
      throw input_error(where + ".f: constant weight must be >= 0");
    }
  }
}

// --------------------------- catalog evaluation ----------------------------

inline void eval_f0_into(const problem& p, const Eigen::VectorXd& x_raw,
                         Eigen::Ref<Eigen::VectorXd> out) {
  if (const auto* aff = std::get_if<affine_map>(&p.f0)) {
    out.noalias() = aff->weight * x_raw;
    out += aff->offset;
  } else {
    const auto& cp = std::get<clipped_poly_map>(p.f0);
    for (int i = 0; i < cp.dim_out; ++i) {
      const double t = x_raw[i % x_raw.size()];
      double acc = 0.0;
      for (int k = static_cast<int>(cp.coeffs.size()) - 1; k >= 0; --k)
        acc = acc * t + cp.coeffs[k];
      out[i] = std::clamp(acc, -cp.clip, cp.clip);
    }
  }
}

inline double eval_weight(const weight_map& f, const Eigen::VectorXd& x_raw) {
  if (const auto* c = std::get_if<const_weight>(&f)) return c->value;
  if (const auto* a = std::get_if<abs_coord_weight>(&f))
    return std::abs(x_raw[a->coord]);
  const auto& q = std::get<clipped_quad_weight>(f);
  const double t = x_raw[q.coord];
  return std::min(q.scale * t * t, q.clip);
}

/// Closed-form per-coordinate range of f0 over the box [-p_box, p_box]^dd.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> f0_range(const problem& p,
                                                            double p_box) {
  Eigen::VectorXd lo(p.dim_theta), hi(p.dim_theta);
  if (const auto* aff = std::get_if<affine_map>(&p.f0)) {
    const Eigen::VectorXd spread = aff->weight.cwiseAbs().rowwise().sum() * p_box;
    lo = aff->offset - spread;
    hi = aff->offset + spread;
  } else {
    const auto& cp = std::get<clipped_poly_map>(p.f0);
    lo.setConstant(-cp.clip);
    hi.setConstant(cp.clip);
  }
  return {lo, hi};
}

/// Closed-form range [lo, hi] (lo >= 0) of a weight map over the box.
inline std::pair<double, double> weight_range(const weight_map& f, double p_box) {
  if (const auto* c = std::get_if<const_weight>(&f)) return {c->value, c->value};
  if (std::get_if<abs_coord_weight>(&f)) return {0.0, p_box};
  const auto& q = std::get<clipped_quad_weight>(f);
  return {0.0, std::min(q.scale * p_box * p_box, q.clip)};
}

/// Analytic Lipschitz bound for the theta-gradient over the data box:
/// 2 ||A0^T A0|| plus, per regularizer, the Hessian bound
/// (2 r + 4 r (1 - r)) mu^{r-1} sigma_max(A)^2 times the weight's box maximum.
inline double theta_grad_lipschitz(const problem& p, double p_box) {
  double k = 2.0 * operator_norm(p.a0.transpose() * p.a0);
  for (const auto& reg : p.regularizers) {
    const double s = operator_norm(reg.a);
    k += (2.0 * reg.r + 4.0 * reg.r * (1.0 - reg.r)) *
         std::pow(reg.mu, reg.r - 1.0) * s * s *
         weight_range(reg.f, p_box).second;
  }
  return k;
}

inline void lift_into(const problem& p, double p_box,
                      const Eigen::VectorXd& x_raw, Eigen::VectorXd& out) {
  (void)p_box;  // samples are in the box by construction on this path
  out.resize(p.lifted_dim());
  eval_f0_into(p, x_raw, out.head(p.dim_theta));
  for (int i = 0; i < p.num_reg(); ++i)
    out[p.dim_theta + i] = eval_weight(p.regularizers[i].f, x_raw);
}

/// Lifts a raw data point: (f0(x), f1(x), ..., fv(x)).
inline Eigen::VectorXd lift(const problem& p, double p_box,
                            const Eigen::VectorXd& x_raw) {
  if (x_raw.size() != p.dim_data)
    throw input_error("lift: raw point has wrong dimension");
  if (x_raw.cwiseAbs().maxCoeff() > p_box)
    throw domain_error("lift: raw point outside the data box");
  Eigen::VectorXd out;
  lift_into(p, p_box, x_raw, out);
  return out;
}

// ------------------------------ loss/gradients -----------------------------

inline void check_lifted(const problem& p, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x_lifted) {
  if (theta.size() != p.dim_theta)
    throw input_error("theta has wrong dimension");
  if (x_lifted.size() != p.lifted_dim())
    throw input_error("lifted data point has wrong dimension");
  for (int i = 0; i < p.num_reg(); ++i)
    if (x_lifted[p.dim_theta + i] < 0.0)
      throw domain_error("lifted regularizer weight must be >= 0");
}

inline double loss(const problem& p, const Eigen::VectorXd& theta,
                   const Eigen::VectorXd& x_lifted) {
  check_lifted(p, theta, x_lifted);
  const int d = p.dim_theta;
  double value = (p.a0 * theta - x_lifted.head(d)).squaredNorm();
  for (int i = 0; i < p.num_reg(); ++i) {
    const auto& reg = p.regularizers[i];
    value += std::pow((reg.a * theta).squaredNorm() + reg.mu, reg.r) *
             x_lifted[d + i];
  }
  return value;
}

/// Reusable buffers for the allocation-free gradient path.
struct grad_workspace {
  Eigen::VectorXd residual;  // A0 theta - x_{1:d}
  Eigen::VectorXd a_theta;   // A_i theta
  Eigen::VectorXd ata_theta;
};

/// grad wrt theta:
///   2 A0^T (A0 theta - x_{1:d})
///   + sum_i 2 r_i (||A_i theta||^2 + mu_i)^{r_i - 1} A_i^T A_i theta x_{d+i}.
/// Accumulates into out (out += gradient) so batch averaging needs no
/// temporaries; callers pass a zeroed out for a single evaluation.
inline void grad_theta_accumulate(const problem& p, const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& x_lifted,
                                  grad_workspace& ws, Eigen::VectorXd& out) {
  const int d = p.dim_theta;
  ws.residual.noalias() = p.a0 * theta;
  ws.residual -= x_lifted.head(d);
  out.noalias() += 2.0 * p.a0.transpose() * ws.residual;
  for (int i = 0; i < p.num_reg(); ++i) {
    const auto& reg = p.regularizers[i];
    ws.a_theta.noalias() = reg.a * theta;
    const double s = ws.a_theta.squaredNorm() + reg.mu;
    const double coef =
        2.0 * reg.r * std::pow(s, reg.r - 1.0) * x_lifted[d + i];
    out.noalias() += coef * (reg.a.transpose() * ws.a_theta);
  }
}

inline Eigen::VectorXd grad_theta(const problem& p, const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& x_lifted) {
  check_lifted(p, theta, x_lifted);
  grad_workspace ws;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.dim_theta);
  grad_theta_accumulate(p, theta, x_lifted, ws, out);
  return out;
}

/// grad wrt the lifted data point: first d coordinates -2(A0 theta - x_{1:d}),
/// last v coordinates (||A_i theta||^2 + mu_i)^{r_i}.
inline Eigen::VectorXd grad_x(const problem& p, const Eigen::VectorXd& theta,
                              const Eigen::VectorXd& x_lifted) {
  check_lifted(p, theta, x_lifted);
  const int d = p.dim_theta;
  Eigen::VectorXd out(p.lifted_dim());
  out.head(d) = -2.0 * (p.a0 * theta - x_lifted.head(d));
  for (int i = 0; i < p.num_reg(); ++i) {
    const auto& reg = p.regularizers[i];
    out[d + i] = std::pow((reg.a * theta).squaredNorm() + reg.mu, reg.r);
  }
  return out;
}

// --------------------------- certified constants ---------------------------

struct problem_constants {
  double kappa = 0.0;   // strong convexity modulus
  double big_k = 0.0;   // Lipschitz-type constant on the data box
  double tau1 = 0.0;
  double tau2 = 0.0;
  double c_data = 1.0;  // lifted data inside the ball of this radius
  double rho = 1.0;     // 1 + sup over box of ||grad_theta at the anchor minimizer||
  Eigen::VectorXd anchor;             // lifted anchor point (lift of 0)
  Eigen::VectorXd theta_star_anchor;  // minimizer of loss(., anchor)
};

/// Full-gradient descent on theta -> loss(theta, anchor) with step 1/K;
/// strong convexity makes this linearly convergent. Closed form when there
/// are no regularizers.
inline Eigen::VectorXd solve_anchor_minimizer(const problem& p,
                                              const Eigen::VectorXd& anchor,
                                              double tol) {
  if (!(tol > 0.0)) throw input_error("solve_anchor_minimizer: tol must be > 0");
  if (anchor.size() != p.lifted_dim())
    throw input_error("solve_anchor_minimizer: anchor has wrong dimension");
  const int d = p.dim_theta;
  if (p.num_reg() == 0)
    return p.a0.fullPivLu().solve(anchor.head(d));
  double lip = 2.0 * operator_norm(p.a0.transpose() * p.a0);
  for (int i = 0; i < p.num_reg(); ++i) {
    const auto& reg = p.regularizers[i];
    const double s2 = operator_norm(reg.a);
    lip += (2.0 * reg.r + 4.0 * reg.r * (1.0 - reg.r)) *
           std::pow(reg.mu, reg.r - 1.0) * s2 * s2 *
           std::max(0.0, anchor.tail(p.num_reg())[i]);
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  grad_workspace ws;
  Eigen::VectorXd g(d);
  const long cap = 1000000;
  for (long it = 0; it < cap; ++it) {
    g.setZero();
    grad_theta_accumulate(p, theta, anchor, ws, g);
    const double gn = g.norm();
    if (gn <= tol) return theta;
    theta -= (1.0 / lip) * g;
  }
  g.setZero();
  grad_theta_accumulate(p, theta, anchor, ws, g);
  throw numerical_error(
      "solve_anchor_minimizer: no convergence within the iteration cap; "
      "last gradient norm " + std::to_string(g.norm()));
}

namespace detail {

/// Deterministic probe stream for certification (stream id is a fixed tag).
inline double probe_u(std::uint64_t seed, std::uint32_t n, std::uint32_t m,
                      std::uint32_t j) {
  return philox_u53(seed, 0xCE7Fu, n, m, j);
}

inline Eigen::VectorXd probe_vector(std::uint64_t seed, std::uint32_t n,
                                    std::uint32_t m, int dim, double half_width) {
  Eigen::VectorXd v(dim);
  for (int j = 0; j < dim; ++j)
    v[j] = half_width *
           (2.0 * probe_u(seed, n, m, static_cast<std::uint32_t>(j)) - 1.0);
  return v;
}

}  // namespace detail

/// Certifies (kappa, K, tau1, tau2, c, rho) for a problem over a data spec.
///
/// kappa = 2 * sigma_min(A0)^2 (exact). K is the analytic Lipschitz bound
/// 2 ||A0^T A0|| + sum_i L_i sup_box f_i with the dominating Hessian bound
/// L_i = (2 r_i + 4 r_i (1 - r_i)) mu_i^{r_i - 1} sigma_max(A_i)^2, widened to
/// also dominate the x-gradient growth constant 2||A0|| + sum_i 2 r_i
/// sigma_max(A_i)^{2 r_i}; sampled difference quotients cross-check it (the
/// 1.05 safety factor engages only if sampling ever exceeds the analytic
/// value). tau1 = 0 (globally Lipschitz theta-gradient), tau2 = max{r_frak,
/// 1/4}. c = max(1, norm radius of the lifted-range box). rho = 1 + the exact
/// vertex maximum of ||grad_theta(theta_star_anchor, .)|| over that box.
inline problem_constants certify_constants(const problem& p,
                                           const data_spec& spec,
                                           int probe_count) {
  if (probe_count < 1) throw input_error("certify_constants: probe_count must be >= 1");
  validate(p);
  if (p.dim_data != spec.dim_data)
    throw input_error("certify_constants: problem.dim_data != data.dim_data");
  const int d = p.dim_theta;
  const int v = p.num_reg();

  problem_constants out;
  const double sv_min = smallest_singular_value(p.a0);
  if (!(sv_min > 0.0)) throw input_error("certify_constants: a0 is singular");
  out.kappa = 2.0 * sv_min * sv_min;
  out.tau1 = 0.0;
  out.tau2 = p.r_cap();

  // Analytic Lipschitz bounds (theta side and x side).
  const double k_theta = theta_grad_lipschitz(p, spec.p_box);
  double k_x = 2.0 * operator_norm(p.a0);
  for (const auto& reg : p.regularizers) {
    const double s = operator_norm(reg.a);
    k_x += 2.0 * reg.r * std::pow(s, 2.0 * reg.r);
  }
  const double k_analytic = std::max(k_theta, k_x);

  // Lifted-range box: closed-form coordinate ranges of the catalog maps.
  auto [f0_lo, f0_hi] = f0_range(p, spec.p_box);
  Eigen::VectorXd box_lo(d + v), box_hi(d + v);
  box_lo.head(d) = f0_lo;
  box_hi.head(d) = f0_hi;
  for (int i = 0; i < v; ++i) {
    auto [wl, wh] = weight_range(p.regularizers[i].f, spec.p_box);
    box_lo[d + i] = wl;
    box_hi[d + i] = wh;
  }
  out.c_data = std::max(
      1.0, box_lo.cwiseAbs().cwiseMax(box_hi.cwiseAbs()).norm());

  // Sampled cross-checks over deterministic probes.
  const std::uint64_t seed = spec.seed;
  double q_theta = 0.0, q_x = 0.0, sc_min = std::numeric_limits<double>::infinity();
  double lifted_sup = 0.0;
  Eigen::VectorXd raw(p.dim_data), xl;
  const double tau2 = out.tau2;
  for (int k = 0; k < probe_count; ++k) {
    const auto kk = static_cast<std::uint32_t>(k);
    raw = detail::probe_vector(seed, kk, 0, p.dim_data, spec.p_box);
    lift_into(p, spec.p_box, raw, xl);
    lifted_sup = std::max(lifted_sup, xl.norm());
    const Eigen::VectorXd th1 = detail::probe_vector(seed, kk, 1, d, 2.0);
    const Eigen::VectorXd th2 = detail::probe_vector(seed, kk, 2, d, 2.0);
    const double dist = (th1 - th2).norm();
    if (dist < 1e-12) continue;
    const Eigen::VectorXd dgt = grad_theta(p, th1, xl) - grad_theta(p, th2, xl);
    const Eigen::VectorXd dgx = grad_x(p, th1, xl) - grad_x(p, th2, xl);
    q_theta = std::max(q_theta, dgt.norm() / dist);
    const double growth =
        1.0 + std::pow(th1.norm(), tau2) + std::pow(th2.norm(), tau2);
    q_x = std::max(q_x, dgx.norm() / (dist * growth));
    sc_min = std::min(sc_min, (th1 - th2).dot(dgt) / (dist * dist));
  }
  const double q_max = std::max(q_theta, q_x);
  out.big_k = q_max > k_analytic ? 1.05 * q_max : k_analytic;
  if (sc_min < out.kappa - 1e-9)
    throw numerical_error(
        "certify_constants: sampled strong-convexity ratio " +
        std::to_string(sc_min) + " fell below kappa");
  if (lifted_sup > out.c_data + 1e-9)
    throw numerical_error("certify_constants: sampled lifted norm exceeded c");

  // Anchor at the box center and its minimizer.
  out.anchor = lift(p, spec.p_box, Eigen::VectorXd::Zero(p.dim_data));
  out.theta_star_anchor = solve_anchor_minimizer(p, out.anchor, 1e-10);

  // rho: the gradient at theta_star_anchor is affine in x, so its norm is
  // maximized at a vertex of the lifted-range box.
  const int corners_dim = d + v;
  if (corners_dim > 20)
    throw input_error("certify_constants: lifted dimension too large for vertex enumeration");
  double sup_grad = 0.0;
  Eigen::VectorXd corner(corners_dim);
  for (std::uint64_t mask = 0; mask < (1ull << corners_dim); ++mask) {
    for (int j = 0; j < corners_dim; ++j)
      corner[j] = (mask >> j) & 1u ? box_hi[j] : box_lo[j];
    sup_grad = std::max(sup_grad,
                        grad_theta(p, out.theta_star_anchor, corner).norm());
  }
  out.rho = 1.0 + sup_grad;
  return out;
}

}  // namespace adamcert
