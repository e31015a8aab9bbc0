#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "adamcert/data.hpp"
#include "adamcert/errors.hpp"
#include "adamcert/experiments.hpp"
#include "adamcert/schedule.hpp"
#include "adamcert/sop.hpp"

namespace adamcert {

using nlohmann::json;

namespace detail {

inline const json& require(const json& j, const std::string& key,
                           const std::string& path) {
  if (!j.is_object())
    throw input_error("config: " + path + " must be an object");
  auto it = j.find(key);
  if (it == j.end())
    throw input_error("config: missing field " + path + "." + key);
  return *it;
}

inline double require_number(const json& j, const std::string& key,
                             const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number())
    throw input_error("config: " + path + "." + key + " must be a number");
  return v.get<double>();
}

inline long require_integer(const json& j, const std::string& key,
                            const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_number_integer())
    throw input_error("config: " + path + "." + key + " must be an integer");
  return v.get<long>();
}

inline std::string require_string(const json& j, const std::string& key,
                                  const std::string& path) {
  const json& v = require(j, key, path);
  if (!v.is_string())
    throw input_error("config: " + path + "." + key + " must be a string");
  return v.get<std::string>();
}

inline Eigen::VectorXd parse_vector(const json& v, const std::string& path) {
  if (!v.is_array())
    throw input_error("config: " + path + " must be an array of numbers");
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw input_error("config: " + path + " must contain only numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

inline Eigen::MatrixXd parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty())
    throw input_error("config: " + path + " must be a non-empty array of rows");
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd out(v.size(), cols);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != cols)
      throw input_error("config: " + path + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!v[i][c].is_number())
        throw input_error("config: " + path + " must contain only numbers");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          v[i][c].get<double>();
    }
  }
  return out;
}

inline json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline f0_map parse_f0(const json& j, int dim_theta, const std::string& path) {
  const std::string kind = require_string(j, "kind", path);
  if (kind == "affine") {
    affine_map m;
    m.weight = parse_matrix(require(j, "weight", path), path + ".weight");
    m.offset = parse_vector(require(j, "offset", path), path + ".offset");
    return m;
  }
  if (kind == "clipped_poly") {
    clipped_poly_map m;
    m.dim_out = dim_theta;
    m.coeffs = parse_vector(require(j, "coeffs", path), path + ".coeffs");
    m.clip = require_number(j, "clip", path);
    return m;
  }
  throw input_error("config: " + path + ".kind must be affine or clipped_poly");
}

inline weight_map parse_weight(const json& j, const std::string& path) {
  const std::string kind = require_string(j, "kind", path);
  if (kind == "constant")
    return const_weight{require_number(j, "value", path)};
  if (kind == "abs_coordinate")
    return abs_coord_weight{static_cast<int>(require_integer(j, "coord", path))};
  if (kind == "clipped_quadratic") {
    clipped_quad_weight w;
    w.coord = static_cast<int>(require_integer(j, "coord", path));
    w.scale = require_number(j, "scale", path);
    w.clip = require_number(j, "clip", path);
    return w;
  }
  throw input_error("config: " + path +
                    ".kind must be constant, abs_coordinate, or "
                    "clipped_quadratic");
}

inline json f0_json(const f0_map& f) {
  json out;
  if (const auto* aff = std::get_if<affine_map>(&f)) {
    out["kind"] = "affine";
    out["weight"] = matrix_json(aff->weight);
    out["offset"] = vector_json(aff->offset);
  } else {
    const auto& cp = std::get<clipped_poly_map>(f);
    out["kind"] = "clipped_poly";
    out["coeffs"] = vector_json(cp.coeffs);
    out["clip"] = cp.clip;
  }
  return out;
}

inline json weight_json(const weight_map& f) {
  json out;
  if (const auto* c = std::get_if<const_weight>(&f)) {
    out["kind"] = "constant";
    out["value"] = c->value;
  } else if (const auto* a = std::get_if<abs_coord_weight>(&f)) {
    out["kind"] = "abs_coordinate";
    out["coord"] = a->coord;
  } else {
    const auto& q = std::get<clipped_quad_weight>(f);
    out["kind"] = "clipped_quadratic";
    out["coord"] = q.coord;
    out["scale"] = q.scale;
    out["clip"] = q.clip;
  }
  return out;
}

}  // namespace detail

/// Parses and fully validates a config document. Every error message names
/// the offending field.
inline experiment_plan parse_config(const json& root) {
  using detail::require;
  experiment_plan plan;
  plan.experiment_id = detail::require_string(root, "experiment_id", "$");
  const long seed = detail::require_integer(root, "seed", "$");
  if (seed < 0) throw input_error("config: $.seed must be >= 0");
  plan.seed = static_cast<std::uint64_t>(seed);

  const json& jp = require(root, "problem", "$");
  plan.prob.dim_theta =
      static_cast<int>(detail::require_integer(jp, "dim_theta", "problem"));
  plan.prob.dim_data =
      static_cast<int>(detail::require_integer(jp, "dim_data", "problem"));
  plan.prob.a0 = detail::parse_matrix(require(jp, "a0", "problem"), "problem.a0");
  plan.prob.f0 = detail::parse_f0(require(jp, "f0", "problem"),
                                  plan.prob.dim_theta, "problem.f0");
  plan.prob.dim_reg = 1;
  if (jp.contains("regularizers")) {
    const json& jr = jp["regularizers"];
    if (!jr.is_array())
      throw input_error("config: problem.regularizers must be an array");
    for (std::size_t i = 0; i < jr.size(); ++i) {
      const std::string path = "problem.regularizers[" + std::to_string(i) + "]";
      regularizer reg;
      reg.a = detail::parse_matrix(require(jr[i], "a", path), path + ".a");
      reg.mu = detail::require_number(jr[i], "mu", path);
      reg.r = detail::require_number(jr[i], "r", path);
      reg.f = detail::parse_weight(require(jr[i], "f", path), path + ".f");
      if (i == 0) plan.prob.dim_reg = static_cast<int>(reg.a.rows());
      plan.prob.regularizers.push_back(std::move(reg));
    }
  }

  const json& jd = require(root, "data", "$");
  plan.data.dim_data = plan.prob.dim_data;
  plan.data.p_box = detail::require_number(jd, "p_box", "data");
  plan.data.seed = plan.seed;
  const json& jdist = require(jd, "distribution", "data");
  const std::string dist = detail::require_string(jdist, "kind", "data.distribution");
  if (dist == "uniform_box") {
    plan.data.kind = dist_kind::uniform_box;
  } else if (dist == "two_point") {
    plan.data.kind = dist_kind::two_point;
  } else if (dist == "finite_atoms" || dist == "point_mass") {
    plan.data.kind = dist == "point_mass" ? dist_kind::point_mass
                                          : dist_kind::finite_atoms;
    const json& ja = require(jdist, "atoms", "data.distribution");
    if (!ja.is_array() || ja.empty())
      throw input_error("config: data.distribution.atoms must be a non-empty array");
    for (std::size_t i = 0; i < ja.size(); ++i)
      plan.data.atoms.push_back(detail::parse_vector(
          ja[i], "data.distribution.atoms[" + std::to_string(i) + "]"));
    if (dist == "finite_atoms") {
      const json& jw = require(jdist, "probs", "data.distribution");
      if (!jw.is_array() || jw.size() != ja.size())
        throw input_error(
            "config: data.distribution.probs must match atoms in length");
      for (const auto& w : jw) {
        if (!w.is_number())
          throw input_error("config: data.distribution.probs must be numbers");
        plan.data.probs.push_back(w.get<double>());
      }
    } else {
      plan.data.probs = {1.0};
    }
  } else {
    throw input_error(
        "config: data.distribution.kind must be uniform_box, two_point, "
        "finite_atoms, or point_mass");
  }

  const json& ja = require(root, "adam", "$");
  plan.eps = detail::require_number(ja, "eps", "adam");

  const json& js = require(root, "schedule", "$");
  const std::string family = detail::require_string(js, "family", "schedule");
  if (family != "polynomial")
    throw input_error("config: schedule.family must be polynomial (got " +
                      family + ")");
  plan.schedule.gamma1 = detail::require_number(js, "gamma1", "schedule");
  plan.schedule.exponent = detail::require_number(js, "exponent", "schedule");

  const json& jplan = require(root, "plan", "$");
  plan.theta0 =
      detail::parse_vector(require(jplan, "theta0", "plan"), "plan.theta0");
  const json& jbs = require(jplan, "batch_sizes", "plan");
  if (!jbs.is_array() || jbs.empty())
    throw input_error("config: plan.batch_sizes must be a non-empty array");
  plan.batch_sizes.clear();
  for (const auto& b : jbs) {
    if (!b.is_number_integer())
      throw input_error("config: plan.batch_sizes must be integers");
    plan.batch_sizes.push_back(b.get<int>());
  }
  const json& jbg = require(jplan, "beta_grid", "plan");
  if (!jbg.is_array() || jbg.empty())
    throw input_error("config: plan.beta_grid must be a non-empty array");
  plan.beta_grid.clear();
  for (std::size_t i = 0; i < jbg.size(); ++i) {
    const std::string path = "plan.beta_grid[" + std::to_string(i) + "]";
    beta_pair bp;
    if (jbg[i].is_array()) {
      if (jbg[i].size() != 2 || !jbg[i][0].is_number() || !jbg[i][1].is_number())
        throw input_error("config: " + path + " must be [beta1, beta2]");
      bp.beta1 = jbg[i][0].get<double>();
      bp.beta2 = jbg[i][1].get<double>();
    } else if (jbg[i].is_object()) {
      bp.beta1 = detail::require_number(jbg[i], "beta1", path);
      bp.beta2 = detail::require_number(jbg[i], "beta2", path);
      if (jbg[i].contains("out_of_region")) {
        if (!jbg[i]["out_of_region"].is_boolean())
          throw input_error("config: " + path + ".out_of_region must be a boolean");
        bp.out_of_region = jbg[i]["out_of_region"].get<bool>();
      }
    } else {
      throw input_error("config: " + path + " must be a pair or an object");
    }
    plan.beta_grid.push_back(bp);
  }
  plan.q_floor = detail::require_number(jplan, "q_floor", "plan");
  const json& jcp = require(jplan, "checkpoints", "plan");
  if (!jcp.is_array() || jcp.empty())
    throw input_error("config: plan.checkpoints must be a non-empty array");
  plan.checkpoints.clear();
  for (const auto& c : jcp) {
    if (!c.is_number_integer())
      throw input_error("config: plan.checkpoints must be integers");
    plan.checkpoints.push_back(c.get<long>());
  }
  plan.replications =
      static_cast<int>(detail::require_integer(jplan, "replications", "plan"));
  plan.p_moment = detail::require_number(jplan, "p_moment", "plan");

  if (root.contains("constants")) {
    const json& jc = root["constants"];
    if (jc.contains("probe_count"))
      plan.probe_count =
          static_cast<int>(detail::require_integer(jc, "probe_count", "constants"));
    if (jc.contains("anchor_tol"))
      plan.anchor_tol = detail::require_number(jc, "anchor_tol", "constants");
  }

  validate(plan);
  return plan;
}

/// Canonical serialization; parse_config(to_json(p)) reproduces p.
inline json to_json(const experiment_plan& plan) {
  json root;
  root["experiment_id"] = plan.experiment_id;
  root["seed"] = plan.seed;
  json jp;
  jp["dim_theta"] = plan.prob.dim_theta;
  jp["dim_data"] = plan.prob.dim_data;
  jp["a0"] = detail::matrix_json(plan.prob.a0);
  jp["f0"] = detail::f0_json(plan.prob.f0);
  if (!plan.prob.regularizers.empty()) {
    json jr = json::array();
    for (const auto& reg : plan.prob.regularizers) {
      json r;
      r["a"] = detail::matrix_json(reg.a);
      r["mu"] = reg.mu;
      r["r"] = reg.r;
      r["f"] = detail::weight_json(reg.f);
      jr.push_back(r);
    }
    jp["regularizers"] = jr;
  }
  root["problem"] = jp;
  json jd;
  jd["p_box"] = plan.data.p_box;
  json jdist;
  switch (plan.data.kind) {
    case dist_kind::uniform_box:
      jdist["kind"] = "uniform_box";
      break;
    case dist_kind::two_point:
      jdist["kind"] = "two_point";
      break;
    case dist_kind::finite_atoms: {
      jdist["kind"] = "finite_atoms";
      json atoms = json::array();
      for (const auto& a : plan.data.atoms)
        atoms.push_back(detail::vector_json(a));
      jdist["atoms"] = atoms;
      jdist["probs"] = plan.data.probs;
      break;
    }
    case dist_kind::point_mass: {
      jdist["kind"] = "point_mass";
      json atoms = json::array();
      atoms.push_back(detail::vector_json(plan.data.atoms.front()));
      jdist["atoms"] = atoms;
      break;
    }
  }
  jd["distribution"] = jdist;
  root["data"] = jd;
  root["adam"] = json{{"eps", plan.eps}};
  root["schedule"] = json{{"family", "polynomial"},
                          {"gamma1", plan.schedule.gamma1},
                          {"exponent", plan.schedule.exponent}};
  json jplan;
  jplan["theta0"] = detail::vector_json(plan.theta0);
  jplan["batch_sizes"] = plan.batch_sizes;
  json jbg = json::array();
  for (const auto& bp : plan.beta_grid) {
    if (bp.out_of_region) {
      jbg.push_back(json{{"beta1", bp.beta1},
                         {"beta2", bp.beta2},
                         {"out_of_region", true}});
    } else {
      jbg.push_back(json::array({bp.beta1, bp.beta2}));
    }
  }
  jplan["beta_grid"] = jbg;
  jplan["q_floor"] = plan.q_floor;
  jplan["checkpoints"] = plan.checkpoints;
  jplan["replications"] = plan.replications;
  jplan["p_moment"] = plan.p_moment;
  root["plan"] = jplan;
  root["constants"] = json{{"probe_count", plan.probe_count},
                           {"anchor_tol", plan.anchor_tol}};
  return root;
}

inline experiment_plan load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open config file " + path);
  json root;
  try {
    is >> root;
  } catch (const json::exception& e) {
    throw input_error("config: " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(root);
}

}  // namespace adamcert
