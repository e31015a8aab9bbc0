#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "adamcert/config.hpp"

using namespace adamcert;
using Catch::Matchers::ContainsSubstring;

namespace {

json minimal_config() {
  return json::parse(R"({
    "experiment_id": "t",
    "seed": 7,
    "problem": {
      "dim_theta": 1,
      "dim_data": 1,
      "a0": [[2.0]],
      "f0": {"kind": "affine", "weight": [[1.0]], "offset": [0.0]}
    },
    "data": {"p_box": 1.0, "distribution": {"kind": "uniform_box"}},
    "adam": {"eps": 0.01},
    "schedule": {"family": "polynomial", "gamma1": 0.1,
                 "exponent": 0.6666666666666666},
    "plan": {
      "theta0": [1.0],
      "batch_sizes": [1],
      "beta_grid": [[0.5, 0.9]],
      "q_floor": 0.05,
      "checkpoints": [0, 10],
      "replications": 2,
      "p_moment": 2.0
    }
  })");
}

const std::string config_dir = ADAMCERT_CONFIG_DIR;
const std::string tmp_dir = ADAMCERT_TMP_DIR;

}  // namespace

TEST_CASE("minimal config parses into a validated plan", "[config]") {
  const experiment_plan plan = parse_config(minimal_config());
  CHECK(plan.experiment_id == "t");
  CHECK(plan.seed == 7);
  CHECK(plan.data.seed == 7);  // data stream inherits the plan seed
  CHECK(plan.prob.dim_theta == 1);
  CHECK(plan.prob.a0(0, 0) == 2.0);
  CHECK(plan.data.kind == dist_kind::uniform_box);
  CHECK(plan.eps == 0.01);
  CHECK(plan.schedule.gamma1 == 0.1);
  CHECK(plan.theta0[0] == 1.0);
  CHECK(plan.batch_sizes == std::vector<int>{1});
  REQUIRE(plan.beta_grid.size() == 1);
  CHECK(plan.beta_grid[0].beta1 == 0.5);
  CHECK(plan.beta_grid[0].beta2 == 0.9);
  CHECK_FALSE(plan.beta_grid[0].out_of_region);
  CHECK(plan.checkpoints == std::vector<long>{0, 10});
  CHECK(plan.replications == 2);
  CHECK(plan.probe_count == 4096);  // defaults when constants{} is absent
  CHECK(plan.anchor_tol == 1e-10);
}

TEST_CASE("regularizers, atoms, and tagged pairs round-trip", "[config]") {
  json j = minimal_config();
  j["problem"]["regularizers"] = json::array({json{
      {"a", json::array({json::array({1.0})})},
      {"mu", 0.5},
      {"r", 0.6},
      {"f", json{{"kind", "clipped_quadratic"},
                 {"coord", 0},
                 {"scale", 2.0},
                 {"clip", 0.8}}}}});
  j["data"]["distribution"] =
      json{{"kind", "finite_atoms"},
           {"atoms", json::array({json::array({-0.5}), json::array({0.5})})},
           {"probs", json::array({0.25, 0.75})}};
  j["plan"]["beta_grid"].push_back(
      json{{"beta1", 0.9}, {"beta2", 0.5}, {"out_of_region", true}});
  j["constants"] = json{{"probe_count", 128}, {"anchor_tol", 1e-8}};

  const experiment_plan plan = parse_config(j);
  REQUIRE(plan.prob.num_reg() == 1);
  CHECK(plan.prob.regularizers[0].mu == 0.5);
  CHECK(plan.prob.regularizers[0].r == 0.6);
  CHECK(std::holds_alternative<clipped_quad_weight>(
      plan.prob.regularizers[0].f));
  CHECK(plan.data.kind == dist_kind::finite_atoms);
  REQUIRE(plan.data.atoms.size() == 2);
  CHECK(plan.data.probs == std::vector<double>{0.25, 0.75});
  REQUIRE(plan.beta_grid.size() == 2);
  CHECK(plan.beta_grid[1].out_of_region);
  CHECK(plan.probe_count == 128);

  // Round trip: serialize, reparse, reserialize -> identical documents.
  const json once = to_json(plan);
  const experiment_plan plan2 = parse_config(once);
  const json twice = to_json(plan2);
  CHECK(once == twice);
  CHECK(plan2.beta_grid[1].out_of_region);
  CHECK(plan2.prob.regularizers[0].r == 0.6);
}

TEST_CASE("parse errors name the offending field", "[config]") {
  json j = minimal_config();
  j.erase("seed");
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("missing field $.seed")));

  j = minimal_config();
  j["seed"] = -1;
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("$.seed")));

  j = minimal_config();
  j["problem"]["a0"] = json::array(
      {json::array({1.0}), json::array({2.0, 3.0})});
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("problem.a0")));

  j = minimal_config();
  j["problem"]["f0"]["kind"] = "fourier";
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("problem.f0.kind")));

  j = minimal_config();
  j["problem"]["regularizers"] = json::array({json{
      {"a", json::array({json::array({1.0})})},
      {"mu", 0.5},
      {"r", 0.6},
      {"f", json{{"kind", "gaussian"}}}}});
  CHECK_THROWS_MATCHES(
      parse_config(j), input_error,
      Catch::Matchers::MessageMatches(
          ContainsSubstring("problem.regularizers[0].f.kind")));

  j = minimal_config();
  j["data"]["distribution"]["kind"] = "gaussian";
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("data.distribution.kind")));

  j = minimal_config();
  j["data"]["distribution"] =
      json{{"kind", "finite_atoms"},
           {"atoms", json::array({json::array({0.5})})}};
  CHECK_THROWS_MATCHES(
      parse_config(j), input_error,
      Catch::Matchers::MessageMatches(
          ContainsSubstring("missing field data.distribution.probs")));

  j = minimal_config();
  j["schedule"]["family"] = "exponential";
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("schedule.family")));

  // A pair on the wrong side of the moment region is caught by plan
  // validation with its grid index.
  j = minimal_config();
  j["plan"]["beta_grid"] = json::array({json::array({0.9, 0.81})});
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("beta_grid[0]")));

  j = minimal_config();
  j["plan"]["beta_grid"] = json::array({json::array({0.5})});
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("[beta1, beta2]")));

  j = minimal_config();
  j["plan"]["theta0"] = "wide";
  CHECK_THROWS_MATCHES(parse_config(j), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("plan.theta0")));
}

TEST_CASE("load_config separates io and parse failures", "[config]") {
  CHECK_THROWS_AS(load_config(tmp_dir + "/definitely_missing.json"), io_error);

  std::filesystem::create_directories(tmp_dir);
  const std::string bad_path = tmp_dir + "/broken.json";
  {
    std::ofstream os(bad_path);
    os << "{ not json";
  }
  CHECK_THROWS_MATCHES(load_config(bad_path), input_error,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("broken.json")));
}

TEST_CASE("bundled configs load and validate", "[config]") {
  const auto quad = load_config(config_dir + "/quadratic_1d.json");
  CHECK(quad.experiment_id == "quadratic_1d");
  CHECK(quad.seed == 12001);
  CHECK(quad.batch_sizes == std::vector<int>{1, 4});

  const auto pathwise = load_config(config_dir + "/pathwise_bound_2d.json");
  CHECK(pathwise.experiment_id == "pathwise_bound_2d");
  CHECK(pathwise.prob.dim_theta == 2);

  const auto rate = load_config(config_dir + "/rate_sweep_2d.json");
  CHECK(rate.experiment_id == "rate_sweep_2d");
  CHECK(rate.batch_sizes == std::vector<int>{1, 4, 16, 64});
  CHECK(rate.checkpoints.back() == 100000);
  CHECK(rate.replications == 200);
}
