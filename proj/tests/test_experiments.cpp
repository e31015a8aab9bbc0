#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adamcert/experiments.hpp"

using namespace adamcert;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

Eigen::MatrixXd mat1(double a) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = a;
  return m;
}

problem quadratic_1d(double a, double offset) {
  problem p;
  p.dim_theta = 1;
  p.dim_data = 1;
  p.dim_reg = 1;
  p.a0 = mat1(a);
  p.f0 = affine_map{Eigen::MatrixXd::Identity(1, 1), vec1(offset)};
  return p;
}

problem regularized_1d(double offset) {
  problem p = quadratic_1d(1.0, offset);
  regularizer reg;
  reg.a = mat1(1.0);
  reg.mu = 1.0;
  reg.r = 0.5;
  reg.f = const_weight{1.0};
  p.regularizers.push_back(reg);
  return p;
}

experiment_plan small_plan() {
  experiment_plan plan;
  plan.experiment_id = "unit";
  plan.seed = 424242;
  plan.prob = quadratic_1d(2.0, 0.0);
  plan.data.dim_data = 1;
  plan.data.p_box = 1.0;
  plan.data.seed = 424242;
  plan.schedule.gamma1 = 0.1;
  plan.schedule.exponent = 2.0 / 3.0;
  plan.eps = 0.01;
  plan.theta0 = vec1(1.5);
  plan.batch_sizes = {1, 2};
  plan.beta_grid = {{0.5, 0.9, false}};
  plan.checkpoints = {0, 5, 10};
  plan.replications = 3;
  plan.p_moment = 2.0;
  plan.probe_count = 256;
  return plan;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

const std::string tmp_dir = ADAMCERT_TMP_DIR;

}  // namespace

TEST_CASE("admissible moment region", "[experiments]") {
  CHECK(in_admissible_region(0.9, 0.999, 0.05));  // 0.81 + 0.05 <= 0.999
  // The lowest admissible corner is beta1 = q, beta2 = q^2 + q (boundary
  // equality included); (q, q) itself sits below the parabola.
  CHECK(in_admissible_region(0.05, 0.05 * 0.05 + 0.05, 0.05));
  CHECK_FALSE(in_admissible_region(0.05, 0.05, 0.05));
  CHECK_FALSE(in_admissible_region(0.9, 0.85, 0.05));
  CHECK_FALSE(in_admissible_region(0.02, 0.5, 0.05));  // beta1 below floor
  CHECK_FALSE(in_admissible_region(0.5, 0.02, 0.05));
  CHECK_THROWS_AS(in_admissible_region(0.5, 0.9, 0.0), input_error);
  CHECK_THROWS_AS(in_admissible_region(0.5, 0.9, 0.5), input_error);
}

TEST_CASE("plan validation pins down the failing field", "[experiments]") {
  experiment_plan plan = small_plan();
  REQUIRE_NOTHROW(validate(plan));

  plan.beta_grid.push_back({0.9, 0.85, false});  // inadmissible, untagged
  CHECK_THROWS_MATCHES(validate(plan), input_error,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("beta_grid[1]")));
  plan.beta_grid.back().out_of_region = true;  // tagging it is allowed
  REQUIRE_NOTHROW(validate(plan));

  plan = small_plan();
  plan.checkpoints = {0, 5, 5};
  CHECK_THROWS_MATCHES(
      validate(plan), input_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("strictly increasing")));
  plan.checkpoints = {-1, 5};
  CHECK_THROWS_AS(validate(plan), input_error);

  plan = small_plan();
  plan.replications = 0;
  CHECK_THROWS_AS(validate(plan), input_error);
  plan = small_plan();
  plan.p_moment = 0.5;
  CHECK_THROWS_AS(validate(plan), input_error);
  plan = small_plan();
  plan.theta0 = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(validate(plan), input_error);
  plan = small_plan();
  plan.batch_sizes = {};
  CHECK_THROWS_AS(validate(plan), input_error);
  plan = small_plan();
  plan.batch_sizes = {0};
  CHECK_THROWS_AS(validate(plan), input_error);
  plan = small_plan();
  plan.q_floor = 0.6;
  CHECK_THROWS_AS(validate(plan), input_error);
  plan = small_plan();
  plan.data.dim_data = 2;
  CHECK_THROWS_AS(validate(plan), input_error);
}

TEST_CASE("surrogate minimizer matches closed forms", "[experiments]") {
  // Symmetric two-atom distribution: E[f0(X)] = 0, theta* = 0.
  problem p = quadratic_1d(2.0, 0.0);
  data_spec spec;
  spec.dim_data = 1;
  spec.p_box = 1.0;
  spec.kind = dist_kind::finite_atoms;
  spec.atoms = {vec1(-0.8), vec1(0.8)};
  spec.probs = {0.5, 0.5};
  CHECK(std::abs(estimate_minimizer(p, spec, 1e-12)[0]) < 1e-14);

  // two_point: support {-p_box, +p_box} with equal odds, same answer.
  spec = data_spec{};
  spec.dim_data = 1;
  spec.kind = dist_kind::two_point;
  CHECK(std::abs(estimate_minimizer(p, spec, 1e-12)[0]) < 1e-14);

  // Uniform box with affine offset b: theta* = A0^{-1} b.
  p = quadratic_1d(2.0, 0.6);
  spec = data_spec{};
  spec.dim_data = 1;
  spec.p_box = 1.0;
  CHECK_THAT(estimate_minimizer(p, spec, 1e-12)[0],
             Catch::Matchers::WithinAbs(0.3, 1e-9));

  // Point mass: the surrogate objective is loss(., lift(x0)), so the result
  // must agree with the anchor solver and with a bisection oracle.
  const problem q = regularized_1d(1.0);
  spec = data_spec{};
  spec.dim_data = 1;
  spec.kind = dist_kind::point_mass;
  spec.atoms = {vec1(0.0)};
  const double via_expectation = estimate_minimizer(q, spec, 1e-11)[0];
  const double via_anchor =
      solve_anchor_minimizer(q, lift(q, 1.0, vec1(0.0)), 1e-11)[0];
  CHECK_THAT(via_expectation, Catch::Matchers::WithinAbs(via_anchor, 1e-9));
  auto g = [](double t) { return 2.0 * (t - 1.0) + t / std::sqrt(t * t + 1.0); };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  CHECK_THAT(via_expectation,
             Catch::Matchers::WithinAbs(0.5 * (lo + hi), 1e-8));

  CHECK_THROWS_AS(estimate_minimizer(p, spec, 0.0), input_error);
}

TEST_CASE("lp error estimates with bootstrap errors", "[experiments]") {
  experiment_plan plan = small_plan();

  // n = 0: every replication sits at theta0, so the statistic is exact and
  // the bootstrap spread collapses to zero.
  const Eigen::VectorXd star =
      estimate_minimizer(plan.prob, plan.data, plan.anchor_tol);
  const auto at0 = estimate_lp_error(plan, 1, plan.beta_grid[0], 0);
  CHECK_THAT(at0.value, Catch::Matchers::WithinRel(
                            (plan.theta0 - star).norm(), 1e-13));
  CHECK(at0.se < 1e-6);  // resampling identical values leaves only rounding

  // One replication: the L^p statistic is that replication's distance.
  experiment_plan single = plan;
  single.replications = 1;
  const auto one = estimate_lp_error(single, 1, plan.beta_grid[0], 10);
  adam_config cfg;
  cfg.beta1 = 0.5;
  cfg.beta2 = 0.9;
  cfg.eps = plan.eps;
  cfg.batch_size = 1;
  sample_stream stream{plan.data};
  const auto tr = run_trajectory(plan.prob, cfg, plan.schedule, stream, 0,
                                 plan.theta0, 10, {10});
  CHECK_THAT(one.value, Catch::Matchers::WithinRel(
                            (tr.theta_at[0] - star).norm(), 1e-13));
  CHECK(one.se < 1e-6);

  // Requests outside the plan grids are rejected.
  CHECK_THROWS_MATCHES(estimate_lp_error(plan, 7, plan.beta_grid[0], 10),
                       input_error,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("batch size")));
  CHECK_THROWS_AS(estimate_lp_error(plan, 1, beta_pair{0.6, 0.9}, 10),
                  input_error);
  CHECK_THROWS_AS(estimate_lp_error(plan, 1, plan.beta_grid[0], 7),
                  input_error);

  // Bootstrap stream is deterministic per row key.
  const std::vector<double> dist{0.5, 0.7, 0.2, 0.9};
  const double se1 = detail::bootstrap_se(9, detail::row_key(1, 2, 3), dist, 2.0);
  const double se2 = detail::bootstrap_se(9, detail::row_key(1, 2, 3), dist, 2.0);
  CHECK(se1 == se2);
  CHECK(se1 > 0.0);
  CHECK(se1 != detail::bootstrap_se(9, detail::row_key(1, 2, 4), dist, 2.0));
}

TEST_CASE("rate fitting recovers exact power laws", "[experiments]") {
  const std::vector<double> gammas{1.0, 0.1, 0.01, 0.001};

  std::vector<double> errors;
  for (double g : gammas) errors.push_back(2.0 * std::sqrt(g));
  auto fit = fit_rate(gammas, errors);
  CHECK_THAT(fit.slope, Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(fit.coefficient, Catch::Matchers::WithinRel(2.0, 1e-10));
  CHECK_THAT(fit.r2, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_FALSE(fit.floor_engaged);

  errors.clear();
  for (double g : gammas) errors.push_back(3.0 * g);
  fit = fit_rate(gammas, errors);
  CHECK_THAT(fit.slope, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(fit.coefficient, Catch::Matchers::WithinRel(3.0, 1e-10));

  // Floor detection: last two points statistically indistinguishable.
  const std::vector<double> with_floor{2.0, 0.2, 0.021, 0.02};
  const std::vector<double> ses{1e-3, 1e-3, 1e-3, 1e-3};
  fit = fit_rate(gammas, with_floor, ses);
  CHECK(fit.floor_engaged);
  CHECK(fit.floor_hat == 0.02);
  // Clearly separated points leave the floor off.
  const std::vector<double> no_floor{2.0, 0.2, 0.06, 0.02};
  const std::vector<double> tight{1e-4, 1e-4, 1e-4, 1e-4};
  fit = fit_rate(gammas, no_floor, tight);
  CHECK_FALSE(fit.floor_engaged);

  CHECK_THROWS_AS(fit_rate({1.0, 0.1, 0.01}, {1.0, 0.5, 0.2}), input_error);
  CHECK_THROWS_AS(fit_rate({1.0, 0.9, 0.8, 0.7}, {1.0, 0.5, 0.2, 0.1}),
                  input_error);
  CHECK_THROWS_AS(fit_rate(gammas, {1.0, 0.5, 0.0, 0.1}), input_error);
  CHECK_THROWS_AS(fit_rate(gammas, {1.0, 0.5, 0.2}), input_error);
}

TEST_CASE("sweeps are deterministic and parallel-degree independent",
          "[experiments]") {
  experiment_plan plan = small_plan();
  plan.beta_grid.push_back({0.9, 0.5, true});  // exploratory, no certificate

  const sweep_report seq = run_sweep(plan, 1);
  const sweep_report par = run_sweep(plan, 4);

  REQUIRE(seq.rows.size() == 2 * 2 * 3);  // batches x pairs x checkpoints
  REQUIRE(seq.rows.size() == par.rows.size());
  for (std::size_t i = 0; i < seq.rows.size(); ++i) {
    CHECK(seq.rows[i].lp_error == par.rows[i].lp_error);
    CHECK(seq.rows[i].lp_error_se == par.rows[i].lp_error_se);
    CHECK(seq.rows[i].sup_norm_max == par.rows[i].sup_norm_max);
    CHECK(seq.rows[i].bound_b == par.rows[i].bound_b);
    CHECK(seq.rows[i].n == par.rows[i].n);
  }
  REQUIRE(seq.series.size() == 4);

  // Certified pair carries a finite bound; the tagged pair has none.
  CHECK(std::isfinite(seq.series[0].bound_b));
  CHECK(std::isinf(seq.series[1].bound_b));

  // Row at checkpoint 0 uses the gamma sentinel 0 and distance ||theta0 - t*||.
  CHECK(seq.rows[0].n == 0);
  CHECK(seq.rows[0].gamma_n == 0.0);
  CHECK(seq.rows[0].lp_error_se < 1e-6);
  CHECK(seq.rows[1].gamma_n == gamma(plan.schedule, 5));

  // Series mirror the row data.
  const auto& s0 = seq.series[0];
  CHECK(s0.batch == 1);
  CHECK(s0.n == plan.checkpoints);
  CHECK(s0.lp_error[1] == seq.rows[1].lp_error);
  CHECK(s0.trajectory_sup_max >= s0.sup_norm_max.back());
  CHECK(s0.sup_norm_max.front() == plan.theta0.norm());

  // CSV output: exact header, byte-identical across reruns, inf formatting.
  std::filesystem::create_directories(tmp_dir);
  const std::string csv1 = tmp_dir + "/sweep_a.csv";
  const std::string csv2 = tmp_dir + "/sweep_b.csv";
  write_csv(seq, csv1);
  write_csv(par, csv2);
  const std::string body1 = read_file(csv1);
  CHECK(body1 == read_file(csv2));
  const std::string header = body1.substr(0, body1.find('\n'));
  CHECK(header == kCsvHeader);
  CHECK_THAT(body1, Catch::Matchers::ContainsSubstring(",inf,"));
  // First data row: id, M, beta1, beta2 (17 significant digits), n, gamma.
  CHECK_THAT(body1, Catch::Matchers::ContainsSubstring(
                        "unit,1,0.5,0.90000000000000002,0,0,"));

  // Plot files: one per series, two columns wide.
  write_plot_files(seq, tmp_dir);
  CHECK(plot_file_name(64, beta_pair{0.9, 0.999}) ==
        "plot_M64_b10.9_b20.999.dat");
  const std::string plot0 = tmp_dir + "/" + plot_file_name(1, plan.beta_grid[0]);
  REQUIRE(std::filesystem::exists(plot0));
  std::ifstream ps(plot0);
  double a = -1.0, b = -1.0;
  REQUIRE(ps >> a >> b);
  CHECK(a == 0.0);  // checkpoint 0 sentinel
  CHECK(b > 0.0);

  CHECK_THROWS_AS(write_csv(seq, tmp_dir + "/no_such_dir/x.csv"), io_error);
}

TEST_CASE("pathwise audit flags corrupted bounds", "[experiments]") {
  experiment_plan plan = small_plan();
  plan.batch_sizes = {1};

  // Infinite bound: trivially satisfied.
  const auto trivial = audit_pathwise_bound(
      plan, std::numeric_limits<double>::infinity());
  CHECK(trivial.verdict);
  CHECK(trivial.max_ratio == 0.0);

  // Generous finite bound: iterates provably stay far below it.
  const auto ok = audit_pathwise_bound(plan, 1e6);
  CHECK(ok.verdict);
  CHECK(ok.max_ratio > 0.0);
  CHECK(ok.worst_replication >= 0);
  CHECK(ok.worst_sup >= plan.theta0.norm());

  // Corrupted bound below ||theta0||: must fail.
  const auto bad = audit_pathwise_bound(plan, 0.5 * plan.theta0.norm());
  CHECK_FALSE(bad.verdict);
  CHECK(bad.max_ratio >= 2.0);

  CHECK_THROWS_AS(audit_pathwise_bound(plan, 0.0), input_error);
  CHECK_THROWS_AS(
      audit_pathwise_bound(plan, -std::numeric_limits<double>::infinity()),
      input_error);
}

TEST_CASE("uniform-in-beta audit fits the envelope multiplier",
          "[experiments]") {
  experiment_plan plan = small_plan();
  plan.batch_sizes = {2};
  plan.beta_grid = {{0.2, 0.6, false}, {0.5, 0.9, false}, {0.8, 0.9, false}};
  plan.checkpoints = {50};

  const auto audit = audit_uniform_in_beta(plan, 2);
  REQUIRE(audit.rows.size() == 3);
  CHECK(audit.bounded);
  CHECK(audit.sup_max < audit.blow_up_guard);
  double worst = 0.0;
  const double theta0_norm = plan.theta0.norm();
  for (const auto& row : audit.rows) {
    CHECK(row.shape == uniform_bound_rhs(row.beta.beta1, row.beta.beta2,
                                         plan.eps, theta0_norm, 1.0));
    CHECK(row.ratio == row.sup_obs / row.shape);
    CHECK(row.slack >= -1e-12);
    worst = std::max(worst, row.ratio);
    CHECK(row.sup_obs <= audit.c_fit * row.shape + 1e-12);
  }
  CHECK(audit.c_fit == worst);
}

TEST_CASE("batch floor audit on fabricated and real reports", "[experiments]") {
  auto fabricate = [](std::vector<double> errors, std::vector<double> ses) {
    sweep_report rep;
    const std::vector<int> batches{1, 2, 4};
    for (std::size_t i = 0; i < batches.size(); ++i) {
      sweep_series s;
      s.batch = batches[i];
      s.beta = beta_pair{0.5, 0.9};
      s.n = {100};
      s.gamma_n = {0.01};
      s.lp_error = {errors[i]};
      s.lp_error_se = {ses[i]};
      s.sup_norm_max = {1.0};
      rep.series.push_back(s);
    }
    return rep;
  };

  // Decreasing in M: pass.
  auto audit =
      audit_batch_floor(fabricate({0.5, 0.3, 0.2}, {1e-3, 1e-3, 1e-3}), 100);
  CHECK(audit.verdict);
  CHECK(audit.batches == std::vector<int>{1, 2, 4});
  // Flat within the band: pass.
  audit = audit_batch_floor(fabricate({0.3, 0.301, 0.3}, {1e-3, 1e-3, 1e-3}),
                            100);
  CHECK(audit.verdict);
  // Rising beyond the band: fail.
  audit = audit_batch_floor(fabricate({0.2, 0.5, 0.6}, {1e-3, 1e-3, 1e-3}),
                            100);
  CHECK_FALSE(audit.verdict);

  // Missing checkpoint leaves fewer than two batches.
  CHECK_THROWS_AS(
      audit_batch_floor(fabricate({0.5, 0.3, 0.2}, {1e-3, 1e-3, 1e-3}), 999),
      input_error);
  CHECK_THROWS_AS(audit_batch_floor(sweep_report{}, 100), input_error);

  // End-to-end on a real (tiny) plan.
  experiment_plan plan = small_plan();
  plan.checkpoints = {0, 5, 10};
  const auto real = audit_batch_floor(plan, 10, 2);
  CHECK(real.batches == plan.batch_sizes);
  CHECK(real.errors.size() == 2);
}

TEST_CASE("g17 formatting round-trips and handles infinities",
          "[experiments]") {
  CHECK(format_g17(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_g17(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_g17(0.0) == "0");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_g17(x)) == x);  // 17 digits round-trip exactly
}
