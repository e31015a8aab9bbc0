#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "adamcert/bounds.hpp"
#include "adamcert/config.hpp"
#include "adamcert/errors.hpp"
#include "adamcert/experiments.hpp"
#include "adamcert/schedule.hpp"

namespace adamcert {

namespace detail {

inline json ladder_json(const bound_inputs& in, const bound_constants& c) {
  json out;
  out["beta1"] = in.alpha;
  out["beta2"] = in.beta;
  out["eta"] = c.eta;
  out["big_gamma"] = c.big_gamma;
  out["n_threshold"] = c.n_threshold;
  out["n_frak"] = c.n_frak;
  out["delta"] = c.delta;
  out["chi"] = c.chi;
  out["a1"] = c.a1;
  out["a2"] = c.a2;
  out["a3"] = c.a3;
  out["a4"] = c.a4;
  out["a5"] = c.a5;
  out["a6"] = c.a6;
  out["a5_exponent"] = c.a5_exponent;
  out["big_a"] = c.big_a;
  out["bound_b"] = c.bound_b;
  return out;
}

inline void print_ladder(std::ostream& os, const bound_inputs& in,
                         const bound_constants& c) {
  os << "beta1 = " << format_g17(in.alpha)
     << "  beta2 = " << format_g17(in.beta) << "\n"
     << "  eta          = " << format_g17(c.eta) << "\n"
     << "  big_gamma    = " << format_g17(c.big_gamma) << "\n"
     << "  n_threshold  = " << c.n_threshold << "\n"
     << "  n_frak       = " << c.n_frak << "\n"
     << "  delta        = " << format_g17(c.delta) << "\n"
     << "  chi          = " << format_g17(c.chi) << "\n"
     << "  a1           = " << format_g17(c.a1) << "\n"
     << "  a2           = " << format_g17(c.a2) << "\n"
     << "  a3           = " << format_g17(c.a3) << "\n"
     << "  a4           = " << format_g17(c.a4) << "\n"
     << "  a5           = " << format_g17(c.a5) << "\n"
     << "  a6           = " << format_g17(c.a6) << "\n"
     << "  a5_exponent  = " << format_g17(c.a5_exponent) << "\n"
     << "  big_a        = " << format_g17(c.big_a) << "\n"
     << "  bound_b      = " << format_g17(c.bound_b) << "\n";
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const std::string& out_dir,
                   int parallel, bool as_json) {
  const experiment_plan plan = load_config(config_path);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory " + out_dir);

  const sweep_report report = run_sweep(plan, parallel);
  write_csv(report, out_dir + "/results.csv");
  write_plot_files(report, out_dir);

  if (as_json) {
    json sum;
    sum["experiment_id"] = plan.experiment_id;
    sum["rows"] = report.rows.size();
    sum["kappa"] = report.constants.kappa;
    sum["big_k"] = report.constants.big_k;
    sum["tau1"] = report.constants.tau1;
    sum["tau2"] = report.constants.tau2;
    sum["c_data"] = report.constants.c_data;
    sum["rho"] = report.constants.rho;
    json series = json::array();
    for (const auto& s : report.series) {
      json e;
      e["M"] = s.batch;
      e["beta1"] = s.beta.beta1;
      e["beta2"] = s.beta.beta2;
      e["final_lp_error"] = s.lp_error.back();
      e["final_lp_error_stderr"] = s.lp_error_se.back();
      e["sup_norm_max"] = s.trajectory_sup_max;
      e["bound_b"] = std::isinf(s.bound_b) ? json("inf") : json(s.bound_b);
      series.push_back(e);
    }
    sum["series"] = series;
    std::cout << sum.dump(2) << "\n";
  } else {
    std::cout << "experiment " << plan.experiment_id << ": "
              << report.rows.size() << " rows -> " << out_dir
              << "/results.csv\n";
    std::cout << "constants: kappa = " << format_g17(report.constants.kappa)
              << ", K = " << format_g17(report.constants.big_k)
              << ", tau2 = " << format_g17(report.constants.tau2)
              << ", c = " << format_g17(report.constants.c_data)
              << ", rho = " << format_g17(report.constants.rho) << "\n";
    std::printf("%6s %8s %8s %12s %12s %12s\n", "M", "beta1", "beta2",
                "lp_error", "sup_norm", "bound_b");
    for (const auto& s : report.series)
      std::printf("%6d %8g %8g %12.5g %12.5g %12.5g\n", s.batch, s.beta.beta1,
                  s.beta.beta2, s.lp_error.back(), s.trajectory_sup_max,
                  s.bound_b);
  }
  return 0;
}

inline int cmd_bounds(const std::string& config_path, bool as_json) {
  const experiment_plan plan = load_config(config_path);
  const problem_constants pc =
      certify_constants(plan.prob, plan.data, plan.probe_count);
  json all = json::array();
  for (const auto& beta : plan.beta_grid) {
    const bound_inputs in = bound_inputs_for(plan, pc, beta);
    const bound_constants c = compute_constants(in);
    if (as_json) {
      all.push_back(detail::ladder_json(in, c));
    } else {
      detail::print_ladder(std::cout, in, c);
    }
  }
  if (as_json) std::cout << all.dump(2) << "\n";
  return 0;
}

inline int cmd_validate_schedule(const polynomial_schedule& sched,
                                 double p_moment, bool as_json) {
  const schedule_verdict v = validate_schedule(sched, p_moment);
  if (as_json) {
    json out;
    out["gamma1"] = sched.gamma1;
    out["exponent"] = sched.exponent;
    out["p_moment"] = p_moment;
    out["step_ratio_ok"] = v.step_ratio_ok;
    out["tail_ok"] = v.tail_ok;
    out["accept"] = v.accept;
    out["probe_n"] = v.probe_n;
    out["step_ratio_proxy"] = v.step_ratio_proxy;
    out["tail_proxy"] = v.tail_proxy;
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << "schedule: polynomial gamma1 = " << format_g17(sched.gamma1)
              << " exponent = " << format_g17(sched.exponent)
              << " p_moment = " << format_g17(p_moment) << "\n";
    std::cout << "step-ratio condition: "
              << (v.step_ratio_ok ? "ok" : "violated") << " (proxies";
    for (std::size_t i = 0; i < v.probe_n.size(); ++i)
      std::cout << " n=" << v.probe_n[i] << ": "
                << format_g17(v.step_ratio_proxy[i]);
    std::cout << ")\n";
    std::cout << "tail condition: " << (v.tail_ok ? "ok" : "violated")
              << " (tail bounds";
    for (std::size_t i = 0; i < v.probe_n.size(); ++i)
      std::cout << " n=" << v.probe_n[i] << ": "
                << format_g17(v.tail_proxy[i]);
    std::cout << ")\n";
    std::cout << "verdict: " << (v.accept ? "accept" : "reject") << "\n";
  }
  return 0;
}

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Mini-batch adaptive-moment trajectories on strongly convex "
               "stochastic problems: certified bounds, sweeps, and audits"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "./out";
  int parallel = static_cast<int>(std::thread::hardware_concurrency());
  if (parallel < 1) parallel = 1;
  bool as_json = false;

  auto* run = app.add_subcommand("run", "execute a sweep plan from a config");
  run->add_option("--config", config_path, "config file (JSON)")->required();
  run->add_option("--out-dir", out_dir, "output directory");
  run->add_option("--parallel", parallel, "worker thread count");
  run->add_flag("--json", as_json, "machine-readable summary");
  auto* sweep = app.add_subcommand("sweep", "alias of run");
  sweep->add_option("--config", config_path, "config file (JSON)")->required();
  sweep->add_option("--out-dir", out_dir, "output directory");
  sweep->add_option("--parallel", parallel, "worker thread count");
  sweep->add_flag("--json", as_json, "machine-readable summary");

  auto* bounds = app.add_subcommand("bounds", "print the constant ladder");
  bounds->add_option("--config", config_path, "config file (JSON)")->required();
  bounds->add_flag("--json", as_json, "machine-readable output");

  auto* vsched =
      app.add_subcommand("validate-schedule", "check schedule admissibility");
  std::string family = "polynomial";
  double gamma1 = 0.1, exponent = 2.0 / 3.0, p_moment = 2.0;
  vsched->add_option("--config", config_path,
                     "read schedule and p_moment from a config file");
  vsched->add_option("--family", family, "schedule family");
  vsched->add_option("--gamma1", gamma1, "first step size");
  vsched->add_option("--exponent", exponent, "decay exponent");
  vsched->add_option("--p-moment", p_moment, "moment exponent p");
  vsched->add_flag("--json", as_json, "machine-readable output");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : kExitValidation;
    }
    if (run->parsed() || sweep->parsed())
      return cmd_run(config_path, out_dir, parallel, as_json);
    if (bounds->parsed()) return cmd_bounds(config_path, as_json);
    if (vsched->parsed()) {
      if (family != "polynomial")
        throw input_error("validate-schedule: unknown family " + family);
      polynomial_schedule sched;
      if (!config_path.empty()) {
        const experiment_plan plan = load_config(config_path);
        sched = plan.schedule;
        p_moment = plan.p_moment;
      } else {
        sched.gamma1 = gamma1;
        sched.exponent = exponent;
      }
      return cmd_validate_schedule(sched, p_moment, as_json);
    }
    return kExitValidation;
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace adamcert
