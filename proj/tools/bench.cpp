#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "an2cls/bench.hpp"
#include "an2cls/problems.hpp"

namespace {

using namespace an2cls;
using namespace an2cls::bench;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void configure(NamedSolver& s, double eps, double eps2, const Budget& budget,
               const nlohmann::json& overrides) {
  s.config.base.eps = eps;
  s.config.base.max_iterations = budget.max_iterations;
  s.config.base.time_limit_seconds = budget.time_limit_seconds;
  if (s.mode == Mode::second_order) s.config.eps2 = eps2;
  if (overrides.is_null()) return;
  if (overrides.contains("backend"))
    throw ConfigError("'backend' is fixed by the solver name and cannot be overridden");
  if (s.mode == Mode::second_order) {
    nlohmann::json second_order = overrides;
    if (second_order.contains("eps")) {
      if (!second_order.contains("eps1")) second_order["eps1"] = second_order["eps"];
      second_order.erase("eps");
    }
    apply_overrides(s.config, second_order);
    s.config.validate();
  } else {
    nlohmann::json first_order = overrides;
    first_order.erase("eps1");
    first_order.erase("eps2");
    apply_overrides(s.config.base, first_order);
    s.config.base.validate();
  }
}

void print_summary(const std::vector<BenchRow>& rows, const std::vector<ProfileCurve>& curves) {
  for (const auto& c : curves) {
    const Efficiency e = efficiency_metrics(c, rows);
    std::cout << c.solver << ": pi=" << e.pi << " reliability=" << e.reliability_percent
              << "%\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AN2CLS benchmark harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a solver x problem matrix");
  std::string suite = "small";
  std::string solver_list = "an2cls-e,an2cls-k,soan2cls";
  double eps = 1e-6;
  double eps2 = 1e-3;
  long max_iter = 5000;
  double time_limit = 3600.0;
  std::string cost = "iterations";
  std::string out_dir;
  std::string config_file;
  unsigned jobs = 1;
  run->add_option("--suite", suite, "problem suite")
      ->check(CLI::IsMember({"small", "medium", "large"}));
  run->add_option("--solvers", solver_list, "comma-separated solver names");
  run->add_option("--eps", eps, "gradient tolerance (eps1 for soan2cls)");
  run->add_option("--eps2", eps2, "curvature tolerance for soan2cls");
  run->add_option("--max-iter", max_iter, "iteration budget per run");
  run->add_option("--time-limit", time_limit, "wall-clock budget per run, seconds");
  run->add_option("--cost", cost, "profile cost metric")
      ->check(CLI::IsMember({"iterations", "evaluations", "time"}));
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--config", config_file, "JSON or key=value overrides");
  run->add_option("--jobs", jobs, "concurrent runs");

  auto* profile = app.add_subcommand("profile", "recompute profiles from rows.csv");
  std::string rows_file;
  std::string profile_out;
  std::string profile_cost = "iterations";
  profile->add_option("--rows", rows_file, "rows.csv from a previous run")->required();
  profile->add_option("--out", profile_out, "output directory")->required();
  profile->add_option("--cost", profile_cost, "profile cost metric")
      ->check(CLI::IsMember({"iterations", "evaluations", "time"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const Budget budget{max_iter, time_limit};
      nlohmann::json overrides;
      if (!config_file.empty()) overrides = load_config_document(config_file);
      std::vector<NamedSolver> solvers;
      for (const auto& name : split_list(solver_list)) {
        NamedSolver s = make_solver(name);
        configure(s, eps, eps2, budget, overrides);
        solvers.push_back(std::move(s));
      }
      const std::vector<Problem> problems = problems::builtin_suite(problems::parse_scale(suite));
      const auto rows = run_matrix(problems, solvers, budget, jobs);
      const CostMetric metric = parse_cost(cost);
      const auto curves = performance_profile(rows, metric);
      emit_outputs(rows, curves, out_dir, metric);
      for (const auto& r : rows)
        std::cout << r.solver << ' ' << r.problem << ' ' << r.status << " it=" << r.iterations
                  << " |g|=" << r.final_grad_norm << '\n';
      print_summary(rows, curves);
    } else {
      std::ifstream in(rows_file);
      if (!in) throw std::runtime_error("cannot open " + rows_file);
      const auto rows = read_rows_csv(in);
      const CostMetric metric = parse_cost(profile_cost);
      const auto curves = performance_profile(rows, metric);
      emit_outputs(rows, curves, profile_out, metric);
      print_summary(rows, curves);
    }
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
