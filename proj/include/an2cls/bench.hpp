#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "an2cls/config.hpp"
#include "an2cls/problem.hpp"
#include "an2cls/solver.hpp"

namespace an2cls::bench {

/// One (solver, problem) run.
struct BenchRow {
  std::string solver;
  std::string problem;
  long dimension = 0;
  std::string status;
  long iterations = 0;
  long successful_iterations = 0;
  long f_evals = 0;
  long g_evals = 0;
  long h_evals = 0;
  long hv_evals = 0;
  double wall_seconds = 0.0;
  double final_grad_norm = 0.0;
  long negcurv_steps = 0;
  std::optional<double> avg_krylov_dim;

  bool converged() const { return status == "converged"; }
  bool operator==(const BenchRow&) const = default;
};

/// Row status for runs the harness could not start (exact backend above the
/// dense Hessian cap).
inline constexpr std::string_view kUnsupported = "unsupported";

enum class Mode { first_order, second_order };

struct NamedSolver {
  std::string name;
  Mode mode = Mode::first_order;
  SOConfig config;  // first-order solvers use config.base
};

/// Built-in solver names: an2cls-e (exact), an2cls-k (Krylov), soan2cls.
inline NamedSolver make_solver(std::string_view name) {
  NamedSolver s;
  s.name = std::string(name);
  if (name == "an2cls-e") {
    s.config.base = default_config(Backend::exact);
  } else if (name == "an2cls-k") {
    s.config.base = default_config(Backend::krylov);
  } else if (name == "soan2cls") {
    s.mode = Mode::second_order;
    s.config.base = default_config(Backend::exact);
  } else {
    throw ConfigError("unknown solver '" + std::string(name) + "'");
  }
  return s;
}

struct Budget {
  long max_iterations = 5000;
  double time_limit_seconds = 3600.0;
};

inline BenchRow run_one(const Problem& problem, const NamedSolver& solver,
                        const Budget& budget) {
  BenchRow row;
  row.solver = solver.name;
  row.problem = problem.name();
  row.dimension = static_cast<long>(problem.dimension());

  SOConfig config = solver.config;
  config.base.max_iterations = budget.max_iterations;
  config.base.time_limit_seconds = budget.time_limit_seconds;

  if (config.base.backend == Backend::exact && !problem.has_dense_hessian()) {
    row.status = std::string(kUnsupported);
    try {
      row.final_grad_norm = problem.gradient(problem.initial_point()).norm();
    } catch (const EvaluationError&) {
      row.final_grad_norm = std::numeric_limits<double>::infinity();
    }
    return row;
  }

  const SolveResult result = solver.mode == Mode::second_order
                                 ? solve_so(problem, config)
                                 : solve(problem, config.base);
  row.status = std::string(to_string(result.status));
  row.iterations = result.iterations();
  row.successful_iterations = result.successful_iterations();
  row.f_evals = result.evals.f;
  row.g_evals = result.evals.g;
  row.h_evals = result.evals.H;
  row.hv_evals = result.evals.hess_vec;
  row.wall_seconds = result.wall_seconds;
  row.final_grad_norm = result.grad_norm;
  row.negcurv_steps =
      result.count(StepKind::negative_curvature) + result.count(StepKind::second_order);
  double dims = 0.0;
  long with_dim = 0;
  for (const auto& r : result.trace) {
    if (r.krylov_dim) {
      dims += static_cast<double>(*r.krylov_dim);
      ++with_dim;
    }
  }
  if (with_dim > 0) row.avg_krylov_dim = dims / static_cast<double>(with_dim);
  return row;
}

/// Runs every solver on every problem. Rows are ordered solver-major and the
/// matrix never aborts on a failing run.
inline std::vector<BenchRow> run_matrix(const std::vector<Problem>& problems,
                                        const std::vector<NamedSolver>& solvers,
                                        const Budget& budget, unsigned jobs = 1) {
  if (problems.empty() || solvers.empty())
    throw ConfigError("run_matrix: need at least one problem and one solver");
  const std::size_t total = problems.size() * solvers.size();
  std::vector<BenchRow> rows(total);
  auto run_cell = [&](std::size_t idx) {
    const NamedSolver& s = solvers[idx / problems.size()];
    const Problem& p = problems[idx % problems.size()];
    try {
      rows[idx] = run_one(p, s, budget);
    } catch (const std::exception&) {
      BenchRow row;
      row.solver = s.name;
      row.problem = p.name();
      row.dimension = static_cast<long>(p.dimension());
      row.status = "numerical-failure";
      row.final_grad_norm = std::numeric_limits<double>::infinity();
      rows[idx] = row;
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(total)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < total; ++i) run_cell(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < total; i = next++) run_cell(i);
    });
  for (auto& th : pool) th.join();
  return rows;
}

// ---- performance profiles --------------------------------------------------

enum class CostMetric { iterations, evaluations, time };

inline CostMetric parse_cost(std::string_view s) {
  if (s == "iterations") return CostMetric::iterations;
  if (s == "evaluations") return CostMetric::evaluations;
  if (s == "time") return CostMetric::time;
  throw ConfigError("unknown cost metric '" + std::string(s) + "'");
}

inline std::string_view to_string(CostMetric m) {
  switch (m) {
    case CostMetric::iterations:
      return "iterations";
    case CostMetric::evaluations:
      return "evaluations";
    case CostMetric::time:
      return "time";
  }
  return "?";
}

/// Costs are floored (1 for counts, 1 microsecond for time) so that runs
/// converging at x0 still give finite ratios.
inline double row_cost(const BenchRow& r, CostMetric m) {
  switch (m) {
    case CostMetric::iterations:
      return std::max(1.0, static_cast<double>(r.iterations));
    case CostMetric::evaluations:
      return std::max(1.0, static_cast<double>(r.f_evals + r.g_evals + r.h_evals +
                                               r.hv_evals));
    case CostMetric::time:
      return std::max(1e-6, r.wall_seconds);
  }
  return 1.0;
}

struct ProfileCurve {
  std::string solver;
  std::vector<double> ratios;  // one per problem, +inf for failed runs
  std::vector<double> tau;     // sample abscissae, increasing, starting at 1
  std::vector<double> rho;     // fraction of problems with ratio <= tau

  double value_at(double t) const {
    if (ratios.empty()) return 0.0;
    const auto hits = std::count_if(ratios.begin(), ratios.end(),
                                    [t](double r) { return r <= t; });
    return static_cast<double>(hits) / static_cast<double>(ratios.size());
  }
};

/// Dolan-More profiles. For each problem the ratio is cost / (best cost among
/// converged solvers); failed runs get +inf, and problems no solver converged
/// on count in every denominator but in no numerator.
inline std::vector<ProfileCurve> performance_profile(const std::vector<BenchRow>& rows,
                                                     CostMetric metric) {
  if (rows.empty()) throw ConfigError("performance_profile: no rows");
  std::vector<std::string> solvers;
  std::vector<std::string> problems;
  for (const auto& r : rows) {
    if (std::find(solvers.begin(), solvers.end(), r.solver) == solvers.end())
      solvers.push_back(r.solver);
    if (std::find(problems.begin(), problems.end(), r.problem) == problems.end())
      problems.push_back(r.problem);
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::map<std::pair<std::string, std::string>, double> cost;
  std::map<std::string, double> best;
  for (const auto& p : problems) best[p] = inf;
  for (const auto& r : rows) {
    const double c = r.converged() ? row_cost(r, metric) : inf;
    cost[{r.solver, r.problem}] = c;
    best[r.problem] = std::min(best[r.problem], c);
  }

  std::vector<ProfileCurve> curves;
  double tau_max = 10.0;
  for (const auto& s : solvers) {
    ProfileCurve curve;
    curve.solver = s;
    for (const auto& p : problems) {
      const auto it = cost.find({s, p});
      const double c = it == cost.end() ? inf : it->second;
      const double ratio = std::isfinite(c) ? c / best[p] : inf;
      curve.ratios.push_back(ratio);
      if (std::isfinite(ratio)) tau_max = std::max(tau_max, ratio);
    }
    curves.push_back(std::move(curve));
  }

  std::vector<double> taus;
  for (int i = 1; i <= 10; ++i) taus.push_back(static_cast<double>(i));
  for (const auto& c : curves)
    for (double r : c.ratios)
      if (std::isfinite(r)) taus.push_back(r);
  taus.push_back(tau_max);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  for (auto& c : curves) {
    c.tau = taus;
    c.rho.reserve(taus.size());
    for (double t : taus) c.rho.push_back(c.value_at(t));
  }
  return curves;
}

struct Efficiency {
  double pi = 0.0;                   // mean of the profile at tau = 1..10
  double reliability_percent = 0.0;  // converged runs / all runs, in percent
};

inline constexpr std::string_view kPiConvention =
    "pi = mean of the performance profile sampled at tau = 1, 2, ..., 10";

inline Efficiency efficiency_metrics(const ProfileCurve& curve,
                                     const std::vector<BenchRow>& rows) {
  Efficiency e;
  for (int i = 1; i <= 10; ++i) e.pi += curve.value_at(static_cast<double>(i));
  e.pi /= 10.0;
  long total = 0;
  long ok = 0;
  for (const auto& r : rows) {
    if (r.solver != curve.solver) continue;
    ++total;
    ok += r.converged() ? 1 : 0;
  }
  e.reliability_percent = total > 0 ? 100.0 * static_cast<double>(ok) / total : 0.0;
  return e;
}

// ---- persistence -------------------------------------------------------------

inline constexpr std::string_view kRowsHeader =
    "solver,problem,dimension,status,iterations,successful_iterations,f_evals,"
    "g_evals,h_evals,hv_evals,wall_seconds,final_grad_norm,negcurv_steps,"
    "avg_krylov_dim";

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw ConfigError("bad number '" + s + "' in rows.csv");
  return v;
}

inline long parse_long(const std::string& s) {
  std::size_t used = 0;
  const long v = std::stol(s, &used);
  if (used != s.size()) throw ConfigError("bad integer '" + s + "' in rows.csv");
  return v;
}

}  // namespace detail

inline void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kRowsHeader << '\n';
  for (const auto& r : rows) {
    if (r.solver.find(',') != std::string::npos || r.problem.find(',') != std::string::npos)
      throw ConfigError("names in rows.csv cannot contain commas");
    out << r.solver << ',' << r.problem << ',' << r.dimension << ',' << r.status << ','
        << r.iterations << ',' << r.successful_iterations << ',' << r.f_evals << ','
        << r.g_evals << ',' << r.h_evals << ',' << r.hv_evals << ','
        << detail::format_double(r.wall_seconds) << ','
        << detail::format_double(r.final_grad_norm) << ',' << r.negcurv_steps << ','
        << (r.avg_krylov_dim ? detail::format_double(*r.avg_krylov_dim) : "") << '\n';
  }
}

inline std::vector<BenchRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRowsHeader)
    throw ConfigError("rows.csv: missing or unexpected header");
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 14) throw ConfigError("rows.csv: expected 14 fields");
    BenchRow r;
    r.solver = f[0];
    r.problem = f[1];
    r.dimension = detail::parse_long(f[2]);
    r.status = f[3];
    r.iterations = detail::parse_long(f[4]);
    r.successful_iterations = detail::parse_long(f[5]);
    r.f_evals = detail::parse_long(f[6]);
    r.g_evals = detail::parse_long(f[7]);
    r.h_evals = detail::parse_long(f[8]);
    r.hv_evals = detail::parse_long(f[9]);
    r.wall_seconds = detail::parse_double(f[10]);
    r.final_grad_norm = detail::parse_double(f[11]);
    r.negcurv_steps = detail::parse_long(f[12]);
    if (!f[13].empty()) r.avg_krylov_dim = detail::parse_double(f[13]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void write_profiles_csv(std::ostream& out, const std::vector<ProfileCurve>& curves) {
  out << "solver,tau,rho\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.tau.size(); ++i)
      out << c.solver << ',' << detail::format_double(c.tau[i]) << ','
          << detail::format_double(c.rho[i]) << '\n';
}

/// Step plot of the profiles on a log2 tau axis.
inline void write_profile_svg(std::ostream& out, const std::vector<ProfileCurve>& curves,
                              std::string_view title) {
  constexpr double W = 640, H = 420, L = 60, R = 160, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  double log_max = 1.0;
  for (const auto& c : curves)
    if (!c.tau.empty()) log_max = std::max(log_max, std::log2(c.tau.back()));
  auto px = [&](double tau) { return L + pw * std::log2(tau) / log_max; };
  auto py = [&](double rho) { return T + ph * (1.0 - rho); };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                            "#9467bd", "#ff7f0e", "#8c564b"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double rho = 0.25 * i;
    out << "<text x=\"" << L - 8 << "\" y=\"" << py(rho) + 4
        << "\" text-anchor=\"end\">" << rho << "</text>\n";
  }
  const int ticks = static_cast<int>(std::ceil(log_max));
  for (int i = 0; i <= ticks; ++i) {
    const double x = L + pw * i / log_max;
    if (x > L + pw + 1e-9) break;
    out << "<text x=\"" << x << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">"
        << (1 << i) << "</text>\n";
  }
  out << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">tau (log2 scale)</text>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* color = kColors[k % std::size(kColors)];
    std::ostringstream pts;
    double prev = c.rho.empty() ? 0.0 : c.rho.front();
    pts << px(1.0) << ',' << py(prev);
    for (std::size_t i = 0; i < c.tau.size(); ++i) {
      pts << ' ' << px(c.tau[i]) << ',' << py(prev);
      pts << ' ' << px(c.tau[i]) << ',' << py(c.rho[i]);
      prev = c.rho[i];
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
        << pts.str() << "\"/>\n";
    const double ly = T + 16 + 18.0 * k;
    out << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 36
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << L + pw + 42 << "\" y=\"" << ly + 4 << "\">" << c.solver
        << "</text>\n";
  }
  out << "</svg>\n";
}

/// Writes rows.csv, profiles.csv, profile.svg and summary.json into out_dir.
inline void emit_outputs(const std::vector<BenchRow>& rows,
                         const std::vector<ProfileCurve>& curves,
                         const std::filesystem::path& out_dir, CostMetric metric) {
  std::filesystem::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
    return f;
  };
  {
    auto f = open("rows.csv");
    write_rows_csv(f, rows);
  }
  {
    auto f = open("profiles.csv");
    write_profiles_csv(f, curves);
  }
  {
    auto f = open("profile.svg");
    write_profile_svg(f, curves,
                      "Performance profile (" + std::string(to_string(metric)) + ")");
  }
  nlohmann::json summary;
  summary["cost_metric"] = std::string(to_string(metric));
  summary["pi_convention"] = std::string(kPiConvention);
  for (const auto& c : curves) {
    const Efficiency e = efficiency_metrics(c, rows);
    summary["solvers"][c.solver] = {{"pi", e.pi}, {"reliability_percent", e.reliability_percent}};
  }
  auto f = open("summary.json");
  f << summary.dump(2) << '\n';
  if (!f) throw std::runtime_error("failed writing outputs in " + out_dir.string());
}

}  // namespace an2cls::bench
