#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "an2cls/config.hpp"
#include "an2cls/linalg.hpp"
#include "an2cls/problem.hpp"
#include "an2cls/step.hpp"
#include "an2cls/stepcomp_exact.hpp"
#include "an2cls/stepcomp_krylov.hpp"

namespace an2cls {

enum class SolveStatus { converged, iteration_limit, time_limit, numerical_failure };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged:
      return "converged";
    case SolveStatus::iteration_limit:
      return "iteration-limit";
    case SolveStatus::time_limit:
      return "time-limit";
    case SolveStatus::numerical_failure:
      return "numerical-failure";
  }
  return "?";
}

/// Why an iteration was rejected.
enum class RejectReason {
  none,
  gradient_growth,  // Newton step: gradient did not halve and the step was short
  low_ratio,        // rho < eta1
  gradient_bound,   // gradient at the trial point too large
  nonfinite,        // f or g not finite at the trial point
};

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::none:
      return "none";
    case RejectReason::gradient_growth:
      return "gradient-growth";
    case RejectReason::low_ratio:
      return "low-ratio";
    case RejectReason::gradient_bound:
      return "gradient-bound";
    case RejectReason::nonfinite:
      return "nonfinite";
  }
  return "?";
}

struct EvalCounters {
  long f = 0;
  long g = 0;
  long H = 0;
  long hess_vec = 0;

  long total() const { return f + g + H + hess_vec; }
  EvalCounters operator-(const EvalCounters& o) const {
    return {f - o.f, g - o.g, H - o.H, hess_vec - o.hess_vec};
  }
};

struct IterationRecord {
  long k = 0;
  bool accepted = false;
  StepKind kind = StepKind::newton;
  double sigma = 0.0;
  double mu = 0.0;
  std::optional<double> rho;  // absent when rejected before the ratio test
  double grad_norm = 0.0;     // algorithmic (M-dual) norm of g_k
  double f = 0.0;
  double step_norm = 0.0;     // M-primal norm of the trial step
  std::optional<double> kappa;
  bool reject = false;
  RejectReason reason = RejectReason::none;
  std::optional<double> model_value;  // g's + s'Hs/2
  std::optional<double> trial_grad_norm;
  std::optional<double> lambda_min;   // second-order iterations only
  std::optional<Eigen::Index> krylov_dim;
  EvalCounters evals;
};

struct SolveResult {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;  // Euclidean
  SolveStatus status = SolveStatus::numerical_failure;
  std::string message;
  std::vector<IterationRecord> trace;
  EvalCounters evals;
  double wall_seconds = 0.0;

  long iterations() const { return static_cast<long>(trace.size()); }
  long successful_iterations() const {
    long n = 0;
    for (const auto& r : trace) n += r.accepted ? 1 : 0;
    return n;
  }
  long count(StepKind kind) const {
    long n = 0;
    for (const auto& r : trace) n += r.kind == kind ? 1 : 0;
    return n;
  }
};

/// rho = (f_k - f_trial) / (-q), q = g's + s'Hs/2. A non-negative model value
/// means the step failed to decrease the model, which the step construction
/// rules out; it is reported as a numerical failure.
inline double compute_rho(double f_k, double f_trial, double model_value) {
  if (!(model_value < 0.0))
    throw ModelDecreaseViolation("model value " + std::to_string(model_value) +
                                 " is not negative");
  return (f_k - f_trial) / (-model_value);
}

/// Lower-endpoint sigma update: very successful steps shrink sigma by gamma1
/// (never below sigma_min), successful steps keep it, rejections grow it by
/// gamma2.
inline double update_sigma(double sigma, std::optional<double> rho, bool reject,
                           const SolverConfig& config) {
  if (reject) return config.gamma2 * sigma;
  if (rho && *rho >= config.eta2) return std::max(config.sigma_min, config.gamma1 * sigma);
  return sigma;
}

/// Gradient-growth allowance kappa_k for the step kind.
inline double kappa_k(StepKind kind, double mu, double sigma, const SolverConfig& c) {
  switch (kind) {
    case StepKind::newton:
      return c.kappa_upnewt();
    case StepKind::negative_curvature:
      return 1.5 * c.kappa_C * c.kappa_C * c.theta * c.theta * (1.0 - c.eta2) + 1.0 +
             c.kappa_C * mu / std::sqrt(sigma);
    case StepKind::second_order:
      break;
  }
  throw ContractViolation("kappa_k: second-order steps use kappa_hess");
}

/// Gradient bound for second-order steps.
inline double kappa_hess(double lambda_min, double sigma, const SolverConfig& c) {
  const double a = std::abs(lambda_min);
  return 3.0 * (1.0 - c.eta2) * a / (2.0 * std::sqrt(c.sigma_min)) + 1.0 +
         a / std::sqrt(sigma);
}

struct SecondOrderStep {
  Vector step;
  double kappa_hess = 0.0;
  double lambda_min = 0.0;
};

/// Step along the exact minimum eigenvector, length 1/sqrt(sigma), oriented
/// so that g's <= 0.
inline SecondOrderStep so_step(const Vector& g, const Matrix& H, double sigma,
                               const SOConfig& config,
                               std::optional<EigenPair> min_pair = {}) {
  if (g.norm() > config.eps1())
    throw ContractViolation("so_step: gradient norm above eps1");
  const EigenPair eig = min_pair ? *min_pair : sym_eig_min(H);
  if (eig.value >= -config.eps2)
    throw ContractViolation("so_step: lambda_min >= -eps2, the caller should terminate");
  Vector u = eig.vector.normalized();
  if (g.dot(u) > 0.0) u = -u;
  return {u / std::sqrt(sigma), kappa_hess(eig.value, sigma, config.base), eig.value};
}

/// A trial step as computed, before any acceptance test.
struct TrialStep {
  long k = 0;
  StepKind kind = StepKind::newton;
  double sigma = 0.0;
  double mu = 0.0;
  const Vector& x;
  const Vector& g;
  const Vector& s;
  const StepOutcome* outcome = nullptr;  // null for second-order steps
};

using TrialObserver = std::function<void(const TrialStep&)>;

namespace detail {

/// Shared iteration state for the first- and second-order drivers.
class Driver {
 public:
  Driver(const Problem& problem, const SolverConfig& config, TrialObserver observer = {})
      : problem_(problem), config_(config), observer_(std::move(observer)),
        start_(Clock::now()) {
    config_.preconditioner.check(problem.dimension());
    if (config_.backend == Backend::exact && !problem.has_dense_hessian())
      throw ContractViolation("exact backend needs a dense Hessian; '" +
                              problem.name() + "' exceeds the dense cap");
    x_ = problem.initial_point();
    f_ = eval_f(x_);
    g_ = eval_g(x_);
    const double g0 = alg_norm(g_);
    sigma_ = config_.sigma_min;
    if (config_.sigma0) {
      sigma_ = *config_.sigma0;
    } else if (g0 > 0.0 && std::isfinite(1.0 / g0)) {
      sigma_ = std::max(config_.sigma_min, 1.0 / g0);
    }
  }

  const Vector& x() const { return x_; }
  const Vector& g() const { return g_; }
  double f() const { return f_; }
  double sigma() const { return sigma_; }
  double grad_norm() const { return g_.norm(); }
  const EvalCounters& counters() const { return counters_; }
  double elapsed() const {
    return std::chrono::duration<double>(Clock::now() - start_).count();
  }

  /// Iteration/time budget check; returns a status when exhausted.
  std::optional<SolveStatus> budget_exhausted(long k) const {
    if (k >= config_.max_iterations) return SolveStatus::iteration_limit;
    if (elapsed() > config_.time_limit_seconds) return SolveStatus::time_limit;
    return std::nullopt;
  }

  Matrix eval_H() {
    ++counters_.H;
    return problem_.hessian(x_);
  }

  /// Steps 2 to 7 of the first-order iteration at the current point.
  /// `H` may be passed in when already evaluated (second-order driver).
  IterationRecord first_order_iteration(long k, double eps,
                                        std::optional<Matrix> H = {}) {
    const EvalCounters before = counters_;
    IterationRecord rec = begin_record(k);

    const bool dense = config_.backend == Backend::exact;
    if (dense && !H) H = eval_H();
    auto hv_at_x = [this](const Vector& v) -> Vector {
      ++counters_.hess_vec;
      return problem_.hess_vec(x_, v);
    };

    StepOutcome out;
    if (dense) {
      out = stepcomp_exact_preconditioned(g_, *H, sigma_, config_.kappa_C, config_.theta,
                                          config_.preconditioner);
    } else {
      out = stepcomp_krylov_preconditioned(g_, hv_at_x, sigma_, config_.kappa_C,
                                           config_.kappa_theta, config_.theta,
                                           config_.krylov_max_dim, config_.preconditioner);
      rec.krylov_dim = out.krylov ? std::optional(out.krylov->dim) : std::nullopt;
    }
    rec.kind = out.kind;
    rec.mu = out.mu;
    const Vector& s = out.step;
    if (observer_) observer_({k, out.kind, sigma_, out.mu, x_, g_, s, &out});
    rec.step_norm = config_.preconditioner.primal_norm(s);
    const double gnorm = rec.grad_norm;
    const Vector trial = x_ + s;

    std::optional<Vector> g_trial;
    auto trial_gradient = [&]() -> bool {
      try {
        g_trial = eval_g(trial);
        rec.trial_grad_norm = alg_norm(*g_trial);
        return true;
      } catch (const EvaluationError&) {
        return false;
      }
    };

    if (out.kind == StepKind::newton) {
      if (!trial_gradient()) return reject(rec, RejectReason::nonfinite, before);
      if (*rec.trial_grad_norm > 0.5 * gnorm &&
          rec.step_norm < 1.0 / (std::sqrt(sigma_) * config_.kappa_slow()))
        return reject(rec, RejectReason::gradient_growth, before);
    }
    rec.kappa = kappa_k(out.kind, out.mu, sigma_, config_);

    const Vector Hs = dense ? Vector(*H * s) : hv_at_x(s);
    rec.model_value = g_.dot(s) + 0.5 * s.dot(Hs);
    double f_trial = 0.0;
    try {
      f_trial = eval_f(trial);
    } catch (const EvaluationError&) {
      return reject(rec, RejectReason::nonfinite, before);
    }
    rec.rho = compute_rho(f_, f_trial, *rec.model_value);
    if (*rec.rho < config_.eta1) return reject(rec, RejectReason::low_ratio, before);
    if (!g_trial && !trial_gradient()) return reject(rec, RejectReason::nonfinite, before);
    if (*rec.trial_grad_norm > *rec.kappa * gnorm / eps)
      return reject(rec, RejectReason::gradient_bound, before);

    return accept(rec, trial, f_trial, std::move(*g_trial), before);
  }

  /// Second-order iteration at a point with ||g|| <= eps1 and
  /// lambda_min(H) < -eps2.
  IterationRecord second_order_iteration(long k, const Matrix& H, const EigenPair& eig,
                                         const SOConfig& so) {
    const EvalCounters before = counters_;
    IterationRecord rec = begin_record(k);
    rec.kind = StepKind::second_order;
    rec.mu = std::max(0.0, -eig.value);
    rec.lambda_min = eig.value;

    const SecondOrderStep step = so_step(g_, H, sigma_, so, eig);
    const Vector& s = step.step;
    if (observer_) observer_({k, StepKind::second_order, sigma_, rec.mu, x_, g_, s, nullptr});
    rec.step_norm = s.norm();
    rec.kappa = step.kappa_hess;
    rec.model_value = g_.dot(s) + 0.5 * s.dot(H * s);
    const Vector trial = x_ + s;
    double f_trial = 0.0;
    Vector g_trial;
    try {
      f_trial = eval_f(trial);
    } catch (const EvaluationError&) {
      return reject(rec, RejectReason::nonfinite, before);
    }
    rec.rho = compute_rho(f_, f_trial, *rec.model_value);
    try {
      g_trial = eval_g(trial);
    } catch (const EvaluationError&) {
      return reject(rec, RejectReason::nonfinite, before);
    }
    rec.trial_grad_norm = g_trial.norm();
    if (*rec.rho < config_.eta1) return reject(rec, RejectReason::low_ratio, before);
    if (*rec.trial_grad_norm > step.kappa_hess)
      return reject(rec, RejectReason::gradient_bound, before);
    return accept(rec, trial, f_trial, std::move(g_trial), before);
  }

  void finish(SolveResult& result, SolveStatus status, std::string message = {}) const {
    result.x = x_;
    result.f = f_;
    result.grad_norm = g_.norm();
    result.status = status;
    result.message = std::move(message);
    result.evals = counters_;
    result.wall_seconds = elapsed();
  }

 private:
  using Clock = std::chrono::steady_clock;

  double alg_norm(const Vector& v) const { return config_.preconditioner.dual_norm(v); }

  double eval_f(const Vector& x) {
    ++counters_.f;
    return problem_.value(x);
  }
  Vector eval_g(const Vector& x) {
    ++counters_.g;
    return problem_.gradient(x);
  }

  IterationRecord begin_record(long k) const {
    IterationRecord rec;
    rec.k = k;
    rec.sigma = sigma_;
    rec.f = f_;
    rec.grad_norm = alg_norm(g_);
    return rec;
  }

  IterationRecord reject(IterationRecord rec, RejectReason why, const EvalCounters& before) {
    rec.reject = true;
    rec.reason = why;
    rec.accepted = false;
    rec.evals = counters_ - before;
    sigma_ = update_sigma(sigma_, rec.rho, true, config_);
    return rec;
  }

  IterationRecord accept(IterationRecord rec, const Vector& trial, double f_trial,
                         Vector g_trial, const EvalCounters& before) {
    rec.accepted = true;
    x_ = trial;
    f_ = f_trial;
    g_ = std::move(g_trial);
    rec.evals = counters_ - before;
    sigma_ = update_sigma(sigma_, rec.rho, false, config_);
    return rec;
  }

  const Problem& problem_;
  SolverConfig config_;
  TrialObserver observer_;
  Clock::time_point start_;
  EvalCounters counters_;
  Vector x_;
  Vector g_;
  double f_ = 0.0;
  double sigma_ = 1.0;
};

/// Evaluation failures at x0 end the run before the first iteration.
inline std::optional<Driver> start_driver(const Problem& problem, const SolverConfig& config,
                                          SolveResult& result, TrialObserver observer) {
  try {
    return std::optional<Driver>(std::in_place, problem, config, std::move(observer));
  } catch (const EvaluationError& e) {
    result.x = problem.initial_point();
    result.f = std::nan("");
    result.grad_norm = std::nan("");
    result.status = SolveStatus::numerical_failure;
    result.message = e.what();
    return std::nullopt;
  }
}

}  // namespace detail

/// Adaptive Newton / negative-curvature minimization to ||g|| <= eps.
///
/// Evaluation failures at trial points are rejections. Failures at the
/// current iterate, and numerical failures of the step computation, end the
/// run with status numerical-failure and the partial trace.
inline SolveResult solve(const Problem& problem, const SolverConfig& config,
                         TrialObserver observer = {}) {
  config.validate();
  SolveResult result;
  auto started = detail::start_driver(problem, config, result, std::move(observer));
  if (!started) return result;
  detail::Driver& driver = *started;
  for (long k = 0;; ++k) {
    if (driver.grad_norm() <= config.eps) {
      driver.finish(result, SolveStatus::converged);
      return result;
    }
    if (auto status = driver.budget_exhausted(k)) {
      driver.finish(result, *status);
      return result;
    }
    try {
      result.trace.push_back(driver.first_order_iteration(k, config.eps));
    } catch (const std::exception& e) {
      driver.finish(result, SolveStatus::numerical_failure, e.what());
      return result;
    }
  }
}

/// Second-order variant: first-order iterations while ||g|| > eps1, exact
/// minimum-eigenvector steps otherwise; stops when ||g|| <= eps1 and
/// lambda_min(H) >= -eps2.
inline SolveResult solve_so(const Problem& problem, const SOConfig& config,
                            TrialObserver observer = {}) {
  config.validate();
  SolveResult result;
  auto started = detail::start_driver(problem, config.base, result, std::move(observer));
  if (!started) return result;
  detail::Driver& driver = *started;
  for (long k = 0;; ++k) {
    try {
      if (driver.grad_norm() <= config.eps1()) {
        const Matrix H = driver.eval_H();
        const EigenPair eig = sym_eig_min(H);
        if (eig.value >= -config.eps2) {
          driver.finish(result, SolveStatus::converged);
          return result;
        }
        if (auto status = driver.budget_exhausted(k)) {
          driver.finish(result, *status);
          return result;
        }
        result.trace.push_back(driver.second_order_iteration(k, H, eig, config));
      } else {
        if (auto status = driver.budget_exhausted(k)) {
          driver.finish(result, *status);
          return result;
        }
        result.trace.push_back(driver.first_order_iteration(k, config.eps1()));
      }
    } catch (const std::exception& e) {
      driver.finish(result, SolveStatus::numerical_failure, e.what());
      return result;
    }
  }
}

}  // namespace an2cls
