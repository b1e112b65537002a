#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "an2cls/common.hpp"

namespace an2cls {

/// Analysis-only constants of an objective. Nothing in the solvers reads
/// these; tests use them as oracles.
struct ProblemMetadata {
  std::optional<double> f_low;
  std::optional<double> L0;
  std::optional<double> L1;
  std::optional<double> delta;
  std::optional<double> kappa_B;
};

/// Twice differentiable objective f: R^n -> R.
///
/// The Hessian-vector product is mandatory. A dense Hessian evaluator is
/// optional; when absent the dense matrix is assembled column by column from
/// the Hessian-vector product. Dense Hessians are refused above `dense_cap`.
///
/// Evaluators must be pure: a Problem may be shared by concurrent solves.
class Problem {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;
  using HessVecFn = std::function<Vector(const Vector&, const Vector&)>;
  using HessianFn = std::function<Matrix(const Vector&)>;

  static constexpr Eigen::Index kDefaultDenseCap = 1000;

  Problem(std::string name, Vector x0, ValueFn value, GradientFn gradient,
          HessVecFn hess_vec, HessianFn hessian = {},
          ProblemMetadata metadata = {})
      : name_(std::move(name)),
        x0_(std::move(x0)),
        value_(std::move(value)),
        gradient_(std::move(gradient)),
        hess_vec_(std::move(hess_vec)),
        hessian_(std::move(hessian)),
        metadata_(std::move(metadata)) {
    if (x0_.size() < 1) throw ConfigError("problem '" + name_ + "': empty x0");
    if (!value_ || !gradient_ || !hess_vec_)
      throw ConfigError("problem '" + name_ + "': missing evaluator");
  }

  const std::string& name() const { return name_; }
  Eigen::Index dimension() const { return x0_.size(); }
  const Vector& initial_point() const { return x0_; }
  const ProblemMetadata& metadata() const { return metadata_; }

  Eigen::Index dense_cap() const { return dense_cap_; }
  void set_dense_cap(Eigen::Index cap) { dense_cap_ = cap; }
  bool has_dense_hessian() const { return dimension() <= dense_cap_; }

  double value(const Vector& x) const {
    check_point(x);
    const double f = value_(x);
    if (!std::isfinite(f))
      throw EvaluationError(name_ + ": non-finite objective value", x);
    return f;
  }

  Vector gradient(const Vector& x) const {
    check_point(x);
    Vector g = gradient_(x);
    if (g.size() != dimension() || !g.allFinite())
      throw EvaluationError(name_ + ": non-finite gradient", x);
    return g;
  }

  Vector hess_vec(const Vector& x, const Vector& v) const {
    check_point(x);
    if (v.size() != dimension())
      throw ContractViolation(name_ + ": hess_vec direction has wrong size");
    Vector hv = hess_vec_(x, v);
    if (hv.size() != dimension() || !hv.allFinite())
      throw EvaluationError(name_ + ": non-finite Hessian-vector product", x);
    return hv;
  }

  /// Dense symmetric Hessian. Storage is exactly symmetric.
  Matrix hessian(const Vector& x) const {
    check_point(x);
    if (!has_dense_hessian())
      throw ContractViolation(name_ + ": dimension " +
                              std::to_string(dimension()) +
                              " exceeds the dense Hessian cap");
    const Eigen::Index n = dimension();
    Matrix H;
    if (hessian_) {
      H = hessian_(x);
    } else {
      H.resize(n, n);
      Vector e = Vector::Zero(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        e[j] = 1.0;
        H.col(j) = hess_vec_(x, e);
        e[j] = 0.0;
      }
    }
    if (H.rows() != n || H.cols() != n || !H.allFinite())
      throw EvaluationError(name_ + ": non-finite Hessian", x);
    Matrix sym = 0.5 * (H + H.transpose());
    return sym;
  }

 private:
  void check_point(const Vector& x) const {
    if (x.size() != dimension())
      throw ContractViolation(name_ + ": point has wrong dimension");
    if (!x.allFinite()) throw EvaluationError(name_ + ": non-finite point", x);
  }

  std::string name_;
  Vector x0_;
  ValueFn value_;
  GradientFn gradient_;
  HessVecFn hess_vec_;
  HessianFn hessian_;
  ProblemMetadata metadata_;
  Eigen::Index dense_cap_ = kDefaultDenseCap;
};

struct Evaluation {
  double f = 0.0;
  Vector g;
  Matrix H;
};

inline Evaluation eval_all(const Problem& problem, const Vector& x) {
  return {problem.value(x), problem.gradient(x), problem.hessian(x)};
}

inline Vector hess_vec(const Problem& problem, const Vector& x,
                       const Vector& v) {
  return problem.hess_vec(x, v);
}

struct DerivativeReport {
  double step = 0.0;
  double gradient_error = 0.0;
  double hessian_error = 0.0;
  double gradient_tolerance = 0.0;
  double hessian_tolerance = 0.0;
  std::uint64_t seed = 0;  // only meaningful for random-point checks
  bool gradient_ok() const { return gradient_error <= gradient_tolerance; }
  bool hessian_ok() const { return hessian_error <= hessian_tolerance; }
  bool ok() const { return gradient_ok() && hessian_ok(); }
};

namespace detail {

inline double scaled_error(double diff, double magnitude) {
  return diff / std::max(1.0, magnitude);
}

}  // namespace detail

/// Compares the analytic gradient with central differences of f and the
/// analytic second derivatives with central differences of the gradient.
/// Errors are max-norm differences scaled by max(1, max-norm of the analytic
/// quantity). Above the dense cap the Hessian is probed through hess_vec
/// along coordinate directions only for the first few coordinates.
inline DerivativeReport check_derivatives(const Problem& problem,
                                          const Vector& x, double h) {
  if (!(h > 0.0)) throw ContractViolation("check_derivatives: h must be > 0");
  const Eigen::Index n = problem.dimension();
  DerivativeReport report;
  report.step = h;
  report.gradient_tolerance = 10.0 * h;
  report.hessian_tolerance = 100.0 * h;

  const Vector g = problem.gradient(x);
  Vector fd(n);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = problem.value(xp);
    xp[i] = xi - h;
    const double fm = problem.value(xp);
    xp[i] = xi;
    fd[i] = (fp - fm) / (2.0 * h);
  }
  report.gradient_error = detail::scaled_error(
      (g - fd).lpNorm<Eigen::Infinity>(), g.lpNorm<Eigen::Infinity>());

  const Eigen::Index columns =
      problem.has_dense_hessian() ? n : std::min<Eigen::Index>(n, 16);
  double worst = 0.0;
  double magnitude = 0.0;
  Vector e = Vector::Zero(n);
  for (Eigen::Index j = 0; j < columns; ++j) {
    e[j] = 1.0;
    const Vector column = problem.hess_vec(x, e);
    e[j] = 0.0;
    const double xj = x[j];
    xp[j] = xj + h;
    const Vector gp = problem.gradient(xp);
    xp[j] = xj - h;
    const Vector gm = problem.gradient(xp);
    xp[j] = xj;
    const Vector fd_col = (gp - gm) / (2.0 * h);
    worst = std::max(worst, (column - fd_col).lpNorm<Eigen::Infinity>());
    magnitude = std::max(magnitude, column.lpNorm<Eigen::Infinity>());
  }
  if (problem.has_dense_hessian()) {
    const Matrix H = problem.hessian(x);
    for (Eigen::Index j = 0; j < n; ++j) {
      e[j] = 1.0;
      worst = std::max(worst,
                       (H.col(j) - problem.hess_vec(x, e)).lpNorm<Eigen::Infinity>());
      e[j] = 0.0;
    }
  }
  report.hessian_error = detail::scaled_error(worst, magnitude);
  return report;
}

/// Runs check_derivatives at `points` random points x0 + U[-radius, radius]^n
/// and reports the worst errors seen. The seed is recorded in the report.
inline DerivativeReport check_derivatives_random(const Problem& problem,
                                                 int points, double h,
                                                 std::uint64_t seed,
                                                 double radius = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-radius, radius);
  DerivativeReport worst;
  worst.step = h;
  worst.seed = seed;
  worst.gradient_tolerance = 10.0 * h;
  worst.hessian_tolerance = 100.0 * h;
  for (int k = 0; k < points; ++k) {
    Vector x = problem.initial_point();
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += unif(rng);
    const DerivativeReport r = check_derivatives(problem, x, h);
    worst.gradient_error = std::max(worst.gradient_error, r.gradient_error);
    worst.hessian_error = std::max(worst.hessian_error, r.hessian_error);
  }
  return worst;
}

}  // namespace an2cls
