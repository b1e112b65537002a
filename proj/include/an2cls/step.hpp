#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "an2cls/common.hpp"

namespace an2cls {

enum class StepKind { newton, negative_curvature, second_order };

inline std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::newton:
      return "newton";
    case StepKind::negative_curvature:
      return "negative_curvature";
    case StepKind::second_order:
      return "second_order";
  }
  return "?";
}

/// Lanczos diagnostics attached to a Krylov step.
struct KrylovInfo {
  Eigen::Index dim = 0;
  double alpha_next = 0.0;      // ||r_{p+1}|| as computed
  bool breakdown = false;       // alpha_next treated as exactly zero
  double last_component = 0.0;  // e_p' y_p (Newton) or e_p' u_p (curvature)
  Vector v_next;                // r_{p+1} / alpha_next, zero on exact breakdown
};

struct StepOutcome {
  Vector step;
  double mu = 0.0;
  StepKind kind = StepKind::newton;
  /// Newton: norm of (H + (sqrt(sigma)||g|| + mu) I) s + g.
  /// Curvature (Krylov): |alpha_{p+1} e_p' u_p|. Zero otherwise.
  double residual_norm = 0.0;
  std::optional<KrylovInfo> krylov;
};

/// Diagonal scaling M used as primal norm sqrt(x'Mx).
class Preconditioner {
 public:
  static constexpr double kFloor = 1e-12;

  static Preconditioner identity() { return Preconditioner(); }

  static Preconditioner diagonal(Vector entries) {
    if (entries.size() < 1) throw ConfigError("diagonal preconditioner is empty");
    for (Eigen::Index i = 0; i < entries.size(); ++i) {
      if (!std::isfinite(entries[i]) || entries[i] < 0.0)
        throw ConfigError("diagonal preconditioner entries must be finite and >= 0");
      entries[i] = std::max(entries[i], kFloor);
    }
    Preconditioner m;
    m.diag_ = std::move(entries);
    return m;
  }

  bool is_identity() const { return diag_.size() == 0; }
  const Vector& entries() const { return diag_; }

  /// M^{-1/2} as a vector, for a problem of dimension n.
  Vector inv_sqrt(Eigen::Index n) const {
    if (is_identity()) return Vector::Ones(n);
    check(n);
    return diag_.cwiseSqrt().cwiseInverse();
  }

  double primal_norm(const Vector& x) const {
    if (is_identity()) return x.norm();
    check(x.size());
    return std::sqrt(x.dot(diag_.cwiseProduct(x)));
  }

  double dual_norm(const Vector& x) const {
    if (is_identity()) return x.norm();
    check(x.size());
    return std::sqrt(x.dot(x.cwiseQuotient(diag_)));
  }

  Vector apply(const Vector& x) const {
    if (is_identity()) return x;
    check(x.size());
    return diag_.cwiseProduct(x);
  }

  void check(Eigen::Index n) const {
    if (!is_identity() && diag_.size() != n)
      throw ConfigError("preconditioner size does not match problem dimension");
  }

 private:
  Vector diag_;
};

struct Assumption0Report {
  bool ok = true;
  std::vector<std::string> violations;

  void fail(const std::string& what) {
    ok = false;
    violations.push_back(what);
  }
  std::string summary() const {
    std::ostringstream out;
    for (const auto& v : violations) out << v << "; ";
    return out.str();
  }
};

/// Post-hoc check of a Stepcomp output against the Newton conditions
/// (curvature, residual bound, residual orthogonality) or the curvature-step
/// conditions (descent, unit length, curvature, squared-curvature). Norms are
/// the M-primal / M-dual pair; `rel_tol` is scaled by the magnitude of the
/// terms entering each inequality.
template <class HessOp>
Assumption0Report verify_assumption0(const Vector& g, HessOp&& hess_op,
                                     double sigma, const StepOutcome& outcome,
                                     double kappa_C, double kappa_theta,
                                     double theta,
                                     const Preconditioner& M = Preconditioner::identity(),
                                     double rel_tol = 1e-9) {
  Assumption0Report report;
  const Vector& s = outcome.step;
  const double mu = outcome.mu;
  const double gnorm = M.dual_norm(g);
  const double sqrt_sigma = std::sqrt(sigma);
  const double threshold = kappa_C * sqrt_sigma * gnorm;
  auto describe = [](const char* what, double lhs, double rhs) {
    std::ostringstream out;
    out << what << ": " << lhs << " vs " << rhs;
    return out.str();
  };

  if (!(mu >= 0.0)) report.fail(describe("mu must be nonnegative", mu, 0.0));

  if (outcome.kind == StepKind::newton) {
    if (mu > threshold * (1.0 + rel_tol))
      report.fail(describe("Newton kind with mu above threshold", mu, threshold));
    const Vector Hs = hess_op(s);
    const Vector Ms = M.apply(s);
    const double snorm = M.primal_norm(s);
    const double tau = sqrt_sigma * gnorm + mu;
    const Vector r = Hs + tau * Ms + g;
    const double curv = s.dot(Hs) + mu * s.dot(Ms);
    const double curv_scale = std::abs(s.dot(Hs)) + mu * snorm * snorm;
    if (curv < -rel_tol * curv_scale)
      report.fail(describe("s'(H + mu M)s >= 0", curv, 0.0));
    const double r_scale = gnorm + M.dual_norm(Hs) + tau * snorm;
    const double rnorm = M.dual_norm(r);
    const double bound = kappa_theta * std::min(sqrt_sigma * gnorm * snorm, gnorm);
    if (rnorm > bound + rel_tol * r_scale)
      report.fail(describe("residual bound", rnorm, bound));
    const double orth = std::abs(r.dot(s));
    if (orth > rel_tol * r_scale * snorm)
      report.fail(describe("residual orthogonality", orth, 0.0));
  } else if (outcome.kind == StepKind::negative_curvature) {
    if (!(mu > threshold))
      report.fail(describe("curvature kind with mu not above threshold", mu, threshold));
    const Vector u = s * (sqrt_sigma / (theta * kappa_C));
    const Vector Hu = hess_op(u);
    const double hu = M.dual_norm(Hu);
    const double gu = g.dot(u);
    if (gu > rel_tol * gnorm) report.fail(describe("g'u <= 0", gu, 0.0));
    const double unorm = M.primal_norm(u);
    if (std::abs(unorm - 1.0) > rel_tol)
      report.fail(describe("||u||_M = 1", unorm, 1.0));
    const double uhu = u.dot(Hu);
    if (uhu > -theta * mu + rel_tol * (hu + mu))
      report.fail(describe("u'Hu <= -theta mu", uhu, -theta * mu));
    const double uhhu = hu * hu;
    const double cap = mu * mu / (theta * theta);
    if (uhhu > cap + rel_tol * (hu + mu) * (hu + mu))
      report.fail(describe("||Hu||^2 <= mu^2/theta^2", uhhu, cap));
  } else {
    report.fail("second-order steps are not Stepcomp outputs");
  }
  return report;
}

inline Assumption0Report verify_assumption0(
    const Vector& g, const Matrix& H, double sigma, const StepOutcome& outcome,
    double kappa_C, double kappa_theta, double theta,
    const Preconditioner& M = Preconditioner::identity(), double rel_tol = 1e-9) {
  return verify_assumption0(
      g, [&H](const Vector& v) -> Vector { return H * v; }, sigma, outcome,
      kappa_C, kappa_theta, theta, M, rel_tol);
}

}  // namespace an2cls
