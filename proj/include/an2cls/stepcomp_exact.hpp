#pragma once

#include <cmath>

#include "an2cls/linalg.hpp"
#include "an2cls/step.hpp"

namespace an2cls {

/// Trial step from a full eigendecomposition and a Cholesky solve.
///
/// mu = max(0, -lambda_min(H)). If mu <= kappa_C sqrt(sigma) ||g|| the step
/// solves (H + (mu + sqrt(sigma)||g||) I) s = -g exactly; otherwise it is
/// theta kappa_C / sqrt(sigma) times the unit minimum eigenvector, oriented so
/// that g'u <= 0. With theta = 1 this is the classic exact variant.
inline StepOutcome stepcomp_exact(const Vector& g, const Matrix& H, double sigma,
                                  double kappa_C, double theta = 1.0) {
  const double gnorm = g.norm();
  if (!(gnorm > 0.0)) throw ContractViolation("stepcomp_exact: zero gradient");
  if (!(sigma > 0.0)) throw ContractViolation("stepcomp_exact: sigma must be > 0");
  if (H.rows() != g.size() || H.cols() != g.size())
    throw ContractViolation("stepcomp_exact: dimension mismatch");

  const EigenPair eig = sym_eig_min(H);
  const double sqrt_sigma = std::sqrt(sigma);
  const double threshold = kappa_C * sqrt_sigma * gnorm;

  StepOutcome out;
  out.mu = std::max(0.0, -eig.value);

  if (out.mu <= threshold) {
    auto attempt = [&](double mu) {
      return solve_shifted(H, mu + sqrt_sigma * gnorm, g);
    };
    try {
      out.step = attempt(out.mu);
    } catch (const ShiftTooSmall&) {
      // lambda_min is only accurate to the eigen tolerance.
      const double hnorm = H.cwiseAbs().rowwise().sum().maxCoeff();
      out.mu += 10.0 * kEigTolerance * (1.0 + hnorm);
      if (out.mu <= threshold) out.step = attempt(out.mu);
    }
    if (out.mu <= threshold) {
      out.kind = StepKind::newton;
      out.residual_norm =
          (H * out.step + (sqrt_sigma * gnorm + out.mu) * out.step + g).norm();
      return out;
    }
  }

  Vector u = eig.vector;
  if (g.dot(u) > 0.0) u = -u;
  out.kind = StepKind::negative_curvature;
  out.step = (theta * kappa_C / sqrt_sigma) * u;
  out.residual_norm = 0.0;
  return out;
}

/// Exact variant in the M-norm: applied to M^{-1/2} H M^{-1/2} and M^{-1/2} g,
/// with the step mapped back by M^{-1/2}.
inline StepOutcome stepcomp_exact_preconditioned(const Vector& g, const Matrix& H,
                                                 double sigma, double kappa_C,
                                                 double theta,
                                                 const Preconditioner& M) {
  if (M.is_identity()) return stepcomp_exact(g, H, sigma, kappa_C, theta);
  const Vector d = M.inv_sqrt(g.size());
  const Matrix scaled = d.asDiagonal() * H * d.asDiagonal();
  StepOutcome out = stepcomp_exact(d.cwiseProduct(g), scaled, sigma, kappa_C, theta);
  out.step = d.cwiseProduct(out.step);
  return out;
}

}  // namespace an2cls
