#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "an2cls/common.hpp"

namespace an2cls {

/// Eigenvalue residual tolerance, relative to (1 + ||H||).
inline constexpr double kEigTolerance = 1e-10;
/// Relative residual target for shifted positive-definite solves.
inline constexpr double kSolveTolerance = 1e-12;

struct EigenPair {
  double value = 0.0;
  Vector vector;  // unit norm, arbitrary sign
};

/// Symmetric tridiagonal matrix: diag(0..p-1), offdiag(i) couples i and i+1.
struct SymTridiag {
  Vector diag;
  Vector offdiag;

  SymTridiag() = default;
  SymTridiag(Vector d, Vector e) : diag(std::move(d)), offdiag(std::move(e)) {
    if (diag.size() < 1 || offdiag.size() != diag.size() - 1)
      throw ContractViolation("SymTridiag: need p >= 1 and p - 1 off-diagonals");
  }

  Eigen::Index order() const { return diag.size(); }

  Matrix to_dense() const {
    const Eigen::Index p = order();
    Matrix T = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) T(i, i) = diag[i];
    for (Eigen::Index i = 0; i + 1 < p; ++i) T(i, i + 1) = T(i + 1, i) = offdiag[i];
    return T;
  }

  Vector multiply(const Vector& v) const {
    const Eigen::Index p = order();
    Vector out = diag.cwiseProduct(v);
    for (Eigen::Index i = 0; i + 1 < p; ++i) {
      out[i] += offdiag[i] * v[i + 1];
      out[i + 1] += offdiag[i] * v[i];
    }
    return out;
  }

  /// Infinity norm, an upper bound on the spectral radius.
  double norm_inf() const {
    const Eigen::Index p = order();
    double best = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
      double row = std::abs(diag[i]);
      if (i > 0) row += std::abs(offdiag[i - 1]);
      if (i + 1 < p) row += std::abs(offdiag[i]);
      best = std::max(best, row);
    }
    return best;
  }

  void push_back(double d, double e) {
    const Eigen::Index p = order();
    if (p > 0) {
      offdiag.conservativeResize(p);
      offdiag[p - 1] = e;
    } else {
      offdiag.resize(0);
    }
    diag.conservativeResize(p + 1);
    diag[p] = d;
  }
};

/// Smallest eigenpair of a dense symmetric matrix.
inline EigenPair sym_eig_min(const Matrix& H) {
  if (H.rows() != H.cols() || H.rows() < 1)
    throw ContractViolation("sym_eig_min: matrix must be square and non-empty");
  if (!H.allFinite()) throw NumericalError("sym_eig_min: non-finite matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(H);
  if (solver.info() != Eigen::Success)
    throw NumericalError("sym_eig_min: eigen-iteration did not converge");
  EigenPair out{solver.eigenvalues()[0], solver.eigenvectors().col(0)};
  out.vector.normalize();
  const double scale = 1.0 + solver.eigenvalues().cwiseAbs().maxCoeff();
  if ((H * out.vector - out.value * out.vector).norm() > kEigTolerance * scale)
    throw NumericalError("sym_eig_min: eigenpair residual above tolerance");
  return out;
}

/// Solves (H + tau I) s = -g by Cholesky. Throws ShiftTooSmall if the shifted
/// matrix is not numerically positive definite.
inline Vector solve_shifted(const Matrix& H, double tau, const Vector& g) {
  const Eigen::Index n = H.rows();
  if (H.cols() != n || g.size() != n)
    throw ContractViolation("solve_shifted: dimension mismatch");
  Matrix A = H;
  A.diagonal().array() += tau;
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw ShiftTooSmall("solve_shifted: shifted matrix is not positive definite");
  Vector s = llt.solve(-g);
  // Two rounds of refinement against the same factor.
  for (int round = 0; round < 2; ++round) {
    const Vector r = A * s + g;
    if (r.norm() <= kSolveTolerance * g.norm()) break;
    s -= llt.solve(r);
  }
  if (!s.allFinite())
    throw ShiftTooSmall("solve_shifted: non-finite solution");
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                       A.lpNorm<Eigen::Infinity>() * s.norm();
  const double res = (A * s + g).norm();
  if (res > std::max(kSolveTolerance * g.norm(), floor))
    throw NumericalError("solve_shifted: residual above tolerance");
  return s;
}

namespace detail {

/// Number of eigenvalues of T strictly below x (Sturm sequence).
inline Eigen::Index sturm_count(const SymTridiag& T, double x, double pivmin) {
  Eigen::Index count = 0;
  double q = T.diag[0] - x;
  if (std::abs(q) < pivmin) q = -pivmin;
  if (q < 0.0) ++count;
  for (Eigen::Index i = 1; i < T.order(); ++i) {
    const double e = T.offdiag[i - 1];
    q = T.diag[i] - x - e * e / q;
    if (std::abs(q) < pivmin) q = -pivmin;
    if (q < 0.0) ++count;
  }
  return count;
}

/// Solves (T - shift I) x = b by Gaussian elimination with partial pivoting.
/// Near-zero pivots are perturbed, which is what inverse iteration wants.
inline Vector tridiag_pivoted_solve(const SymTridiag& T, double shift, Vector b,
                                    double pivmin) {
  const Eigen::Index n = T.order();
  if (n == 1) {
    double d = T.diag[0] - shift;
    if (std::abs(d) < pivmin) d = pivmin;
    b[0] /= d;
    return b;
  }
  std::vector<double> dl(T.offdiag.data(), T.offdiag.data() + n - 1);
  std::vector<double> du(dl);
  std::vector<double> d(n);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = T.diag[i] - shift;
  std::vector<double> du2(n > 2 ? n - 2 : 0, 0.0);
  std::vector<bool> swapped(n - 1, false);

  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      if (std::abs(d[i]) < pivmin) d[i] = pivmin;
      const double fact = dl[i] / d[i];
      dl[i] = fact;
      d[i + 1] -= fact * du[i];
    } else {
      const double fact = d[i] / dl[i];
      d[i] = dl[i];
      dl[i] = fact;
      const double temp = du[i];
      du[i] = d[i + 1];
      d[i + 1] = temp - fact * d[i + 1];
      if (i + 2 < n) {
        du2[i] = du[i + 1];
        du[i + 1] = -fact * du[i + 1];
      }
      swapped[i] = true;
    }
  }
  if (std::abs(d[n - 1]) < pivmin) d[n - 1] = pivmin;

  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (swapped[i]) std::swap(b[i], b[i + 1]);
    b[i + 1] -= dl[i] * b[i];
  }
  b[n - 1] /= d[n - 1];
  b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
  for (Eigen::Index i = n - 3; i >= 0; --i)
    b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
  return b;
}

}  // namespace detail

/// Smallest eigenpair of a symmetric tridiagonal matrix: Sturm bisection for
/// the eigenvalue, inverse iteration for the vector. O(p) per bisection step.
///
/// `upper_hint`, when given, must be an upper bound on the smallest
/// eigenvalue (e.g. the previous Lanczos estimate, by interlacing).
inline EigenPair tridiag_eig_min(const SymTridiag& T,
                                 std::optional<double> upper_hint = {}) {
  const Eigen::Index p = T.order();
  if (p < 1) throw ContractViolation("tridiag_eig_min: empty matrix");
  if (!T.diag.allFinite() || !T.offdiag.allFinite())
    throw NumericalError("tridiag_eig_min: non-finite matrix");
  if (p == 1) return {T.diag[0], Vector::Ones(1)};

  const double tnorm = T.norm_inf();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double pivmin = std::max(std::numeric_limits<double>::min(),
                                 eps * eps * std::max(1.0, tnorm * tnorm));

  double lo = std::numeric_limits<double>::infinity();
  double hi = T.diag.minCoeff();
  for (Eigen::Index i = 0; i < p; ++i) {
    double radius = 0.0;
    if (i > 0) radius += std::abs(T.offdiag[i - 1]);
    if (i + 1 < p) radius += std::abs(T.offdiag[i]);
    lo = std::min(lo, T.diag[i] - radius);
  }
  if (upper_hint && *upper_hint < hi && *upper_hint >= lo) hi = *upper_hint;
  // Widen slightly so the bracket is valid under rounding.
  const double pad = 2.0 * eps * std::max(1.0, tnorm);
  lo -= pad;
  hi += pad;
  if (detail::sturm_count(T, hi, pivmin) < 1) hi = T.diag.minCoeff() + pad;

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 2.0 * eps * std::max({std::abs(lo), std::abs(hi), tnorm * 1e-3}) ||
        mid <= lo || mid >= hi)
      break;
    if (detail::sturm_count(T, mid, pivmin) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  const double lambda = 0.5 * (lo + hi);

  Vector y = Vector::Ones(p) / std::sqrt(static_cast<double>(p));
  // Deterministic, non-symmetric start avoids orthogonality to the target.
  for (Eigen::Index i = 0; i < p; ++i) y[i] += 1e-3 * static_cast<double>(i % 7);
  y.normalize();
  const double tol = kEigTolerance * (1.0 + tnorm);
  for (int it = 0; it < 12; ++it) {
    y = detail::tridiag_pivoted_solve(T, lambda, y, pivmin * 1e3 + eps * tnorm);
    const double nrm = y.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm))
      throw NumericalError("tridiag_eig_min: inverse iteration broke down");
    y /= nrm;
    if (it >= 1 && (T.multiply(y) - lambda * y).norm() <= tol) break;
  }
  if ((T.multiply(y) - lambda * y).norm() > tol)
    throw NumericalError("tridiag_eig_min: eigenpair residual above tolerance");
  return {lambda, y};
}

/// Solves (T + tau I) y = rhs with an LDL' factorization (no pivoting).
/// Throws ShiftTooSmall when a pivot is not positive.
inline Vector solve_tridiag_shifted(const SymTridiag& T, double tau,
                                    const Vector& rhs) {
  const Eigen::Index p = T.order();
  if (rhs.size() != p)
    throw ContractViolation("solve_tridiag_shifted: dimension mismatch");
  Vector d(p);
  Vector l(p > 1 ? p - 1 : 0);
  d[0] = T.diag[0] + tau;
  for (Eigen::Index i = 0; i + 1 < p; ++i) {
    if (!(d[i] > 0.0))
      throw ShiftTooSmall("solve_tridiag_shifted: non-positive pivot");
    l[i] = T.offdiag[i] / d[i];
    d[i + 1] = T.diag[i + 1] + tau - l[i] * T.offdiag[i];
  }
  if (!(d[p - 1] > 0.0))
    throw ShiftTooSmall("solve_tridiag_shifted: non-positive pivot");

  auto ldl_solve = [&](Vector b) {
    for (Eigen::Index i = 1; i < p; ++i) b[i] -= l[i - 1] * b[i - 1];
    for (Eigen::Index i = 0; i < p; ++i) b[i] /= d[i];
    for (Eigen::Index i = p - 2; i >= 0; --i) b[i] -= l[i] * b[i + 1];
    return b;
  };
  auto residual = [&](const Vector& y) {
    return Vector(T.multiply(y) + tau * y - rhs);
  };

  Vector y = ldl_solve(rhs);
  for (int round = 0; round < 2; ++round) {
    const Vector r = residual(y);
    if (r.norm() <= kSolveTolerance * rhs.norm()) break;
    y -= ldl_solve(r);
  }
  if (!y.allFinite())
    throw ShiftTooSmall("solve_tridiag_shifted: non-finite solution");
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() *
                       (T.norm_inf() + std::abs(tau)) * y.norm();
  if (residual(y).norm() > std::max(kSolveTolerance * rhs.norm(), floor))
    throw NumericalError("solve_tridiag_shifted: residual above tolerance");
  return y;
}

}  // namespace an2cls
