#include <cmath>

#include <gtest/gtest.h>

#include "an2cls/stepcomp_exact.hpp"
#include "an2cls/stepcomp_krylov.hpp"
#include "oracles.hpp"

using namespace an2cls;

namespace {

Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

Vector vec(std::initializer_list<double> d) {
  Vector v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v[i++] = x;
  return v;
}

auto op(const Matrix& H) {
  return [&H](const Vector& v) -> Vector { return H * v; };
}

constexpr double kC = 1000.0;

}  // namespace

// ---- exact ---------------------------------------------------------------

TEST(StepcompExact, IdentityHessian) {
  const StepOutcome out = stepcomp_exact(vec({1, 0}), Matrix::Identity(2, 2), 1.0, kC);
  EXPECT_EQ(out.kind, StepKind::newton);
  EXPECT_EQ(out.mu, 0.0);
  EXPECT_NEAR(out.step[0], -0.5, 1e-15);
  EXPECT_NEAR(out.step[1], 0.0, 1e-15);
}

TEST(StepcompExact, TinyGradientTakesCurvatureStep) {
  const Vector g = vec({1e-9, 0});
  const Matrix H = diag({-2, 1});
  const StepOutcome out = stepcomp_exact(g, H, 1.0, kC);
  EXPECT_EQ(out.kind, StepKind::negative_curvature);
  EXPECT_NEAR(out.mu, 2.0, 1e-14);
  EXPECT_NEAR(out.step[0], -1000.0, 1e-9);
  EXPECT_NEAR(out.step[1], 0.0, 1e-9);
  const Assumption0Report rep = verify_assumption0(g, H, 1.0, out, kC, 0.0, 1.0);
  EXPECT_TRUE(rep.ok) << rep.summary();
  const Vector u = out.step / 1000.0;
  EXPECT_NEAR(u.dot(H * u), -2.0, 1e-14);
}

TEST(StepcompExact, DiagonalClosedForm) {
  const StepOutcome out = stepcomp_exact(vec({1, 1}), diag({1, 3}), 4.0, kC);
  EXPECT_EQ(out.kind, StepKind::newton);
  EXPECT_EQ(out.mu, 0.0);
  const double tau = 2 * std::sqrt(2.0);
  EXPECT_NEAR(out.step[0], -1 / (1 + tau), 1e-14);
  EXPECT_NEAR(out.step[1], -1 / (3 + tau), 1e-14);
}

TEST(StepcompExact, BoundaryRoutesToNewton) {
  // mu = 1 equals kappa_C sqrt(sigma) ||g|| exactly.
  const StepOutcome out = stepcomp_exact(vec({1e-3, 0}), diag({2, -1}), 1.0, kC);
  EXPECT_EQ(out.kind, StepKind::newton);
  EXPECT_DOUBLE_EQ(out.mu, 1.0);
}

TEST(StepcompExact, SignRuleOnCurvatureStep) {
  const StepOutcome out = stepcomp_exact(vec({-1e-9, 0}), diag({-2, 1}), 1.0, kC);
  EXPECT_EQ(out.kind, StepKind::negative_curvature);
  EXPECT_GT(out.step[0], 0.0);
}

TEST(StepcompExact, ZeroGradientIsContractViolation) {
  EXPECT_THROW(stepcomp_exact(Vector::Zero(2), Matrix::Identity(2, 2), 1.0, kC),
               ContractViolation);
}

TEST(VerifyAssumption0, SpdExactPasses) {
  std::mt19937_64 rng(1);
  const Matrix H = oracle::random_spd(10, rng);
  const Vector g = oracle::random_vector(10, rng);
  const StepOutcome out = stepcomp_exact(g, H, 2.0, kC);
  EXPECT_TRUE(verify_assumption0(g, H, 2.0, out, kC, 0.0, 1.0).ok);
}

TEST(VerifyAssumption0, PerturbedStepFails) {
  std::mt19937_64 rng(2);
  const Matrix H = oracle::random_spd(10, rng);
  const Vector g = oracle::random_vector(10, rng);
  StepOutcome out = stepcomp_exact(g, H, 2.0, kC);
  out.step[0] += 1e-3;
  const Assumption0Report rep = verify_assumption0(g, H, 2.0, out, kC, 0.0, 1.0);
  EXPECT_FALSE(rep.ok);
  EXPECT_FALSE(rep.violations.empty());
}

TEST(StepcompExact, RandomInstancesPassAssumption0) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index n = 2 + trial % 15;
    const Matrix H = oracle::random_symmetric(n, rng);
    const Vector g = oracle::random_vector(n, rng, std::pow(10.0, -(trial % 7)));
    const double sigma = std::pow(10.0, (trial % 13) - 8);
    const StepOutcome out = stepcomp_exact(g, H, sigma, kC);
    const Assumption0Report rep = verify_assumption0(g, H, sigma, out, kC, 0.0, 1.0);
    EXPECT_TRUE(rep.ok) << rep.summary();
    const double mu_ref = std::max(0.0, -oracle::lambda_min(H));
    EXPECT_NEAR(out.mu, mu_ref, 1e-10 * (1 + H.norm()));
  }
}

TEST(StepcompExact, PreconditionedPassesPrimedConditions) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + trial % 10;
    const Matrix H = oracle::random_symmetric(n, rng);
    const Vector g = oracle::random_vector(n, rng);
    const Vector m = (oracle::random_vector(n, rng).array().abs() + 0.2).matrix();
    const Preconditioner M = Preconditioner::diagonal(m);
    const double sigma = std::pow(10.0, (trial % 9) - 4);
    const StepOutcome out = stepcomp_exact_preconditioned(g, H, sigma, kC, 1.0, M);
    const Assumption0Report rep = verify_assumption0(g, H, sigma, out, kC, 0.0, 1.0, M);
    EXPECT_TRUE(rep.ok) << rep.summary();
  }
}

// ---- Lanczos -------------------------------------------------------------

TEST(Lanczos, IsotropicHappyBreakdown) {
  const Matrix H = Matrix::Identity(3, 3);
  LanczosState s = lanczos_start(vec({3, 0, 0}));
  EXPECT_DOUBLE_EQ(s.alpha1, 3.0);
  lanczos_extend(s, op(H));
  EXPECT_EQ(s.basis[0], vec({1, 0, 0}));
  EXPECT_DOUBLE_EQ(s.T.diag[0], 1.0);
  EXPECT_EQ(s.alpha_next, 0.0);
  EXPECT_THROW(lanczos_extend(s, op(H)), ContractViolation);
}

TEST(Lanczos, TwoDimensionalHandComputation) {
  const Matrix H = diag({1, 2});
  LanczosState s = lanczos_start(vec({1, 1}));
  lanczos_extend(s, op(H));
  EXPECT_LE((s.basis[0] - vec({1, 1}) / std::sqrt(2.0)).norm(), 1e-15);
  EXPECT_NEAR(s.T.diag[0], 1.5, 1e-15);
  EXPECT_NEAR(s.alpha_next, 0.5, 1e-15);
  lanczos_extend(s, op(H));
  EXPECT_NEAR(s.T.diag[1], 1.5, 1e-15);
  const oracle::Eigensystem e = oracle::jacobi_eigen(s.T.to_dense());
  EXPECT_NEAR(e.values[0], 1.0, 1e-14);
  EXPECT_NEAR(e.values[1], 2.0, 1e-14);
  EXPECT_LE(s.alpha_next, 1e-15);
}

TEST(Lanczos, OneDimensionBreaksDown) {
  const Matrix H = diag({-5});
  LanczosState s = lanczos_start(vec({2}));
  lanczos_extend(s, op(H));
  EXPECT_EQ(s.alpha_next, 0.0);
}

TEST(Lanczos, OrthonormalBasisAndProjection) {
  std::mt19937_64 rng(5);
  for (const Eigen::Index n : {10, 60, 250}) {
    const Matrix H = oracle::random_symmetric(n, rng);
    const Vector g = oracle::random_vector(n, rng);
    LanczosState s = lanczos_start(g);
    const Eigen::Index steps = std::min<Eigen::Index>(n, 200);
    for (Eigen::Index p = 0; p < steps && s.alpha_next > 1e-13; ++p) lanczos_extend(s, op(H));
    const Matrix V = s.basis_matrix();
    EXPECT_LE((V.transpose() * V - Matrix::Identity(s.dim(), s.dim())).cwiseAbs().maxCoeff(),
              1e-8)
        << n;
    EXPECT_LE((s.basis[0] - g.normalized()).norm(), 1e-15);
    if (n <= 60) {
      const Matrix proj = V.transpose() * H * V;
      EXPECT_LE((proj - s.T.to_dense()).cwiseAbs().maxCoeff(), 1e-8 * H.norm()) << n;
    }
  }
}

// ---- subspace negative curvature -----------------------------------------

TEST(BuildSubspaceNegcurv, ZeroYFallsBackToEigenvector) {
  const SymTridiag T(vec({1, -3}), vec({0.5}));
  const Vector u = build_subspace_negcurv(Vector::Zero(2), T, 0.5);
  const oracle::Eigensystem e = oracle::jacobi_eigen(T.to_dense());
  EXPECT_NEAR(std::abs(u.dot(e.vectors.col(0))), 1.0, 1e-10);
  EXPECT_LE(u[0], 0.0);
}

TEST(BuildSubspaceNegcurv, DiagonalHalfTheta) {
  const SymTridiag T(vec({-1, 1}), vec({0}));
  const Vector u = build_subspace_negcurv(Vector::Zero(2), T, 0.5);
  EXPECT_NEAR(u[0], -1.0, 1e-14);
  EXPECT_NEAR(u[1], 0.0, 1e-14);
  EXPECT_LE(u.dot(T.multiply(u)), -0.5);
  EXPECT_LE(T.multiply(u).squaredNorm(), 2.0);
}

TEST(BuildSubspaceNegcurv, BadCombinationFallsBack) {
  // Any y-heavy combination has large T^2 energy from the +100 eigenvalue.
  const SymTridiag T(vec({-1, 100}), vec({0}));
  const Vector y = vec({0, 1e6});
  const Vector u = build_subspace_negcurv(y, T, 0.5);
  EXPECT_NEAR(std::abs(u[0]), 1.0, 1e-14);
  EXPECT_NEAR(u[1], 0.0, 1e-14);
}

TEST(BuildSubspaceNegcurv, UsesCombinationWhenAdmissible) {
  const SymTridiag T(vec({-4, -3.9}), vec({0}));
  const Vector y = vec({0, 1});
  const Vector u = build_subspace_negcurv(y, T, 0.5);
  EXPECT_GT(std::abs(u[1]), 0.1);
  EXPECT_LE(u[0], 0.0);
  EXPECT_NEAR(u.norm(), 1.0, 1e-14);
  EXPECT_LE(u.dot(T.multiply(u)), 0.5 * -4.0);
  EXPECT_LE(T.multiply(u).squaredNorm(), 16.0 / (2 * 0.25));
}

TEST(BuildSubspaceNegcurv, RequiresNegativeCurvature) {
  EXPECT_THROW(build_subspace_negcurv(Vector::Zero(1), SymTridiag(vec({1}), Vector()), 0.5),
               ContractViolation);
}

// ---- Krylov step ---------------------------------------------------------

TEST(StepcompKrylov, HappyBreakdownAtFirstStep) {
  const Matrix H = Matrix::Identity(3, 3);
  const StepOutcome out = stepcomp_krylov(vec({3, 0, 0}), op(H), 1.0, kC, 1.0, 0.5);
  EXPECT_EQ(out.kind, StepKind::newton);
  ASSERT_TRUE(out.krylov);
  EXPECT_EQ(out.krylov->dim, 1);
  EXPECT_NEAR(out.step[0], -0.75, 1e-15);
  EXPECT_EQ(out.step[1], 0.0);
  EXPECT_EQ(out.residual_norm, 0.0);
}

TEST(StepcompKrylov, FullDimensionMatchesExact) {
  const Matrix H = diag({1, 2});
  const Vector g = vec({1, 1});
  const StepOutcome k = stepcomp_krylov(g, op(H), 1.0, kC, 0.0, 1.0);
  const StepOutcome e = stepcomp_exact(g, H, 1.0, kC);
  EXPECT_EQ(k.krylov->dim, 2);
  EXPECT_LE((k.step - e.step).norm(), 1e-10);
}

TEST(StepcompKrylov, CurvatureBranchLength) {
  const Matrix H = diag({-2, 1, 1});
  const Vector g = vec({1e-9, 0, 0});
  const StepOutcome out = stepcomp_krylov(g, op(H), 1.0, kC, 1.0, 0.5);
  EXPECT_EQ(out.kind, StepKind::negative_curvature);
  EXPECT_NEAR(out.step.norm(), 500.0, 1e-9);
  const Vector u = out.step / 500.0;
  EXPECT_LE(u.dot(H * u), -0.5 * out.mu);
  const Assumption0Report rep = verify_assumption0(g, H, 1.0, out, kC, 1.0, 0.5);
  EXPECT_TRUE(rep.ok) << rep.summary();
}

TEST(StepcompKrylov, MaxDimBelowNWithoutAcceptanceThrows) {
  std::mt19937_64 rng(8);
  const Matrix H = oracle::random_spd(30, rng);
  const Vector g = oracle::random_vector(30, rng);
  EXPECT_THROW(stepcomp_krylov(g, op(H), 1e-8, kC, 0.0, 1.0, 3), SubspaceExhausted);
}

TEST(StepcompKrylov, RandomInstancesPassAssumption0AndResidualIdentity) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::Index n = 2 + (trial * 7) % 60;
    const Matrix H = oracle::random_symmetric(n, rng);
    const Vector g = oracle::random_vector(n, rng, std::pow(10.0, -(trial % 5)));
    const double sigma = std::pow(10.0, (trial % 13) - 8);
    const StepOutcome out = stepcomp_krylov(g, op(H), sigma, kC, 1.0, 0.5);
    const Assumption0Report rep = verify_assumption0(g, H, sigma, out, kC, 1.0, 0.5);
    EXPECT_TRUE(rep.ok) << "trial " << trial << ": " << rep.summary();
    if (out.kind != StepKind::newton) continue;
    const double tau = std::sqrt(sigma) * g.norm() + out.mu;
    const Vector lhs = H * out.step + tau * out.step + g;
    const Vector rhs = out.krylov->alpha_next * out.krylov->last_component * out.krylov->v_next;
    const double scale = g.norm() + (H * out.step).norm() + tau * out.step.norm();
    EXPECT_LE((lhs - rhs).norm(), 1e-8 * scale) << "trial " << trial;
  }
}

TEST(StepcompKrylov, IdentityPreconditionerIsBitIdentical) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 3 + trial;
    const Matrix H = oracle::random_symmetric(n, rng);
    const Vector g = oracle::random_vector(n, rng);
    const StepOutcome a = stepcomp_krylov(g, op(H), 1.0, kC, 1.0, 0.5);
    const StepOutcome b =
        stepcomp_krylov_preconditioned(g, op(H), 1.0, kC, 1.0, 0.5, 0, Preconditioner::identity());
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.step, b.step);
    EXPECT_EQ(a.mu, b.mu);
    EXPECT_EQ(a.krylov->dim, b.krylov->dim);
  }
}

TEST(StepcompKrylov, DiagonalPreconditionerHandExample) {
  const Preconditioner M = Preconditioner::diagonal(vec({4, 1}));
  const Vector g = vec({1, 0});
  EXPECT_DOUBLE_EQ(M.dual_norm(g), 0.5);
  const Matrix H = Matrix::Identity(2, 2);
  const StepOutcome out = stepcomp_krylov_preconditioned(g, op(H), 1.0, kC, 1.0, 0.5, 0, M);
  const Assumption0Report rep = verify_assumption0(g, H, 1.0, out, kC, 1.0, 0.5, M);
  EXPECT_TRUE(rep.ok) << rep.summary();
  // In scaled coordinates: H^ = diag(1/4, 1), g^ = (1/2, 0), shift 1/2.
  EXPECT_NEAR(out.step[0], 0.5 * (-0.5 / 0.75), 1e-14);
  EXPECT_NEAR(out.step[1], 0.0, 1e-14);
}

TEST(StepcompKrylov, ConstantPreconditionerScalesProblem) {
  // With M = cI the step equals the unpreconditioned step for H/c, g/sqrt(c)
  // mapped back by 1/sqrt(c).
  std::mt19937_64 rng(12);
  const double c = 9.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 4 + trial;
    const Matrix H = oracle::random_symmetric(n, rng);
    const Vector g = oracle::random_vector(n, rng);
    const StepOutcome pre = stepcomp_krylov_preconditioned(
        g, op(H), 1.0, kC, 1.0, 0.5, 0, Preconditioner::diagonal(Vector::Constant(n, c)));
    const Matrix Hs = H / c;
    const StepOutcome ref = stepcomp_krylov(g / std::sqrt(c), op(Hs), 1.0, kC, 1.0, 0.5);
    EXPECT_EQ(pre.kind, ref.kind);
    EXPECT_LE((pre.step - ref.step / std::sqrt(c)).norm(), 1e-10 * (1 + pre.step.norm()));
    const Assumption0Report rep = verify_assumption0(
        g, H, 1.0, pre, kC, 1.0, 0.5, Preconditioner::diagonal(Vector::Constant(n, c)));
    EXPECT_TRUE(rep.ok) << rep.summary();
  }
}

TEST(Preconditioner, FloorAndValidation) {
  const Preconditioner M = Preconditioner::diagonal(vec({0, 2}));
  EXPECT_EQ(M.entries()[0], Preconditioner::kFloor);
  EXPECT_THROW(Preconditioner::diagonal(vec({-1, 2})), ConfigError);
  EXPECT_THROW(M.check(3), ConfigError);
}
