#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "an2cls/problems.hpp"
#include "an2cls/solver.hpp"
#include "oracles.hpp"

using namespace an2cls;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

/// Same objective as `base`, started at x0, NaN outside the box |x_i| <= box.
Problem restart(const Problem& base, Vector x0,
                double box = std::numeric_limits<double>::infinity()) {
  auto inside = [box](const Vector& x) { return x.lpNorm<Eigen::Infinity>() <= box; };
  return Problem(
      base.name() + "_restart", std::move(x0),
      [base, inside](const Vector& x) { return inside(x) ? base.value(x) : nan; },
      [base, inside](const Vector& x) -> Vector {
        return inside(x) ? base.gradient(x) : Vector(Vector::Constant(x.size(), nan));
      },
      [base](const Vector& x, const Vector& v) -> Vector { return base.hess_vec(x, v); },
      [base](const Vector& x) -> Matrix { return base.hessian(x); });
}

void expect_sigma_policy(const SolveResult& r, const SolverConfig& c) {
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    const IterationRecord& a = r.trace[i];
    const double next = r.trace[i + 1].sigma;
    EXPECT_GE(a.sigma, c.sigma_min);
    if (!a.accepted) {
      EXPECT_DOUBLE_EQ(next, c.gamma2 * a.sigma) << "k=" << a.k;
    } else if (*a.rho >= c.eta2) {
      EXPECT_DOUBLE_EQ(next, std::max(c.sigma_min, c.gamma1 * a.sigma)) << "k=" << a.k;
    } else {
      EXPECT_DOUBLE_EQ(next, a.sigma) << "k=" << a.k;
    }
  }
}

void expect_monotone(const SolveResult& r) {
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    EXPECT_LE(r.trace[i + 1].f, r.trace[i].f);
    if (!r.trace[i].accepted) EXPECT_EQ(r.trace[i + 1].f, r.trace[i].f);
  }
  if (!r.trace.empty()) EXPECT_LE(r.f, r.trace.back().f);
}

}  // namespace

TEST(Rho, Examples) {
  EXPECT_DOUBLE_EQ(compute_rho(1.0, 0.9, -0.2), 0.5);
  EXPECT_LT(compute_rho(1.0, 1.05, -0.1), 0.0);
  EXPECT_THROW(compute_rho(1.0, 0.9, 0.0), ModelDecreaseViolation);
  EXPECT_THROW(compute_rho(1.0, 0.9, 0.3), ModelDecreaseViolation);
}

TEST(Rho, QuadraticModelIsExact) {
  // f = 0.5 x'Ax - 1'x has f(x+s) - f(x) = g's + s'As/2 exactly.
  const Problem p = problems::convex_quadratic(5);
  const Vector x = Vector::LinSpaced(5, -1, 1);
  const Vector s = Vector::LinSpaced(5, 0.3, -0.2);
  const Vector g = p.gradient(x);
  const double q = g.dot(s) + 0.5 * s.dot(p.hessian(x) * s);
  ASSERT_LT(q, 0.0);
  EXPECT_NEAR(compute_rho(p.value(x), p.value(x + s), q), 1.0, 1e-12);
}

TEST(Sigma, UpdateExamples) {
  const SolverConfig c = default_config(Backend::exact);
  EXPECT_EQ(update_sigma(1.0, 0.99, false, c), 0.5);
  EXPECT_EQ(update_sigma(1.0, 0.5, false, c), 1.0);
  EXPECT_EQ(update_sigma(1.0, std::nullopt, true, c), 10.0);
  EXPECT_EQ(update_sigma(1.0, 0.99, true, c), 10.0);
  EXPECT_EQ(update_sigma(1e-8, 0.99, false, c), 1e-8);
}

TEST(Kappa, Examples) {
  const SolverConfig c = default_config(Backend::exact);
  EXPECT_NEAR(c.kappa_upnewt(), 1001.15, 1e-9);
  EXPECT_NEAR(kappa_k(StepKind::newton, 3.0, 7.0, c), 1001.15, 1e-9);
  EXPECT_NEAR(kappa_k(StepKind::negative_curvature, 2.0, 1.0, c), 77001.0, 1e-7);
  EXPECT_NEAR(c.kappa_slow(), 1001 + std::sqrt(1001.0 * 1001.0 + 1e4), 1e-9);
  EXPECT_NEAR(c.kappa_slow(), 2006.98, 5e-3);
  EXPECT_NEAR(kappa_hess(-1.0, 4.0, c), 751.5, 1e-9);
  EXPECT_THROW(kappa_k(StepKind::second_order, 1.0, 1.0, c), ContractViolation);
}

TEST(SoStep, Examples) {
  SOConfig so;
  Matrix H = Matrix::Zero(2, 2);
  H(0, 0) = -1;
  H(1, 1) = 2;
  const SecondOrderStep a = so_step(Vector::Zero(2), H, 4.0, so);
  EXPECT_NEAR(std::abs(a.step[0]), 0.5, 1e-15);
  EXPECT_NEAR(a.step[1], 0.0, 1e-15);
  EXPECT_NEAR(a.kappa_hess, 751.5, 1e-9);
  const double decrease = -(0.5 * a.step.dot(H * a.step));
  EXPECT_NEAR(decrease, 1.0 / 8.0, 1e-15);

  const SecondOrderStep b = so_step((Vector(2) << 1e-8, 0).finished(), H, 4.0, so);
  EXPECT_NEAR(b.step[0], -0.5, 1e-15);

  EXPECT_THROW(so_step(Vector::Ones(2), H, 4.0, so), ContractViolation);
  EXPECT_THROW(so_step(Vector::Zero(2), Matrix::Identity(2, 2), 4.0, so), ContractViolation);
}

TEST(SoStep, RandomIndefiniteBounds) {
  std::mt19937_64 rng(31);
  SOConfig so;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix H = oracle::random_symmetric(5, rng);
    const double lmin = oracle::lambda_min(H);
    if (lmin >= -so.eps2) continue;
    const Vector g = oracle::random_vector(5, rng, 1e-8);
    const double sigma = std::pow(10.0, trial % 5 - 2);
    const SecondOrderStep st = so_step(g, H, sigma, so);
    EXPECT_NEAR(st.step.norm(), 1 / std::sqrt(sigma), 1e-12 / std::sqrt(sigma));
    EXPECT_LE(g.dot(st.step), 0.0);
    EXPECT_NEAR(st.lambda_min, lmin, 1e-10);
    const oracle::Check c = oracle::step_lemmas(g, H, st.step, sigma, 2, 1, 1);
    EXPECT_TRUE(c.ok) << c.detail;
  }
}

TEST(Solve, SphereExactConvergesWithoutCurvature) {
  const Problem p = problems::isotropic_quadratic((Vector(2) << 1, 0).finished());
  const SolveResult r = solve(p, default_config(Backend::exact));
  EXPECT_EQ(r.status, SolveStatus::converged);
  EXPECT_LE(r.grad_norm, 1e-6);
  EXPECT_EQ(r.count(StepKind::negative_curvature), 0);
  for (const auto& rec : r.trace) EXPECT_NE(rec.reason, RejectReason::gradient_growth);
}

TEST(Solve, StartAtMinimizer) {
  const Problem p = problems::isotropic_quadratic(Vector::Zero(3));
  const SolveResult r = solve(p, default_config(Backend::krylov));
  EXPECT_EQ(r.status, SolveStatus::converged);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.evals.f, 1);
  EXPECT_EQ(r.evals.g, 1);
}

TEST(Solve, NearSaddleTakesCurvatureStep) {
  const Problem p = restart(problems::strict_saddle(2), (Vector(2) << 1e-6, 0).finished());
  for (Backend b : {Backend::exact, Backend::krylov}) {
    const SolveResult r = solve(p, default_config(b));
    EXPECT_EQ(r.status, SolveStatus::converged) << to_string(b);
    EXPECT_GE(r.count(StepKind::negative_curvature), 1) << to_string(b);
    EXPECT_NEAR(std::abs(r.x[0]), 1.0, 1e-6);
    expect_monotone(r);
  }
}

TEST(Solve, NonFiniteTrialIsRejected) {
  const Problem p =
      restart(problems::strict_saddle(2), (Vector(2) << 1e-6, 0).finished(), 1.5);
  const SolveResult r = solve(p, default_config(Backend::exact));
  EXPECT_EQ(r.status, SolveStatus::converged);
  ASSERT_FALSE(r.trace.empty());
  EXPECT_EQ(r.trace[0].reason, RejectReason::nonfinite);
  EXPECT_DOUBLE_EQ(r.trace[1].sigma, 10 * r.trace[0].sigma);
}

TEST(Solve, IterationLimitKeepsTrace) {
  SolverConfig c = default_config(Backend::exact);
  c.max_iterations = 3;
  const SolveResult r = solve(problems::chained_rosenbrock(2), c);
  EXPECT_EQ(r.status, SolveStatus::iteration_limit);
  EXPECT_EQ(r.iterations(), 3);
}

TEST(Solve, TimeLimit) {
  SolverConfig c = default_config(Backend::krylov);
  c.time_limit_seconds = 1e-9;
  const SolveResult r = solve(problems::chained_rosenbrock(100), c);
  EXPECT_EQ(r.status, SolveStatus::time_limit);
}

TEST(Solve, EvaluationFailureAtStart) {
  const Problem p = restart(problems::strict_saddle(2), Vector::Constant(2, 3.0), 1.0);
  const SolveResult r = solve(p, default_config(Backend::exact));
  EXPECT_EQ(r.status, SolveStatus::numerical_failure);
  EXPECT_FALSE(r.message.empty());
}

TEST(Solve, ExactBackendRefusesAboveDenseCap) {
  Problem p = problems::separable_quartic(30);
  p.set_dense_cap(10);
  EXPECT_THROW(solve(p, default_config(Backend::exact)), ContractViolation);
  EXPECT_EQ(solve(p, default_config(Backend::krylov)).status, SolveStatus::converged);
}

TEST(Solve, InvalidConfigRejected) {
  SolverConfig c = default_config(Backend::exact);
  c.theta = 0.0;
  EXPECT_THROW(solve(problems::beale(), c), ConfigError);
}

TEST(Solve, EvaluationCountsAddUp) {
  for (Backend b : {Backend::exact, Backend::krylov}) {
    const SolveResult r = solve(problems::chained_rosenbrock(10), default_config(b));
    ASSERT_EQ(r.status, SolveStatus::converged);
    EvalCounters sum{1, 1, 0, 0};
    for (const auto& rec : r.trace) {
      sum.f += rec.evals.f;
      sum.g += rec.evals.g;
      sum.H += rec.evals.H;
      sum.hess_vec += rec.evals.hess_vec;
    }
    EXPECT_EQ(sum.f, r.evals.f);
    EXPECT_EQ(sum.g, r.evals.g);
    EXPECT_EQ(sum.H, r.evals.H);
    EXPECT_EQ(sum.hess_vec, r.evals.hess_vec);
    if (b == Backend::exact) EXPECT_EQ(r.evals.H, r.iterations());
    if (b == Backend::krylov) EXPECT_EQ(r.evals.H, 0);
  }
}

TEST(Solve, SuitePoliciesHold) {
  for (const Problem& p : problems::builtin_suite(problems::SuiteScale::small)) {
    for (Backend b : {Backend::exact, Backend::krylov}) {
      const SolverConfig c = default_config(b);
      const SolveResult r = solve(p, c);
      EXPECT_EQ(r.status, SolveStatus::converged) << p.name() << " " << to_string(b);
      if (r.status == SolveStatus::converged) EXPECT_LE(r.grad_norm, c.eps);
      expect_monotone(r);
      expect_sigma_policy(r, c);
    }
  }
}

TEST(Solve, ConvexQuadraticHasNoCurvatureSteps) {
  for (Backend b : {Backend::exact, Backend::krylov}) {
    const SolveResult r = solve(problems::convex_quadratic(50), default_config(b));
    EXPECT_EQ(r.status, SolveStatus::converged);
    EXPECT_EQ(r.count(StepKind::negative_curvature), 0);
  }
}

TEST(Solve, ObserverSeesEveryTrial) {
  long calls = 0;
  const SolveResult r = solve(problems::wood(), default_config(Backend::exact),
                              [&](const TrialStep& t) {
                                EXPECT_EQ(t.k, calls);
                                ++calls;
                              });
  EXPECT_EQ(calls, r.iterations());
}

TEST(Solve, PreconditionedRunConverges) {
  SolverConfig c = default_config(Backend::krylov);
  c.preconditioner = Preconditioner::diagonal(Vector::LinSpaced(10, 1, 4));
  const SolveResult r = solve(problems::convex_quadratic(10), c);
  EXPECT_EQ(r.status, SolveStatus::converged);
  EXPECT_LE(r.grad_norm, c.eps);
}

// ---- second-order variant ---------------------------------------------------

TEST(SolveSo, EscapesStrictSaddle) {
  SOConfig so;
  so.base.eps = 1e-6;
  so.eps2 = 1e-3;
  const Problem p = problems::strict_saddle(4);
  const SolveResult r = solve_so(p, so);
  EXPECT_EQ(r.status, SolveStatus::converged);
  EXPECT_LE(r.grad_norm, 1e-6);
  EXPECT_GE(oracle::lambda_min(p.hessian(r.x)), -1e-3);
  EXPECT_GE(r.count(StepKind::second_order), 1);
  EXPECT_LE(r.iterations(), 200);
  expect_monotone(r);
  expect_sigma_policy(r, so.base);
}

TEST(SolveSo, SecondOrderPointConvergesImmediately) {
  const SolveResult r = solve_so(problems::isotropic_quadratic(Vector::Zero(2)), SOConfig{});
  EXPECT_EQ(r.status, SolveStatus::converged);
  EXPECT_TRUE(r.trace.empty());
}

TEST(SolveSo, MatchesFirstOrderOnConvexProblems) {
  for (const Problem& p : {problems::convex_quadratic(20), problems::exp_sum(20),
                           problems::trid(15)}) {
    SOConfig so;
    const SolveResult a = solve(p, so.base);
    const SolveResult b = solve_so(p, so);
    ASSERT_EQ(a.iterations(), b.iterations()) << p.name();
    for (long k = 0; k < a.iterations(); ++k) {
      EXPECT_EQ(a.trace[k].kind, b.trace[k].kind);
      EXPECT_EQ(a.trace[k].sigma, b.trace[k].sigma);
      EXPECT_EQ(a.trace[k].f, b.trace[k].f);
      EXPECT_EQ(a.trace[k].accepted, b.trace[k].accepted);
    }
    EXPECT_EQ(a.x, b.x);
  }
}

TEST(SolveSo, RefusesKrylovBackend) {
  SOConfig so;
  so.base = default_config(Backend::krylov);
  EXPECT_THROW(solve_so(problems::beale(), so), ConfigError);
}
