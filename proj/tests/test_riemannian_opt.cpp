#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "geosub/errors.hpp"
#include "geosub/experiments.hpp"
#include "geosub/riemannian_opt.hpp"
#include "test_support.hpp"

using namespace geosub;
using geosub::testing::Rng;
namespace gt = geosub::testing;

namespace {

double tangency_defect(const Matrix& T, const Matrix& xi) {
  return (T.transpose() * xi + xi.transpose() * T).norm();
}

Matrix random_stiefel(Rng& rng, Eigen::Index n, Eigen::Index p) {
  return gt::gram_schmidt(rng.gaussian(n, p));
}

Matrix symmetric(Rng& rng, Eigen::Index p) {
  const Matrix a = rng.gaussian(p, p);
  return a + a.transpose();
}

FeatureModel parabola_feature() { return build_feature_model(gen_parabola(), 2); }

}  // namespace

TEST(StiefelProject, TangentInputUnchanged) {
  Rng rng(1);
  const Matrix T = random_stiefel(rng, 6, 4);
  const Matrix xi = stiefel_project(T, rng.gaussian(6, 4));
  EXPECT_LE((stiefel_project(T, xi) - xi).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(StiefelProject, NormalDirectionVanishes) {
  Rng rng(2);
  const Matrix T = random_stiefel(rng, 6, 4);
  EXPECT_LE(stiefel_project(T, T).norm(), 1e-14);
  EXPECT_LE(stiefel_project(T, T * symmetric(rng, 4)).norm(), 1e-13);
}

TEST(StiefelProject, RandomTangencyAndIdempotence) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index p = rng.integer(1, 5);
    const Eigen::Index n = p + rng.integer(0, 6);
    const Matrix T = random_stiefel(rng, n, p);
    const Matrix xi = stiefel_project(T, rng.gaussian(n, p));
    EXPECT_LE(tangency_defect(T, xi), 1e-12);
    EXPECT_LE((stiefel_project(T, xi) - xi).norm(), 1e-13);
  }
}

TEST(StiefelRetract, ZeroStepIsIdentity) {
  Rng rng(4);
  const Matrix T = random_stiefel(rng, 7, 3);
  EXPECT_EQ(stiefel_retract(T, Matrix::Zero(7, 3)), T);
}

TEST(StiefelRetract, SecondOrderAgreement) {
  Rng rng(5);
  const Matrix T = random_stiefel(rng, 8, 4);
  Matrix xi = stiefel_project(T, rng.gaussian(8, 4));
  xi /= xi.norm();
  const double d1 = (stiefel_retract(T, 1e-6 * xi) - (T + 1e-6 * xi)).norm();
  EXPECT_LE(d1, 1e-11);
  const double a = (stiefel_retract(T, 1e-2 * xi) - (T + 1e-2 * xi)).norm();
  const double b = (stiefel_retract(T, 5e-3 * xi) - (T + 5e-3 * xi)).norm();
  EXPECT_NEAR(a / b, 4.0, 0.2);
}

TEST(StiefelRetract, OutputOrthonormal) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix T = random_stiefel(rng, 9, 4);
    const Matrix xi = stiefel_project(T, rng.gaussian(9, 4) * rng.uniform(0.0, 5.0));
    EXPECT_LE(orthonormality_defect(stiefel_retract(T, xi)), 1e-12);
  }
}

TEST(Transport, Cases) {
  Rng rng(7);
  const Matrix T = random_stiefel(rng, 6, 4);
  const Matrix tangent = stiefel_project(T, rng.gaussian(6, 4));
  EXPECT_LE((transport(T, tangent) - tangent).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(transport(T, T * symmetric(rng, 4)).norm(), 1e-13);
  const Matrix moved = transport(T, rng.gaussian(6, 4));
  EXPECT_LE(tangency_defect(T, moved), 1e-12);

  const ProductTangent v{rng.gaussian(6, 4), rng.gaussian(2, 1)};
  const ProductTangent w = transport(T, v);
  EXPECT_EQ(w.xi_theta, v.xi_theta);
  EXPECT_LE(tangency_defect(T, w.xi_T), 1e-12);
}

TEST(ProductTangent, InnerAndNorm) {
  ProductTangent a{Matrix::Ones(2, 2), Vector::Constant(1, 2.0)};
  EXPECT_DOUBLE_EQ(a.inner(a), 8.0);
  EXPECT_DOUBLE_EQ(a.norm(), std::sqrt(8.0));
}

TEST(RandomPoint, DeterministicAndOrthonormal) {
  const auto a = random_point(10, 3, 42);
  const auto b = random_point(10, 3, 42);
  EXPECT_EQ(a.T, b.T);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_LE(orthonormality_defect(a.T), 1e-12);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_GE(a.theta(i), 0.0);
    EXPECT_LE(a.theta(i), std::numbers::pi);
  }
  EXPECT_NE(random_point(10, 3, 43).T, a.T);
  EXPECT_THROW(random_point(5, 3, 1), InvalidInput);
}

TEST(RandomPoint, ThetaMeanNearHalfPi) {
  double sum = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) sum += random_point(2, 1, s).theta(0);
  const double mean = sum / 1000.0;
  const double sigma = std::numbers::pi / std::sqrt(12.0) / std::sqrt(1000.0);
  EXPECT_NEAR(mean, std::numbers::pi / 2, 3.0 * sigma);
}

TEST(DeriveSeed, DistinctAndStable) {
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
  EXPECT_NE(derive_seed(7, 3), derive_seed(7, 4));
  EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  EXPECT_EQ(c.grad_tol, 1e-4);
  EXPECT_EQ(c.max_iters, 5000);
  EXPECT_EQ(c.restarts, 5);
  EXPECT_EQ(c.line_search.sufficient_decrease, 1e-4);
  EXPECT_EQ(c.line_search.contraction, 0.5);
  EXPECT_NO_THROW(c.validate());
  c.grad_tol = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = {};
  c.restarts = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(Solve, ParabolaConvergesQuickly) {
  SolverConfig c;
  c.restarts = 5;
  c.rng_seed = 1;
  const FitResult fit = solve(parabola_feature(), 1, c);
  EXPECT_TRUE(fit.report.converged);
  EXPECT_LE(fit.report.iterations, 100);
  EXPECT_NEAR(fit.report.objective_trace.back(), 0.0114, 0.001);
  EXPECT_LT(fit.report.grad_norm_trace.back(), 1e-4);
  EXPECT_EQ(fit.report.per_restart.size(), 5u);
  EXPECT_EQ(fit.restart_params.size(), 5u);
}

TEST(Solve, ExactlyRepresentableData) {
  Rng rng(8);
  const GeodesicParams truth = gt::random_params(rng, 4, 2);
  const auto tau = gt::random_tau(rng, 15);
  FeatureModel f;
  f.basis = Matrix::Identity(4, 4);
  f.q_ref = Vector::Zero(4);
  f.tau = tau;
  f.coords.resize(4, 15);
  for (Eigen::Index j = 0; j < 15; ++j) {
    f.coords.col(j) = gt::basis_at(truth, tau[j]) * rng.gaussian(2, 1);
  }
  SolverConfig c;
  c.restarts = 5;
  c.grad_tol = 1e-8;
  const FitResult fit = solve(f, 2, c);
  EXPECT_LE(fit.report.objective_trace.back(), 1e-6);
}

TEST(Solve, TraceInvariantsAndFeasibility) {
  Rng rng(9);
  SnapshotSet s = gt::random_snapshots(rng, 30, 40);
  for (Eigen::Index j = 0; j < 40; ++j) s.Q.col(j) += 5.0 * std::sin(0.2 * j) * Vector::Ones(30);
  const FeatureModel f = build_feature_model(s, 10);
  SolverConfig c;
  c.restarts = 3;
  c.max_iters = 200;
  double worst_defect = 0.0;
  std::vector<std::vector<double>> seen(3);
  const FitResult fit = solve(f, 3, c, [&](std::size_t restart, int, const GeodesicParams& p,
                                           double value) {
    worst_defect = std::max(worst_defect, orthonormality_defect(p.T));
    seen[restart].push_back(value);
  });
  EXPECT_LE(worst_defect, 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& rs = fit.report.per_restart[i];
    EXPECT_EQ(rs.seed, derive_seed(c.rng_seed, i));
    EXPECT_EQ(seen[i], rs.objective_trace);
    for (std::size_t k = 1; k < rs.objective_trace.size(); ++k) {
      EXPECT_LE(rs.objective_trace[k], rs.objective_trace[k - 1]);
    }
    if (rs.converged) EXPECT_LT(rs.final_grad_norm, c.grad_tol);
    EXPECT_EQ(rs.objective_trace.size(), static_cast<std::size_t>(rs.iterations) + 1);
  }
  const auto& best = fit.report.per_restart[fit.report.best_restart];
  for (const auto& rs : fit.report.per_restart) {
    EXPECT_LE(best.final_objective, rs.final_objective);
  }
  EXPECT_EQ(fit.report.objective_trace, best.objective_trace);
}

TEST(Solve, SeedDeterminism) {
  Rng rng(10);
  const SnapshotSet s = gt::random_snapshots(rng, 20, 30);
  const FeatureModel f = build_feature_model(s, 8);
  SolverConfig c;
  c.restarts = 2;
  c.max_iters = 100;
  c.rng_seed = 99;
  const FitResult a = solve(f, 2, c);
  const FitResult b = solve(f, 2, c);
  EXPECT_EQ(a.params.T, b.params.T);
  EXPECT_EQ(a.params.theta, b.params.theta);
  EXPECT_EQ(a.report.objective_trace, b.report.objective_trace);
  EXPECT_EQ(a.report.grad_norm_trace, b.report.grad_norm_trace);
}

TEST(Solve, StationaryAlongRandomTangents) {
  SolverConfig c;
  c.restarts = 3;
  const FeatureModel f = parabola_feature();
  const FitResult fit = solve(f, 1, c);
  ASSERT_TRUE(fit.report.converged);
  const FeatureObjective problem(f.coords, f.tau);
  const double f0 = problem.squared(fit.params);
  Rng rng(11);
  const double step = 1e-4;
  for (int i = 0; i < 50; ++i) {
    ProductTangent d{stiefel_project(fit.params.T, rng.gaussian(2, 2)), rng.gaussian(1, 1)};
    const double n = d.norm();
    d.xi_T /= n;
    d.xi_theta /= n;
    GeodesicParams moved{stiefel_retract(fit.params.T, step * d.xi_T),
                         fit.params.theta + step * d.xi_theta};
    EXPECT_GE(problem.squared(moved), f0 - c.grad_tol * step);
  }
}

TEST(Solve, Failures) {
  const FeatureModel f = parabola_feature();
  SolverConfig c;
  EXPECT_THROW(solve(f, 2, c), InvalidInput);
  FeatureModel zero = f;
  zero.coords.setZero();
  EXPECT_THROW(solve(zero, 1, c), NumericalError);
}
