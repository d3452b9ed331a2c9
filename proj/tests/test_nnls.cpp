#include "thrustopt/nnls.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "thrustopt/geometry.hpp"

namespace thrustopt {
namespace {

TEST(Nnls, ZeroRhsGivesZero) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(4, 6);
  const auto s = nnls_solve(a, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(s.x.size(), 6);
  EXPECT_DOUBLE_EQ(s.x.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(s.residual_norm_sq, 0.0);
}

TEST(Nnls, IdentityClipsNegatives) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  const auto s = nnls_solve(a, Eigen::Vector3d(1.0, -2.0, 3.0));
  EXPECT_TRUE(s.x.isApprox(Eigen::Vector3d(1.0, 0.0, 3.0)));
  EXPECT_NEAR(s.residual_norm_sq, 4.0, 1e-12);
}

TEST(Nnls, SingleColumnProjection) {
  Eigen::MatrixXd a(2, 1);
  a << 1.0, 1.0;
  const auto s = nnls_solve(a, Eigen::Vector2d(1.0, 3.0));
  EXPECT_NEAR(s.x(0), 2.0, 1e-12);
  EXPECT_NEAR(s.residual_norm_sq, 2.0, 1e-12);
  const auto neg = nnls_solve(a, Eigen::Vector2d(-1.0, -3.0));
  EXPECT_EQ(neg.x(0), 0.0);
}

TEST(Nnls, ExactInteriorSolution) {
  Eigen::MatrixXd a(3, 3);
  a << 2, 1, 0, 1, 3, 1, 0, 1, 4;
  const Eigen::Vector3d x_true(0.5, 1.0, 0.25);
  const auto s = nnls_solve(a, a * x_true);
  EXPECT_NEAR((s.x - x_true).norm(), 0.0, 1e-12);
  EXPECT_LT(s.residual_norm_sq, 1e-24);
}

TEST(Nnls, DuplicateColumnsTieBreakToLowestIndex) {
  Eigen::MatrixXd a(2, 3);
  a << 1, 1, 0, 0, 0, 1;
  const auto s = nnls_solve(a, Eigen::Vector2d(2.0, 1.0));
  EXPECT_NEAR(s.x(0), 2.0, 1e-12);
  EXPECT_EQ(s.x(1), 0.0);
  EXPECT_NEAR(s.x(2), 1.0, 1e-12);
}

TEST(Nnls, RejectsBadInput) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(nnls_solve(a, Eigen::Vector3d::Zero()), DomainError);
  EXPECT_THROW(nnls_solve(Eigen::MatrixXd(0, 0), Eigen::VectorXd(0)), DomainError);
  Eigen::MatrixXd bad = a;
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(nnls_solve(bad, Eigen::Vector2d::Ones()), DomainError);
  EXPECT_THROW(nnls_solve(a, Eigen::Vector2d::Ones(), NnlsOptions{0.0, 0}), DomainError);
}

TEST(Nnls, IterationCapRaisesWithBestIterate) {
  Eigen::MatrixXd a(3, 3);
  a << 1, 0.2, 0.1, 0.2, 1, 0.3, 0.1, 0.3, 1;
  try {
    nnls_solve(a, Eigen::Vector3d(1, 1, 1), NnlsOptions{1e-10, 1});
    FAIL() << "expected NnlsConvergenceError";
  } catch (const NnlsConvergenceError& e) {
    EXPECT_EQ(e.best_x().size(), 3u);
    for (double v : e.best_x()) EXPECT_GE(v, 0.0);
  }
}

TEST(Nnls, FixedSizeStorageMatchesDynamic) {
  const auto layout = default_layout(0.5);
  const std::vector<int> ids = {1, 3, 6, 8, 9, 11, 14, 16, 17, 19, 22, 24};
  const AllocationMatrix h = allocation_matrix(layout, ids);
  Vector6 b;
  b << 0.3, -0.2, 0.1, 0.05, 0.0, -0.02;
  const auto fixed = nnls_solve(h.columns, b);
  const Eigen::MatrixXd dyn = h.columns;
  const auto dynamic = nnls_solve(dyn, Eigen::VectorXd(b));
  EXPECT_NEAR((fixed.x - dynamic.x).norm(), 0.0, 1e-14);
}

TEST(Nnls, RandomInstancesMatchSupportEnumeration) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> rows(1, 6);
  std::uniform_int_distribution<int> cols(1, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = rows(rng);
    const int n = cols(rng);
    Eigen::MatrixXd a(m, n);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      b(i) = normal(rng);
      for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    }
    const auto s = nnls_solve(a, b);
    const auto ref = oracle::nnls_by_support(a, b);
    EXPECT_NEAR(s.residual_norm_sq, ref.residual_sq, 1e-8 * std::max(1.0, ref.residual_sq))
        << "trial " << trial;
    EXPECT_LT(nnls_kkt_violation(a, b, s.x), 1e-8) << "trial " << trial;
    EXPECT_GE(s.x.minCoeff(), 0.0);
  }
}

TEST(Nnls, KktViolationDetectsWrongPoint) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::Vector2d b(1.0, 1.0);
  EXPECT_LT(nnls_kkt_violation(a, b, Eigen::Vector2d(1.0, 1.0)), 1e-15);
  EXPECT_GT(nnls_kkt_violation(a, b, Eigen::Vector2d(0.0, 1.0)), 0.5);
  EXPECT_GT(nnls_kkt_violation(a, b, Eigen::Vector2d(-0.5, 1.0)), 0.4);
}

}  // namespace
}  // namespace thrustopt
