#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scbm/error.hpp"
#include "scbm/gauss/gaussian.hpp"
#include "scbm/nn/ops.hpp"

namespace scbm::gauss {
namespace {

using testing::dense_condition;
using testing::random_spd;

ConceptDistribution from_cov(const Vector& mu, const Matrix& cov) {
  ConceptDistribution d;
  d.mean = mu;
  d.chol = cov.llt().matrixL();
  return d;
}

TEST(BuildCholesky, ScalarZeroIsLogTwo) {
  const Matrix l = build_cholesky(Vector::Zero(1));
  EXPECT_NEAR(l(0, 0), std::log(2.0) + 1e-6, 1e-15);
}

TEST(BuildCholesky, LargeNegativeDiagonalStaysPositive) {
  Vector raw(3);
  raw << -800.0, 0.3, -50.0;
  const Matrix l = build_cholesky(raw);
  EXPECT_GT(l(0, 0), 0.0);
  EXPECT_GT(l(1, 1), 0.0);
  EXPECT_EQ(l(1, 0), 0.3);
  EXPECT_EQ(l(0, 1), 0.0);
}

TEST(BuildCholesky, RoundTripsThroughInverse) {
  RandomStream rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix cov = random_spd(5, rng);
    const Matrix l = cov.llt().matrixL();
    EXPECT_LT((build_cholesky(unbuild_cholesky(l)) - l).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BuildCholesky, ReconstructionIsStable) {
  RandomStream rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix l = build_cholesky(rng.normal_matrix(10, 1).col(0));
    const Matrix again = Matrix((l * l.transpose()).llt().matrixL());
    EXPECT_LT((again - l).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(BuildCholesky, BackwardMatchesFiniteDifferences) {
  RandomStream rng(12);
  const Vector raw = rng.normal_matrix(6, 1).col(0);
  const Matrix weight = rng.normal_matrix(3, 3).triangularView<Eigen::Lower>();
  auto f = [&](const Vector& r) { return (build_cholesky(r).cwiseProduct(weight)).sum(); };
  const Vector g = build_cholesky_backward(raw, weight);
  for (Index k = 0; k < raw.size(); ++k) {
    Vector up = raw, down = raw;
    up(k) += 1e-6;
    down(k) -= 1e-6;
    EXPECT_NEAR(g(k), (f(up) - f(down)) / 2e-6, 1e-8);
  }
}

TEST(Sampling, DegenerateFactorReturnsMean) {
  ConceptDistribution d;
  d.mean = Vector::LinSpaced(4, -1.0, 2.0);
  d.chol = 1e-6 * Matrix::Identity(4, 4);
  RandomStream rng(1);
  EXPECT_LT((sample_reparam(d, rng) - d.mean).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_EQ(sample_reparam(d, Vector::Zero(4)), d.mean);
}

TEST(Sampling, MomentsMatch) {
  RandomStream rng(77);
  const ConceptDistribution d = from_cov(Vector::LinSpaced(3, -0.5, 1.0), random_spd(3, rng));
  const int n = 100000;
  Vector mean = Vector::Zero(3);
  Matrix second = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Vector s = sample_reparam(d, rng);
    mean += s;
    second += s * s.transpose();
  }
  mean /= n;
  const Matrix cov = second / n - mean * mean.transpose();
  EXPECT_LT((mean - d.mean).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LT((cov - d.covariance()).norm(), 0.05);
}

TEST(LogDensity, StandardNormalMode) {
  EXPECT_NEAR(log_density(Vector::Zero(1), Vector::Zero(1), Matrix::Identity(1, 1)), -0.5 * std::log(2 * M_PI), 1e-15);
}

TEST(LogDensity, ModeIsMaximal) {
  RandomStream rng(4);
  const Matrix cov = random_spd(4, rng);
  const Matrix l = cov.llt().matrixL();
  const Vector mu = rng.normal_matrix(4, 1).col(0);
  const double at_mode = log_density(mu, mu, l);
  for (int i = 0; i < 200; ++i) EXPECT_LE(log_density(rng.normal_matrix(4, 1).col(0), mu, l), at_mode);
}

TEST(LogDensity, MatchesDenseOracle) {
  RandomStream rng(5);
  for (int i = 0; i < 50; ++i) {
    const Matrix cov = random_spd(4, rng);
    const Vector mu = rng.normal_matrix(4, 1).col(0);
    const Vector x = rng.normal_matrix(4, 1).col(0);
    EXPECT_NEAR(log_density(x, mu, cov.llt().matrixL()), testing::dense_log_density(x, mu, cov), 1e-10);
  }
}

TEST(LrStatistic, Basics) {
  EXPECT_EQ(lr_statistic(Vector::Ones(2), Vector::Ones(2), Matrix::Identity(2, 2)), 0.0);
  EXPECT_NEAR(lr_statistic(Vector::Constant(1, 2.0), Vector::Zero(1), Matrix::Identity(1, 1)), 4.0, 1e-15);
}

TEST(LrStatistic, EqualsQuadraticFormAndIsNonNegative) {
  RandomStream rng(6);
  for (int i = 0; i < 200; ++i) {
    const Matrix cov = random_spd(5, rng);
    const Vector mu = rng.normal_matrix(5, 1).col(0);
    const Vector x = rng.normal_matrix(5, 1).col(0);
    const double q = (x - mu).dot(cov.inverse() * (x - mu));
    const double s = lr_statistic(x, mu, cov.llt().matrixL());
    EXPECT_NEAR(s, q, 1e-10 * std::max(1.0, q));
    EXPECT_GT(s, 0.0);
  }
}

TEST(Condition, DiagonalCovarianceIsNoOp) {
  Vector mu(3);
  mu << 0.5, -1.0, 2.0;
  const Vector var = Vector::LinSpaced(3, 1.0, 3.0);
  const ConceptDistribution d = from_cov(mu, var.asDiagonal());
  const std::vector<Index> s = {1};
  const ConditionalResult r = condition(d, s, Vector::Constant(1, 4.0));
  EXPECT_EQ(r.remaining, (std::vector<Index>{0, 2}));
  EXPECT_NEAR(r.mean(0), 0.5, 1e-15);
  EXPECT_NEAR(r.mean(1), 2.0, 1e-15);
  EXPECT_NEAR(r.cov(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(r.cov(1, 1), 3.0, 1e-15);
  EXPECT_NEAR(r.cov(0, 1), 0.0, 1e-15);
}

TEST(Condition, BivariateClosedForm) {
  for (double rho : {-0.95, -0.3, 0.0, 0.5, 0.9}) {
    for (double a : {-2.0, 0.7, 3.0}) {
      Matrix cov(2, 2);
      cov << 1, rho, rho, 1;
      const ConceptDistribution d = from_cov(Vector::Zero(2), cov);
      const std::vector<Index> s = {0};
      const ConditionalResult r = condition(d, s, Vector::Constant(1, a));
      EXPECT_NEAR(r.mean(0), rho * a, 1e-12);
      EXPECT_NEAR(r.cov(0, 0), 1 - rho * rho, 1e-12);
    }
  }
}

TEST(Condition, MatchesDenseOracleAndShrinksVariance) {
  RandomStream rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = static_cast<Index>(2 + rng.index(7));
    const Matrix cov = random_spd(c, rng);
    const ConceptDistribution d = from_cov(rng.normal_matrix(c, 1).col(0), cov);
    std::vector<Index> perm(static_cast<std::size_t>(c));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    const auto k = 1 + rng.index(static_cast<std::size_t>(c) - 1);
    const std::vector<Index> s(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
    const Vector v = rng.normal_matrix(static_cast<Index>(k), 1).col(0);
    const ConditionalResult r = condition(d, s, v);
    const auto oracle = dense_condition(d.mean, cov, s, v);
    EXPECT_LT((r.mean - oracle.mean).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((r.cov - oracle.cov).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((r.chol * r.chol.transpose() - r.cov).cwiseAbs().maxCoeff(), 1e-9);
    for (std::size_t j = 0; j < r.remaining.size(); ++j) {
      const auto o = r.remaining[j];
      EXPECT_LE(r.cov(static_cast<Index>(j), static_cast<Index>(j)), cov(o, o) + 1e-12);
    }
  }
}

TEST(Condition, SequentialEqualsJoint) {
  RandomStream rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix cov = random_spd(5, rng);
    const ConceptDistribution d = from_cov(rng.normal_matrix(5, 1).col(0), cov);
    const Vector v = rng.normal_matrix(2, 1).col(0);
    const std::vector<Index> joint_set = {0, 1};
    const ConditionalResult joint = condition(d, joint_set, v);
    const std::vector<Index> first = {0};
    const ConditionalResult step1 = condition(d, first, v.head(1));
    ConceptDistribution mid;
    mid.mean = step1.mean;
    mid.chol = step1.chol;
    // Index 1 of the original is position 0 among the remaining {1,2,3,4}.
    const std::vector<Index> second = {0};
    const ConditionalResult step2 = condition(mid, second, v.tail(1));
    EXPECT_LT((step2.mean - joint.mean).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((step2.cov - joint.cov).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Condition, RejectsInvalidSets) {
  const ConceptDistribution d = from_cov(Vector::Zero(3), Matrix::Identity(3, 3));
  const std::vector<Index> all = {0, 1, 2};
  EXPECT_THROW(condition(d, all, Vector::Zero(3)), UsageError);
  const std::vector<Index> none;
  EXPECT_THROW(condition(d, none, Vector::Zero(0)), UsageError);
  const std::vector<Index> dup = {1, 1};
  EXPECT_THROW(condition(d, dup, Vector::Zero(2)), UsageError);
  const std::vector<Index> out = {3};
  EXPECT_THROW(condition(d, out, Vector::Zero(1)), UsageError);
  const std::vector<Index> one = {0};
  EXPECT_THROW(condition(d, one, Vector::Constant(1, std::nan(""))), UsageError);
}

TEST(Condition, SingularBlockIsLinalgError) {
  ConceptDistribution d;
  d.mean = Vector::Zero(3);
  d.chol = Matrix::Zero(3, 3);
  // Row 1 duplicates row 0 at a scale where the jitter is lost to rounding.
  d.chol(0, 0) = 1e4;
  d.chol(1, 0) = 1e4;
  d.chol(2, 2) = 1.0;
  const std::vector<Index> s = {0, 1};
  EXPECT_THROW(condition(d, s, Vector::Zero(2)), LinalgError);
}

TEST(PrecisionPenalty, DiagonalIsZero) {
  EXPECT_EQ(precision_offdiag_penalty(Vector::LinSpaced(4, 1, 2).asDiagonal().toDenseMatrix()), 0.0);
}

TEST(PrecisionPenalty, BivariateClosedForm) {
  for (double rho : {-0.6, 0.2, 0.8}) {
    Matrix cov(2, 2);
    cov << 1, rho, rho, 1;
    const Matrix l = cov.llt().matrixL();
    EXPECT_NEAR(precision_offdiag_penalty(l), -2 * rho / (1 - rho * rho), 1e-12);
    EXPECT_NEAR(precision_offdiag_penalty(l, PenaltyKind::Absolute), 2 * std::abs(rho) / (1 - rho * rho), 1e-12);
  }
}

TEST(PrecisionPenalty, GradientThroughRawMatchesFiniteDifferences) {
  RandomStream rng(41);
  for (PenaltyKind kind : {PenaltyKind::Signed, PenaltyKind::Absolute}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Vector raw = 0.5 * rng.normal_matrix(10, 1).col(0);
      auto f = [&](const Vector& r) { return precision_offdiag_penalty(build_cholesky(r), kind); };
      const Vector g = build_cholesky_backward(raw, precision_offdiag_penalty_grad(build_cholesky(raw), kind));
      for (Index k = 0; k < raw.size(); ++k) {
        Vector up = raw, down = raw;
        up(k) += 1e-5;
        down(k) -= 1e-5;
        const double numeric = (f(up) - f(down)) / 2e-5;
        EXPECT_LT(std::abs(g(k) - numeric) / std::max(1.0, std::abs(g(k))), 1e-4);
      }
    }
  }
}

TEST(Correlation, Properties) {
  Matrix cov(2, 2);
  cov << 4, 2, 2, 4;
  const Matrix c = correlation(cov);
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_NEAR(c(0, 1), 0.5, 1e-15);
  EXPECT_EQ(correlation(Vector::LinSpaced(3, 1, 5).asDiagonal().toDenseMatrix()), Matrix::Identity(3, 3));
  RandomStream rng(8);
  const Matrix r = correlation(random_spd(6, rng));
  EXPECT_LT((r - r.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(r(i, i), 1.0);
}

}  // namespace
}  // namespace scbm::gauss
