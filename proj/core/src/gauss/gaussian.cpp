#include "scbm/gauss/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "scbm/error.hpp"
#include "scbm/nn/ops.hpp"

namespace scbm::gauss {

void ConceptDistribution::validate() const {
  const Index c = mean.size();
  if (chol.rows() != c || chol.cols() != c)
    throw ConfigError("concept distribution: mean has " + std::to_string(c) + " entries but factor is " +
                      std::to_string(chol.rows()) + "x" + std::to_string(chol.cols()));
  if (!mean.allFinite() || !chol.allFinite()) throw ConfigError("concept distribution: non-finite entries");
  for (Index i = 0; i < c; ++i) {
    if (!(chol(i, i) > 0.0)) throw ConfigError("concept distribution: non-positive Cholesky diagonal");
    for (Index j = i + 1; j < c; ++j)
      if (chol(i, j) != 0.0) throw ConfigError("concept distribution: factor is not lower triangular");
  }
}

Index dim_from_packed(Index packed) {
  const auto c = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(packed) + 1.0) - 1.0) / 2.0));
  if (packed_size(c) != packed)
    throw ConfigError(std::to_string(packed) + " raw values do not form a packed lower triangle");
  return c;
}

Matrix build_cholesky(const Vector& raw) {
  const Index c = dim_from_packed(raw.size());
  Matrix chol = Matrix::Zero(c, c);
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < i; ++j) chol(i, j) = raw(packed_index(i, j));
    chol(i, i) = nn::softplus(raw(packed_index(i, i))) + kCholeskyDiagFloor;
  }
  return chol;
}

Vector unbuild_cholesky(const Matrix& chol) {
  const Index c = chol.rows();
  Vector raw(packed_size(c));
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < i; ++j) raw(packed_index(i, j)) = chol(i, j);
    const double v = chol(i, i) - kCholeskyDiagFloor;
    if (!(v > 0.0)) throw ConfigError("unbuild_cholesky: diagonal entry below the positivity floor");
    // softplus^-1(v) = log(expm1(v)), written stably for large v.
    raw(packed_index(i, i)) = v > 30.0 ? v + std::log1p(-std::exp(-v)) : std::log(std::expm1(v));
  }
  return raw;
}

Vector build_cholesky_backward(const Vector& raw, const Matrix& grad_chol) {
  const Index c = dim_from_packed(raw.size());
  Vector g(raw.size());
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < i; ++j) g(packed_index(i, j)) = grad_chol(i, j);
    g(packed_index(i, i)) = grad_chol(i, i) * nn::sigmoid(raw(packed_index(i, i)));
  }
  return g;
}

Vector sample_reparam(const ConceptDistribution& dist, const Vector& eps) {
  return dist.mean + dist.chol.triangularView<Eigen::Lower>() * eps;
}

Vector sample_reparam(const ConceptDistribution& dist, RandomStream& rng) {
  Vector eps(dist.dim());
  for (Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  return sample_reparam(dist, eps);
}

double lr_statistic(const Vector& eta, const Vector& mean, const Matrix& chol) {
  if (eta.size() != mean.size() || chol.rows() != mean.size())
    throw ConfigError("lr_statistic: dimension mismatch");
  const Vector z = chol.triangularView<Eigen::Lower>().solve(eta - mean);
  return z.squaredNorm();
}

double log_density(const Vector& eta, const Vector& mean, const Matrix& chol) {
  const auto d = static_cast<double>(mean.size());
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + lr_statistic(eta, mean, chol));
}

Matrix cholesky_with_jitter(const Matrix& sym) {
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Matrix jittered = sym;
  jittered.diagonal().array() += kJitter;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw LinalgError("covariance block is not positive definite even after adding " + std::to_string(kJitter) +
                    " jitter");
}

namespace {

Matrix gather(const Matrix& m, std::span<const Index> rows, std::span<const Index> cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

/// Square-root factor of a PSD matrix that may have lost definiteness to
/// roundoff: Cholesky, jittered Cholesky, then clipped eigen-decomposition.
Matrix psd_factor(const Matrix& sym) {
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Matrix jittered = sym;
  jittered.diagonal().array() += kJitter;
  llt.compute(jittered);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

ConditionalResult condition(const ConceptDistribution& dist, std::span<const Index> fixed, const Vector& fixed_values) {
  const Index c = dist.dim();
  if (fixed.empty()) throw UsageError("condition: the fixed index set is empty");
  if (static_cast<Index>(fixed.size()) != fixed_values.size())
    throw UsageError("condition: " + std::to_string(fixed.size()) + " indices but " +
                     std::to_string(fixed_values.size()) + " values");
  std::vector<bool> is_fixed(static_cast<std::size_t>(c), false);
  for (Index i : fixed) {
    if (i < 0 || i >= c) throw UsageError("condition: index " + std::to_string(i) + " out of range");
    if (is_fixed[static_cast<std::size_t>(i)]) throw UsageError("condition: index " + std::to_string(i) + " repeated");
    is_fixed[static_cast<std::size_t>(i)] = true;
  }
  if (static_cast<Index>(fixed.size()) == c) throw UsageError("condition: every index is fixed; nothing left to condition");
  if (!fixed_values.allFinite()) throw UsageError("condition: non-finite conditioning values");

  ConditionalResult out;
  for (Index i = 0; i < c; ++i)
    if (!is_fixed[static_cast<std::size_t>(i)]) out.remaining.push_back(i);

  const Matrix sigma = dist.covariance();
  const Matrix s_ss = gather(sigma, fixed, fixed);
  const Matrix s_rs = gather(sigma, out.remaining, fixed);
  const Matrix s_rr = gather(sigma, out.remaining, out.remaining);

  Vector shift(static_cast<Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) shift(static_cast<Index>(k)) = fixed_values(static_cast<Index>(k)) - dist.mean(fixed[k]);

  const Matrix l_ss = cholesky_with_jitter(s_ss);
  const auto l = l_ss.triangularView<Eigen::Lower>();
  // Sigma_SS^-1 x = L^-T L^-1 x.
  const Vector alpha = l.transpose().solve(l.solve(shift));
  const Matrix gain_t = l.transpose().solve(l.solve(s_rs.transpose()));  // Sigma_SS^-1 Sigma_SR

  out.mean.resize(static_cast<Index>(out.remaining.size()));
  for (std::size_t k = 0; k < out.remaining.size(); ++k) out.mean(static_cast<Index>(k)) = dist.mean(out.remaining[k]);
  out.mean += s_rs * alpha;

  Matrix cov = s_rr - s_rs * gain_t;
  out.cov = 0.5 * (cov + cov.transpose());
  out.chol = psd_factor(out.cov);
  return out;
}

namespace {

// Inverse of the factor; columns come from triangular solves against I.
Matrix chol_inverse(const Matrix& chol) {
  return chol.triangularView<Eigen::Lower>().solve(Matrix::Identity(chol.rows(), chol.cols()));
}

}  // namespace

double precision_offdiag_penalty(const Matrix& chol, PenaltyKind kind) {
  const Matrix a = chol_inverse(chol);
  const Matrix precision = a.transpose() * a;
  double total = 0.0;
  for (Index i = 0; i < precision.rows(); ++i)
    for (Index j = 0; j < precision.cols(); ++j)
      if (i != j) total += kind == PenaltyKind::Signed ? precision(i, j) : std::abs(precision(i, j));
  return total;
}

Matrix precision_offdiag_penalty_grad(const Matrix& chol, PenaltyKind kind) {
  const Index c = chol.rows();
  const Matrix a = chol_inverse(chol);
  // d penalty / d P for P = A^T A, with A = L^-1 (symmetric, zero diagonal).
  Matrix gp(c, c);
  if (kind == PenaltyKind::Signed) {
    gp.setOnes();
  } else {
    const Matrix precision = a.transpose() * a;
    gp = precision.unaryExpr([](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); });
  }
  gp.diagonal().setZero();
  const Matrix ga = 2.0 * a * gp;
  // dA = -A dL A  =>  dL-gradient = -A^T G_A A^T.
  Matrix gl = -a.transpose() * ga * a.transpose();
  return gl.triangularView<Eigen::Lower>();
}

Matrix correlation(const Matrix& cov) {
  const Vector inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
  Matrix corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  corr = 0.5 * (corr + corr.transpose());
  corr.diagonal().setOnes();
  return corr;
}

}  // namespace scbm::gauss
