#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "scbm/random_stream.hpp"

namespace scbm::gauss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Floor added to the softplus-mapped Cholesky diagonal.
inline constexpr double kCholeskyDiagFloor = 1e-6;
/// Diagonal jitter for the single retry of a failed factorization.
inline constexpr double kJitter = 1e-9;

/// Gaussian over concept logits, N(mean, chol * chol^T).
struct ConceptDistribution {
  Vector mean;
  Matrix chol;  // lower triangular, strictly positive diagonal

  Index dim() const { return mean.size(); }
  Matrix covariance() const { return chol * chol.transpose(); }
  /// Throws ConfigError on shape mismatch, non-finite entries, non-zero upper
  /// triangle or a non-positive diagonal.
  void validate() const;
};

/// Distribution of the remaining logits after fixing the logits of a subset.
struct ConditionalResult {
  Vector mean;
  Matrix cov;
  Matrix chol;                  // factor F with F F^T = cov
  std::vector<Index> remaining;  // original index of each remaining position, ascending
};

inline Index packed_size(Index dim) { return dim * (dim + 1) / 2; }
/// Row-major position of (row, col), col <= row, in a packed lower triangle.
inline Index packed_index(Index row, Index col) { return row * (row + 1) / 2 + col; }
/// Dimension C with C(C+1)/2 == packed; throws ConfigError when there is none.
Index dim_from_packed(Index packed);

/// Packed raw values -> lower-triangular factor. Off-diagonals are copied,
/// diagonals pass through softplus(.) + kCholeskyDiagFloor.
Matrix build_cholesky(const Vector& raw);
/// Inverse of build_cholesky for a factor whose diagonal exceeds the floor.
Vector unbuild_cholesky(const Matrix& chol);
/// Chain rule through build_cholesky: d loss / d raw given d loss / d L
/// (only the lower triangle of `grad_chol` is read).
Vector build_cholesky_backward(const Vector& raw, const Matrix& grad_chol);

Vector sample_reparam(const ConceptDistribution& dist, RandomStream& rng);
/// mean + chol * eps for a caller-supplied standard-normal draw.
Vector sample_reparam(const ConceptDistribution& dist, const Vector& eps);

double log_density(const Vector& eta, const Vector& mean, const Matrix& chol);

/// -2 (log p(eta) - log p(mean)), i.e. the squared Mahalanobis distance.
double lr_statistic(const Vector& eta, const Vector& mean, const Matrix& chol);

/// Cholesky factor of a symmetric matrix with one jittered retry; throws
/// LinalgError if both attempts fail.
Matrix cholesky_with_jitter(const Matrix& sym);

/// Conditions the logits outside `fixed` on eta[fixed] = `fixed_values`.
/// Throws UsageError when `fixed` is empty, covers every index, repeats an
/// index or is out of range; LinalgError when Sigma_SS is numerically singular.
ConditionalResult condition(const ConceptDistribution& dist, std::span<const Index> fixed, const Vector& fixed_values);

enum class PenaltyKind {
  Signed,    // sum_{i != j} (Sigma^-1)_ij
  Absolute,  // sum_{i != j} |(Sigma^-1)_ij|
};

/// Sum of the off-diagonal entries of the precision matrix (L L^T)^-1, with
/// the inverse formed from triangular solves.
double precision_offdiag_penalty(const Matrix& chol, PenaltyKind kind = PenaltyKind::Signed);
/// Gradient of precision_offdiag_penalty with respect to the lower triangle of
/// `chol` (upper triangle of the result is zero).
Matrix precision_offdiag_penalty_grad(const Matrix& chol, PenaltyKind kind = PenaltyKind::Signed);

/// corr_ij = Sigma_ij / sqrt(Sigma_ii Sigma_jj), diagonal exactly one.
Matrix correlation(const Matrix& cov);

}  // namespace scbm::gauss
