#pragma once

// Independent reference computations used by the tests. Nothing here calls into
// the library's numerical code.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "scbm/random_stream.hpp"

namespace scbm::testing {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Random SPD matrix A A^T / d + 0.1 I with off-diagonal structure.
inline Matrix random_spd(Eigen::Index d, RandomStream& rng) {
  Matrix a = rng.normal_matrix(d, d);
  Matrix s = a * a.transpose() / static_cast<double>(d);
  s.diagonal().array() += 0.1;
  return s;
}

inline double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Dense-inverse Gaussian conditioning: mean and covariance of eta_R | eta_S = v.
struct DenseConditional {
  Vector mean;
  Matrix cov;
};

inline DenseConditional dense_condition(const Vector& mu, const Matrix& sigma, const std::vector<Eigen::Index>& s,
                                        const Vector& v) {
  std::vector<Eigen::Index> r;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    bool in_s = false;
    for (auto j : s) in_s |= j == i;
    if (!in_s) r.push_back(i);
  }
  const auto ns = static_cast<Eigen::Index>(s.size());
  const auto nr = static_cast<Eigen::Index>(r.size());
  Matrix sss(ns, ns), srs(nr, ns), srr(nr, nr);
  Vector ms(ns), mr(nr);
  for (Eigen::Index i = 0; i < ns; ++i) {
    ms(i) = mu(s[i]);
    for (Eigen::Index j = 0; j < ns; ++j) sss(i, j) = sigma(s[i], s[j]);
  }
  for (Eigen::Index i = 0; i < nr; ++i) {
    mr(i) = mu(r[i]);
    for (Eigen::Index j = 0; j < ns; ++j) srs(i, j) = sigma(r[i], s[j]);
    for (Eigen::Index j = 0; j < nr; ++j) srr(i, j) = sigma(r[i], r[j]);
  }
  const Matrix inv = sss.inverse();
  return {mr + srs * inv * (v - ms), srr - srs * inv * srs.transpose()};
}

/// log N(x; mu, sigma) from an explicit inverse and determinant.
inline double dense_log_density(const Vector& x, const Vector& mu, const Matrix& sigma) {
  const double k = static_cast<double>(x.size());
  const Vector d = x - mu;
  return -0.5 * (k * std::log(2.0 * M_PI) + std::log(sigma.determinant()) + d.dot(sigma.inverse() * d));
}

}  // namespace scbm::testing
