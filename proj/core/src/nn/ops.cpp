#include "scbm/nn/ops.hpp"

#include <cmath>
#include <string>

#include "scbm/error.hpp"

namespace scbm::nn {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) throw ConfigError(std::string(op) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

}  // namespace

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) { return -softplus(-x); }

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.cols() == B.rows(), "matmul", A, B);
  return t.record(A * B, {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) ga->noalias() += g * tp.value(b).transpose();
    if (Matrix* gb = tp.grad_for(b)) gb->noalias() += tp.value(a).transpose() * g;
  });
}

Var transpose(Tape& t, Var a) {
  return t.record(t.value(a).transpose(), {a}, [a](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += g.transpose();
  });
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add", A, B);
  return t.record(A + B, {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += g;
    if (Matrix* gb = tp.grad_for(b)) *gb += g;
  });
}

Var scale(Tape& t, Var a, double k) {
  return t.record(t.value(a) * k, {a}, [a, k](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += k * g;
  });
}

Var add_row(Tape& t, Var a, Var r) {
  const Matrix& A = t.value(a);
  const Matrix& R = t.value(r);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row", A, R);
  Matrix out = A;
  out.rowwise() += R.row(0);
  return t.record(std::move(out), {a, r}, [a, r](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += g;
    if (Matrix* gr = tp.grad_for(r)) *gr += g.colwise().sum();
  });
}

Var mul_const(Tape& t, Var a, const Matrix& c) {
  const Matrix& A = t.value(a);
  require(A.rows() == c.rows() && A.cols() == c.cols(), "mul_const", A, c);
  return t.record(A.cwiseProduct(c), {a}, [a, c](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += g.cwiseProduct(c);
  });
}

Var sum_all(Tape& t, Var a) {
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) ga->array() += g(0, 0);
  });
}

Var row(Tape& t, Var a, Eigen::Index r) {
  const Matrix& A = t.value(a);
  if (r < 0 || r >= A.rows()) throw ConfigError("row: index " + std::to_string(r) + " out of range for " + shape(A));
  return t.record(A.row(r), {a}, [a, r](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) ga->row(r) += g.row(0);
  });
}

Var cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& A = t.value(a);
  if (start < 0 || count < 0 || start + count > A.cols())
    throw ConfigError("cols: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                      ") out of range for " + shape(A));
  return t.record(A.middleCols(start, count), {a}, [a, start, count](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) ga->middleCols(start, count) += g;
  });
}

Var relu(Tape& t, Var a) {
  return t.record(t.value(a).cwiseMax(0.0), {a}, [a](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += (tp.value(a).array() > 0.0).select(g.array(), 0.0).matrix();
  });
}

Var sigmoid(Tape& t, Var a) {
  Matrix out = t.value(a).unaryExpr([](double x) { return sigmoid(x); });
  Matrix s = out;
  return t.record(std::move(out), {a}, [a, s = std::move(s)](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
  });
}

Var batch_norm_train(Tape& t, Var x, Var gamma, Var beta, double eps, Eigen::RowVectorXd* batch_mean,
                     Eigen::RowVectorXd* batch_var) {
  const Matrix& X = t.value(x);
  const Matrix& G = t.value(gamma);
  const Matrix& B = t.value(beta);
  require(G.rows() == 1 && G.cols() == X.cols(), "batch_norm", X, G);
  require(B.rows() == 1 && B.cols() == X.cols(), "batch_norm", X, B);
  const double n = static_cast<double>(X.rows());
  Eigen::RowVectorXd mean = X.colwise().mean();
  Matrix centered = X.rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
  Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Matrix xhat = centered * inv_std.asDiagonal();
  Matrix out = xhat * G.row(0).asDiagonal();
  out.rowwise() += B.row(0);
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std, n](Tape& tp, const Matrix& g) {
                    if (Matrix* gg = tp.grad_for(gamma)) *gg += g.cwiseProduct(xhat).colwise().sum();
                    if (Matrix* gb = tp.grad_for(beta)) *gb += g.colwise().sum();
                    if (Matrix* gx = tp.grad_for(x)) {
                      Matrix dxhat = g * tp.value(gamma).row(0).asDiagonal();
                      Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
                      Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
                      Matrix inner = n * dxhat;
                      inner.rowwise() -= sum_d;
                      inner -= xhat * sum_dx.asDiagonal();
                      *gx += inner * (inv_std / n).asDiagonal();
                    }
                  });
}

Var logsumexp(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  const double m = A.maxCoeff();
  const double s = (A.array() - m).exp().sum();
  Matrix out(1, 1);
  out(0, 0) = m + std::log(s);
  Matrix weights = (A.array() - out(0, 0)).exp().matrix();
  return t.record(std::move(out), {a}, [a, weights = std::move(weights)](Tape& tp, const Matrix& g) {
    if (Matrix* ga = tp.grad_for(a)) *ga += g(0, 0) * weights;
  });
}

Var bernoulli_loglik_rows(Tape& t, Var eta, const Eigen::RowVectorXd& c) {
  const Matrix& E = t.value(eta);
  if (c.size() != E.cols())
    throw ConfigError("bernoulli_loglik_rows: " + std::to_string(c.size()) + " targets for " + shape(E) + " logits");
  Matrix out(E.rows(), 1);
  for (Eigen::Index m = 0; m < E.rows(); ++m) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < E.cols(); ++i) s += c(i) * E(m, i) - softplus(E(m, i));
    out(m, 0) = s;
  }
  return t.record(std::move(out), {eta}, [eta, c](Tape& tp, const Matrix& g) {
    if (Matrix* ge = tp.grad_for(eta)) {
      const Matrix& E = tp.value(eta);
      for (Eigen::Index m = 0; m < E.rows(); ++m)
        for (Eigen::Index i = 0; i < E.cols(); ++i) (*ge)(m, i) += g(m, 0) * (c(i) - sigmoid(E(m, i)));
    }
  });
}

Var mean_softmax_nll(Tape& t, Var logits, Eigen::Index label) {
  const Matrix& Z = t.value(logits);
  if (label < 0 || label >= Z.cols())
    throw ConfigError("mean_softmax_nll: label " + std::to_string(label) + " out of range for " + shape(Z));
  Matrix probs(Z.rows(), Z.cols());
  for (Eigen::Index m = 0; m < Z.rows(); ++m) {
    const double mx = Z.row(m).maxCoeff();
    Eigen::RowVectorXd e = (Z.row(m).array() - mx).exp();
    probs.row(m) = e / e.sum();
  }
  const double mean_py = probs.col(label).mean();
  Matrix out(1, 1);
  out(0, 0) = -std::log(mean_py);
  return t.record(std::move(out), {logits}, [logits, label, probs = std::move(probs), mean_py](Tape& tp, const Matrix& g) {
    if (Matrix* gz = tp.grad_for(logits)) {
      const double scale = -g(0, 0) / (mean_py * static_cast<double>(probs.rows()));
      for (Eigen::Index m = 0; m < probs.rows(); ++m) {
        const double py = probs(m, label);
        for (Eigen::Index k = 0; k < probs.cols(); ++k)
          (*gz)(m, k) += scale * py * ((k == label ? 1.0 : 0.0) - probs(m, k));
      }
    }
  });
}

}  // namespace scbm::nn
