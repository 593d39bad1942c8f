#pragma once

#include <Eigen/Core>

#include "scbm/nn/tape.hpp"

// Differentiable primitives. Shapes are checked eagerly and reported as
// ConfigError.
namespace scbm::nn {

Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double k);
/// a + 1·row, broadcasting a 1×n row over every row of a.
Var add_row(Tape& t, Var a, Var row);
/// Elementwise product with a constant matrix (dropout masks).
Var mul_const(Tape& t, Var a, const Matrix& c);
Var sum_all(Tape& t, Var a);

Var row(Tape& t, Var a, Eigen::Index r);
Var cols(Tape& t, Var a, Eigen::Index start, Eigen::Index count);

Var relu(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);

/// Column-wise batch normalization with batch statistics (biased variance).
/// `batch_mean` / `batch_var` receive the statistics used.
Var batch_norm_train(Tape& t, Var x, Var gamma, Var beta, double eps, Eigen::RowVectorXd* batch_mean,
                     Eigen::RowVectorXd* batch_var);

/// log Σ exp over all entries of a column; returns 1×1.
Var logsumexp(Tape& t, Var a);

/// Per-row Bernoulli log-likelihood Σ_i [c_i·η_i − softplus(η_i)] of binary
/// targets `c` (1×C) under logits `eta` (M×C). Returns M×1.
Var bernoulli_loglik_rows(Tape& t, Var eta, const Eigen::RowVectorXd& c);

/// −log( (1/M) Σ_m softmax(logits_m)[label] ) for logits M×K. Returns 1×1.
Var mean_softmax_nll(Tape& t, Var logits, Eigen::Index label);

double softplus(double x);
double sigmoid(double x);
double log_sigmoid(double x);

}  // namespace scbm::nn
