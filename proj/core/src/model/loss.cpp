#include "scbm/model/loss.hpp"

#include <cmath>
#include <string>

#include "scbm/error.hpp"
#include "scbm/nn/mlp.hpp"
#include "scbm/nn/ops.hpp"

namespace scbm {

Batch make_batch(const synth::Dataset& ds, const std::vector<Index>& rows) {
  Batch b;
  const auto n = static_cast<Index>(rows.size());
  b.x.resize(n, ds.num_features());
  b.concepts.resize(n, ds.num_concepts());
  b.labels.resize(rows.size());
  for (Index k = 0; k < n; ++k) {
    const Index r = rows[static_cast<std::size_t>(k)];
    b.x.row(k) = ds.x.row(r);
    b.concepts.row(k) = ds.concept_row(r);
    b.labels[static_cast<std::size_t>(k)] = ds.labels[static_cast<std::size_t>(r)];
  }
  return b;
}

LossOptions loss_options(const TrainConfig& cfg, Variant variant) {
  LossOptions o;
  o.mc_samples = cfg.mc_samples;
  o.lambda1 = cfg.lambda1;
  o.lambda2 = cfg.lambda2_for(variant);
  o.temperature = cfg.temperature;
  o.penalty = cfg.penalty;
  return o;
}

Matrix gumbel_relaxed(const Matrix& eta, const Matrix& uniforms, double temperature) {
  Matrix out(eta.rows(), eta.cols());
  for (Index i = 0; i < eta.rows(); ++i)
    for (Index j = 0; j < eta.cols(); ++j) {
      const double u = uniforms(i, j);
      out(i, j) = nn::sigmoid((eta(i, j) + std::log(u) - std::log1p(-u)) / temperature);
    }
  return out;
}

namespace ops {

nn::Var cholesky_from_raw(nn::Tape& tape, nn::Var raw_row) {
  const Eigen::VectorXd raw = tape.value(raw_row).row(0).transpose();
  return tape.record(gauss::build_cholesky(raw), {raw_row}, [raw_row, raw](nn::Tape& tp, const Matrix& g) {
    if (Matrix* gr = tp.grad_for(raw_row)) *gr += gauss::build_cholesky_backward(raw, g).transpose();
  });
}

nn::Var precision_penalty(nn::Tape& tape, nn::Var chol, gauss::PenaltyKind kind) {
  Matrix out(1, 1);
  out(0, 0) = gauss::precision_offdiag_penalty(tape.value(chol), kind);
  return tape.record(std::move(out), {chol}, [chol, kind](nn::Tape& tp, const Matrix& g) {
    if (Matrix* gl = tp.grad_for(chol)) *gl += g(0, 0) * gauss::precision_offdiag_penalty_grad(tp.value(chol), kind);
  });
}

nn::Var gumbel_bottleneck(nn::Tape& tape, nn::Var eta, const Matrix& uniforms, double temperature,
                          Bottleneck bottleneck) {
  Matrix relaxed = gumbel_relaxed(tape.value(eta), uniforms, temperature);
  Matrix forward = bottleneck == Bottleneck::Relaxed
                       ? relaxed
                       : Matrix((relaxed.array() >= 0.5).cast<double>());
  Matrix slope = relaxed.cwiseProduct((1.0 - relaxed.array()).matrix()) / temperature;
  return tape.record(std::move(forward), {eta}, [eta, slope = std::move(slope)](nn::Tape& tp, const Matrix& g) {
    if (Matrix* ge = tp.grad_for(eta)) *ge += g.cwiseProduct(slope);
  });
}

}  // namespace ops

LossTerms total_loss(ScbmModel& model, const Batch& batch, const LossOptions& opts, RandomStream& rng, nn::Mode mode,
                     nn::ParamStore* grads) {
  const Index n = batch.x.rows();
  const Index c = model.num_concepts();
  const int m = opts.mc_samples;
  if (n == 0) throw UsageError("total_loss: empty batch");
  if (batch.concepts.rows() != n || batch.concepts.cols() != c || static_cast<Index>(batch.labels.size()) != n)
    throw ConfigError("total_loss: batch shapes do not match the model");
  if (m < 1) throw ConfigError("total_loss: M must be >= 1");

  nn::Tape tape;
  nn::Var x = tape.constant(batch.x);
  nn::Var raw = nn::mlp_forward(tape, model.backbone(), model.params(), kBackbonePrefix, x, mode, rng);
  nn::Var mu = nn::cols(tape, raw, 0, c);
  nn::Var head_w = tape.param(model.params(), kHeadWeight);
  nn::Var head_b = tape.param(model.params(), kHeadBias);

  const bool amortized = model.variant() == Variant::Amortized;
  const bool use_penalty = opts.lambda2 > 0.0 && model.variant() != Variant::HardCbm;

  nn::Var shared_chol_t{};
  nn::Var shared_chol{};
  if (model.variant() == Variant::Global) {
    shared_chol = ops::cholesky_from_raw(tape, tape.param(model.params(), kGlobalCholesky));
    shared_chol_t = nn::transpose(tape, shared_chol);
  } else if (model.variant() == Variant::HardCbm) {
    shared_chol = tape.constant(kHardCbmScale * Matrix::Identity(c, c));
    shared_chol_t = shared_chol;
  }
  nn::Var packed{};
  if (amortized) packed = nn::cols(tape, raw, c, gauss::packed_size(c));

  const double inv_n = 1.0 / static_cast<double>(n);
  LossTerms terms;
  std::vector<nn::Var> pieces;
  pieces.reserve(static_cast<std::size_t>(3 * n + 1));

  for (Index b = 0; b < n; ++b) {
    nn::Var mu_b = nn::row(tape, mu, b);
    nn::Var chol_t = shared_chol_t;
    nn::Var chol = shared_chol;
    if (amortized) {
      chol = ops::cholesky_from_raw(tape, nn::row(tape, packed, b));
      chol_t = nn::transpose(tape, chol);
    }
    const Matrix eps = rng.normal_matrix(m, c);
    const Matrix uniforms = rng.uniform_matrix(m, c);

    nn::Var eta = nn::add_row(tape, nn::matmul(tape, tape.constant(eps), chol_t), mu_b);

    const RowVector target_c = batch.concepts.row(b);
    nn::Var nll = nn::scale(tape, nn::logsumexp(tape, nn::bernoulli_loglik_rows(tape, eta, target_c)), -inv_n);
    terms.concepts += tape.value(nll)(0, 0);
    pieces.push_back(nll);

    if (opts.lambda1 > 0.0) {
      nn::Var hard = ops::gumbel_bottleneck(tape, eta, uniforms, opts.temperature, opts.bottleneck);
      nn::Var logits = nn::add_row(tape, nn::matmul(tape, hard, head_w), head_b);
      nn::Var ce = nn::mean_softmax_nll(tape, logits, batch.labels[static_cast<std::size_t>(b)]);
      terms.target += inv_n * tape.value(ce)(0, 0);
      pieces.push_back(nn::scale(tape, ce, opts.lambda1 * inv_n));
    }
    if (use_penalty && amortized) {
      nn::Var pen = ops::precision_penalty(tape, chol, opts.penalty);
      terms.penalty += inv_n * tape.value(pen)(0, 0);
      pieces.push_back(nn::scale(tape, pen, opts.lambda2 * inv_n));
    }
  }
  if (use_penalty && !amortized) {
    nn::Var pen = ops::precision_penalty(tape, shared_chol, opts.penalty);
    terms.penalty = tape.value(pen)(0, 0);
    pieces.push_back(nn::scale(tape, pen, opts.lambda2));
  }

  nn::Var total = pieces.front();
  for (std::size_t k = 1; k < pieces.size(); ++k) total = nn::add(tape, total, pieces[k]);
  terms.total = tape.value(total)(0, 0);
  if (!std::isfinite(terms.total)) throw TrainingError("total_loss: non-finite loss");

  if (grads) *grads = tape.backward(total, model.params());
  return terms;
}

double concept_nll_from_samples(const RowVector& concepts, const Matrix& eta) {
  nn::Tape tape;
  nn::Var e = tape.constant(eta);
  return -tape.value(nn::logsumexp(tape, nn::bernoulli_loglik_rows(tape, e, concepts)))(0, 0);
}

double concept_nll(const RowVector& concepts, const gauss::ConceptDistribution& dist, int mc_samples,
                   RandomStream& rng) {
  if (mc_samples < 1) throw ConfigError("concept_nll: M must be >= 1");
  const Matrix eps = rng.normal_matrix(mc_samples, dist.dim());
  Matrix eta = eps * dist.chol.transpose();
  eta.rowwise() += dist.mean.transpose();
  return concept_nll_from_samples(concepts, eta);
}

Matrix sample_hard_concepts(const Matrix& eta, double temperature, RandomStream& rng) {
  if (!(temperature > 0.0)) throw ConfigError("sample_hard_concepts: temperature must be > 0");
  const Matrix u = rng.uniform_matrix(eta.rows(), eta.cols());
  return (gumbel_relaxed(eta, u, temperature).array() >= 0.5).cast<double>();
}

double target_term(int label, const Matrix& concept_samples, const ScbmModel& model) {
  const Matrix probs = model.head_probs(concept_samples);
  if (label < 0 || label >= probs.cols()) throw ConfigError("target_term: label out of range");
  return -std::log(probs.col(label).mean());
}

}  // namespace scbm
