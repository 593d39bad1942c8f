#pragma once

#include <vector>

#include "scbm/model/scbm_model.hpp"
#include "scbm/nn/tape.hpp"
#include "scbm/random_stream.hpp"
#include "scbm/synth/dataset.hpp"

namespace scbm {

struct Batch {
  Matrix x;         // B x p
  Matrix concepts;  // B x C, 0/1
  std::vector<int> labels;
};

Batch make_batch(const synth::Dataset& ds, const std::vector<Index>& rows);

struct LossOptions {
  int mc_samples = 100;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double temperature = 1.0;
  gauss::PenaltyKind penalty = gauss::PenaltyKind::Signed;
  Bottleneck bottleneck = Bottleneck::StraightThrough;
};

LossOptions loss_options(const TrainConfig& cfg, Variant variant);

/// Batch means of the three loss terms and their weighted total.
struct LossTerms {
  double total = 0.0;
  double concepts = 0.0;
  double target = 0.0;
  double penalty = 0.0;
};

/// concept NLL + lambda1 * target CE + lambda2 * precision penalty, each
/// averaged over the batch. The penalty is skipped for the hard CBM and for
/// lambda2 == 0. Draw order from `rng`: dropout masks, then per instance an
/// M x C normal block followed by an M x C uniform block. When `grads` is
/// non-null it receives d total / d params. Throws TrainingError on a
/// non-finite loss.
LossTerms total_loss(ScbmModel& model, const Batch& batch, const LossOptions& opts, RandomStream& rng, nn::Mode mode,
                     nn::ParamStore* grads);

/// -logsumexp_m sum_i log p(c_i | eta_mi) for logit samples `eta` (M x C).
/// The additive log M constant is omitted.
double concept_nll_from_samples(const RowVector& concepts, const Matrix& eta);

/// Monte Carlo concept NLL with M reparameterized samples.
double concept_nll(const RowVector& concepts, const gauss::ConceptDistribution& dist, int mc_samples,
                   RandomStream& rng);

/// Binary Gumbel-softmax relaxation sigma((eta + log u - log(1-u)) / tau).
Matrix gumbel_relaxed(const Matrix& eta, const Matrix& uniforms, double temperature);

/// Hard {0,1} samples: the relaxation thresholded at 0.5 (uniforms drawn from
/// `rng`, same shape as `eta`).
Matrix sample_hard_concepts(const Matrix& eta, double temperature, RandomStream& rng);

/// CE(y, mean_m softmax(g_psi(c_m))) for concept samples (M x C).
double target_term(int label, const Matrix& concept_samples, const ScbmModel& model);

namespace ops {

/// Packed raw row (1 x C(C+1)/2) -> lower-triangular factor (C x C).
nn::Var cholesky_from_raw(nn::Tape& tape, nn::Var raw_row);
/// Off-diagonal precision sum of a factor; 1 x 1.
nn::Var precision_penalty(nn::Tape& tape, nn::Var chol, gauss::PenaltyKind kind);
/// Straight-through (or relaxed) Gumbel bottleneck over logits (M x C).
nn::Var gumbel_bottleneck(nn::Tape& tape, nn::Var eta, const Matrix& uniforms, double temperature,
                          Bottleneck bottleneck);

}  // namespace ops

}  // namespace scbm
