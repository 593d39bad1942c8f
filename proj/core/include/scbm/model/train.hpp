#pragma once

#include <functional>
#include <vector>

#include "scbm/intervention/percentile.hpp"
#include "scbm/model/config.hpp"
#include "scbm/model/scbm_model.hpp"
#include "scbm/synth/dataset.hpp"

namespace scbm {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_concept_nll = 0.0;
  double train_target = 0.0;
  double train_penalty = 0.0;
  double val_target_accuracy = 0.0;
  double val_concept_accuracy = 0.0;
  double val_concept_nll = 0.0;
};

struct Checkpoint {
  ScbmModel model;
  TrainConfig config;
  intervention::PercentileTable percentiles;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0: the initial parameters were kept
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Factor of 4 * cov(train concepts) + 1e-3 I, the global-variant initial covariance.
Matrix empirical_global_cholesky(const Matrix& train_concepts);

/// Mini-batch Adam on total_loss over the train split, validation after every
/// epoch, best-validation parameters returned (target accuracy, then lower
/// concept NLL). Throws TrainingError naming the epoch and batch on divergence.
Checkpoint train(const synth::Dataset& ds, Variant variant, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Validation metrics of `model` on the given rows (prediction streams keyed by row).
EpochRecord validate_model(const ScbmModel& model, const synth::Dataset& ds, const std::vector<Index>& rows,
                           const TrainConfig& cfg);

}  // namespace scbm
