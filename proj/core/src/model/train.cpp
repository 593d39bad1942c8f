#include "scbm/model/train.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "scbm/error.hpp"
#include "scbm/metrics/metrics.hpp"
#include "scbm/model/loss.hpp"
#include "scbm/model/predict.hpp"
#include "scbm/nn/adam.hpp"

namespace scbm {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5a1f;
constexpr std::uint64_t kLossStream = 0x1055;
constexpr std::uint64_t kValStream = 0x7a11;

}  // namespace

Matrix empirical_global_cholesky(const Matrix& train_concepts) {
  if (train_concepts.rows() < 2) throw UsageError("global init: need at least two training rows");
  const Matrix centered = train_concepts.rowwise() - train_concepts.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(train_concepts.rows() - 1);
  cov *= 4.0;
  cov.diagonal().array() += 1e-3;
  return gauss::cholesky_with_jitter(cov);
}

EpochRecord validate_model(const ScbmModel& model, const synth::Dataset& ds, const std::vector<Index>& rows,
                           const TrainConfig& cfg) {
  EpochRecord rec;
  if (rows.empty()) return rec;
  const synth::Dataset val = ds.subset(rows);
  PredictOptions popts{cfg.mc_samples, cfg.temperature, cfg.prob_mode};
  const std::uint64_t seed = RandomStream::derive(cfg.seed, {kValStream}).next_u64();
  const auto preds = predict(model, val.x, rows, popts, seed);
  Matrix concepts(val.size(), val.num_concepts());
  for (Index r = 0; r < val.size(); ++r) concepts.row(r) = val.concept_row(r);
  rec.val_target_accuracy = metrics::target_accuracy(target_prob_matrix(preds), val.labels);
  rec.val_concept_accuracy = metrics::concept_accuracy(concept_prob_matrix(preds), concepts);

  const auto dists = model.concept_head(val.x);
  double nll = 0.0;
  for (std::size_t r = 0; r < dists.size(); ++r) {
    RandomStream rng = RandomStream::derive(seed, {static_cast<std::uint64_t>(rows[r])});
    nll += concept_nll(concepts.row(static_cast<Index>(r)), dists[r], cfg.mc_samples, rng);
  }
  rec.val_concept_nll = nll / static_cast<double>(dists.size());
  return rec;
}

Checkpoint train(const synth::Dataset& ds, Variant variant, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  ds.validate();
  std::vector<Index> train_rows = ds.rows(synth::Split::Train);
  const std::vector<Index> val_rows = ds.rows(synth::Split::Validation);
  if (train_rows.empty()) throw UsageError("train: the training split is empty");

  Checkpoint ck;
  ck.config = cfg;
  ck.model = ScbmModel(variant, ds.num_features(), ds.num_concepts(), cfg.arch, cfg.seed);
  if (variant == Variant::Global && cfg.global_init == GlobalInit::Empirical) {
    const Batch all = make_batch(ds, train_rows);
    ck.model.set_global_cholesky(empirical_global_cholesky(all.concepts));
  }

  LossOptions lopts = loss_options(cfg, variant);
  nn::AdamState adam(ck.model.params(), nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  nn::ParamStore best = ck.model.params();
  bool have_best = false;
  EpochRecord best_rec;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RandomStream shuffle = RandomStream::derive(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
    std::vector<Index> order = train_rows;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      // A single-row batch has no batch statistics to normalize with.
      if (cfg.arch.batch_norm && end - start < 2) continue;
      const std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = make_batch(ds, rows);
      RandomStream rng = RandomStream::derive(
          cfg.seed, {kLossStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batches)});
      nn::ParamStore grads;
      try {
        const LossTerms terms = total_loss(ck.model, batch, lopts, rng, nn::Mode::Train, &grads);
        nn::adam_step(ck.model.params(), grads, adam);
        rec.train_loss += terms.total;
        rec.train_concept_nll += terms.concepts;
        rec.train_target += terms.target;
        rec.train_penalty += terms.penalty;
      } catch (const TrainingError& e) {
        throw TrainingError("diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) +
                            ": " + e.what());
      }
      ++batches;
    }
    if (batches > 0) {
      const auto nb = static_cast<double>(batches);
      rec.train_loss /= nb;
      rec.train_concept_nll /= nb;
      rec.train_target /= nb;
      rec.train_penalty /= nb;
    }
    const EpochRecord val = validate_model(ck.model, ds, val_rows, cfg);
    rec.val_target_accuracy = val.val_target_accuracy;
    rec.val_concept_accuracy = val.val_concept_accuracy;
    rec.val_concept_nll = val.val_concept_nll;
    ck.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    const bool better = !have_best || val_rows.empty() || rec.val_target_accuracy > best_rec.val_target_accuracy ||
                        (rec.val_target_accuracy == best_rec.val_target_accuracy &&
                         rec.val_concept_nll < best_rec.val_concept_nll);
    if (better) {
      best = ck.model.params();
      best_rec = rec;
      have_best = true;
      ck.best_epoch = epoch;
    }
  }
  ck.model.params() = std::move(best);

  const Batch all = make_batch(ds, train_rows);
  ck.percentiles = intervention::build_percentile_table(ck.model, all.x);
  return ck;
}

}  // namespace scbm
