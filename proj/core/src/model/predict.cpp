#include "scbm/model/predict.hpp"

#include "scbm/error.hpp"
#include "scbm/model/loss.hpp"
#include "scbm/nn/ops.hpp"

namespace scbm {

Prediction predict_one(const ScbmModel& model, const gauss::ConceptDistribution& dist, const PredictOptions& opts,
                       RandomStream& rng) {
  if (opts.mc_samples < 1) throw ConfigError("predict: M must be >= 1");
  const Index c = dist.dim();
  const Matrix eps = rng.normal_matrix(opts.mc_samples, c);
  const Matrix uniforms = rng.uniform_matrix(opts.mc_samples, c);
  Matrix eta = eps * dist.chol.transpose();
  eta.rowwise() += dist.mean.transpose();

  Prediction out;
  if (opts.prob_mode == ProbMode::McMean) {
    out.concept_probs = eta.unaryExpr([](double v) { return nn::sigmoid(v); }).colwise().mean().transpose();
  } else {
    out.concept_probs = dist.mean.unaryExpr([](double v) { return nn::sigmoid(v); });
  }
  const Matrix hard = (gumbel_relaxed(eta, uniforms, opts.temperature).array() >= 0.5).cast<double>();
  out.target_probs = model.head_probs(hard).colwise().mean().transpose();
  return out;
}

std::vector<Prediction> predict(const ScbmModel& model, const Matrix& x, const std::vector<Index>& row_ids,
                                const PredictOptions& opts, std::uint64_t seed) {
  if (static_cast<Index>(row_ids.size()) != x.rows()) throw ConfigError("predict: one row id per input row required");
  const auto dists = model.concept_head(x);
  std::vector<Prediction> out;
  out.reserve(dists.size());
  for (std::size_t r = 0; r < dists.size(); ++r) {
    RandomStream rng = instance_stream(seed, static_cast<std::uint64_t>(row_ids[r]));
    out.push_back(predict_one(model, dists[r], opts, rng));
  }
  return out;
}

Matrix concept_prob_matrix(const std::vector<Prediction>& preds) {
  if (preds.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Index>(preds.size()), preds.front().concept_probs.size());
  for (std::size_t r = 0; r < preds.size(); ++r) m.row(static_cast<Index>(r)) = preds[r].concept_probs.transpose();
  return m;
}

Matrix target_prob_matrix(const std::vector<Prediction>& preds) {
  if (preds.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Index>(preds.size()), preds.front().target_probs.size());
  for (std::size_t r = 0; r < preds.size(); ++r) m.row(static_cast<Index>(r)) = preds[r].target_probs.transpose();
  return m;
}

}  // namespace scbm
