#pragma once

#include <cstdint>
#include <vector>

#include "scbm/model/scbm_model.hpp"
#include "scbm/random_stream.hpp"

namespace scbm {

struct PredictOptions {
  int mc_samples = 100;
  double temperature = 1.0;
  ProbMode prob_mode = ProbMode::McMean;
};

struct Prediction {
  Eigen::VectorXd concept_probs;  // C
  Eigen::VectorXd target_probs;   // K
};

/// Stream tag for per-instance prediction draws.
inline constexpr std::uint64_t kPredictStream = 0x9e3d;

/// Stream used for instance `row` of a prediction or intervention run. Every
/// interface that predicts for a dataset row uses this stream so their numbers
/// agree exactly.
inline RandomStream instance_stream(std::uint64_t seed, std::uint64_t row) {
  return RandomStream::derive(seed, {kPredictStream, row});
}

/// Draws M x C standard normals then M x C uniforms from `rng`. Concept
/// probabilities are the MC mean of sigmoid(eta) (or sigmoid(mu)); target
/// probabilities average softmax(g_psi(c_m)) over hard Gumbel samples.
Prediction predict_one(const ScbmModel& model, const gauss::ConceptDistribution& dist, const PredictOptions& opts,
                       RandomStream& rng);

/// One prediction per row of `x`; row r of `x` uses instance_stream(seed, row_ids[r]).
std::vector<Prediction> predict(const ScbmModel& model, const Matrix& x, const std::vector<Index>& row_ids,
                                const PredictOptions& opts, std::uint64_t seed);

/// Stacks the per-instance probabilities into N x C and N x K matrices.
Matrix concept_prob_matrix(const std::vector<Prediction>& preds);
Matrix target_prob_matrix(const std::vector<Prediction>& preds);

}  // namespace scbm
