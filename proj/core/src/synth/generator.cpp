#include "scbm/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>

#include "scbm/error.hpp"
#include "scbm/random_stream.hpp"

namespace scbm::synth {
namespace {

// Independent streams per generation step so that changing one dimension does
// not reshuffle the draws of unrelated steps.
enum StreamId : std::uint64_t {
  kStreamW = 1,
  kStreamDelta,
  kStreamLogits,
  kStreamCovariateNet,
  kStreamNoise,
  kStreamLabelMap,
  kStreamSplit,
};

Matrix scaled_normal(RandomStream& rng, Index rows, Index cols) {
  return rng.normal_matrix(rows, cols) / std::sqrt(static_cast<double>(rows));
}

}  // namespace

SynthConfig SynthConfig::preset(const std::string& name, std::uint64_t seed) {
  if (name == "paper") return paper(seed);
  if (name == "desk") return desk(seed);
  throw ConfigError("unknown data preset '" + name + "' (expected paper or desk)");
}

void SynthConfig::validate() const {
  if (n < 1 || p < 1 || c < 1 || rank < 1) throw ConfigError("synth: n, p, c and rank must all be >= 1");
}

Dataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n;
  const Index c = cfg.c;

  RandomStream rng_w = RandomStream::derive(cfg.seed, {kStreamW});
  const Matrix w = rng_w.normal_matrix(c, cfg.rank);
  RandomStream rng_delta = RandomStream::derive(cfg.seed, {kStreamDelta});
  Eigen::VectorXd delta(c);
  for (Index i = 0; i < c; ++i) delta(i) = rng_delta.uniform();
  Matrix sigma = w * w.transpose();
  sigma.diagonal() += delta;

  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw LinalgError("synth: generated covariance is not positive definite");
  const Matrix chol = llt.matrixL();

  RandomStream rng_h = RandomStream::derive(cfg.seed, {kStreamLogits});
  Matrix logits = rng_h.normal_matrix(n, c) * chol.transpose();

  Dataset ds;
  ds.concepts = (logits.array() >= 0.0).cast<std::uint8_t>();

  // Covariate map h: C -> width -> width -> p, ReLU hidden layers, no biases.
  const Index width = std::max(cfg.p, 2 * c);
  RandomStream rng_net = RandomStream::derive(cfg.seed, {kStreamCovariateNet});
  const Matrix w1 = scaled_normal(rng_net, c, width);
  const Matrix w2 = scaled_normal(rng_net, width, width);
  const Matrix w3 = scaled_normal(rng_net, width, cfg.p);

  RandomStream rng_noise = RandomStream::derive(cfg.seed, {kStreamNoise});
  ds.x.resize(n, cfg.p);
  constexpr Index kChunk = 2048;
  for (Index start = 0; start < n; start += kChunk) {
    const Index rows = std::min(kChunk, n - start);
    Matrix h1 = (logits.middleRows(start, rows) * w1).cwiseMax(0.0);
    Matrix h2 = (h1 * w2).cwiseMax(0.0);
    ds.x.middleRows(start, rows) = h2 * w3 + rng_noise.normal_matrix(rows, cfg.p);
  }

  RandomStream rng_g = RandomStream::derive(cfg.seed, {kStreamLabelMap});
  Eigen::VectorXd g_weights(c);
  for (Index i = 0; i < c; ++i) g_weights(i) = rng_g.normal();
  const Eigen::VectorXd scores = ds.concepts.cast<double>() * g_weights;
  // y = 1{g(c) >= median}. Concept vectors repeat, so many rows can share the
  // median score; those ties are resolved by a seeded random order so that
  // exactly floor(N/2) rows get label 0.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<std::uint64_t> tie_key(static_cast<std::size_t>(n));
  for (auto& k : tie_key) k = rng_g.next_u64();
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) < scores(b);
    const auto ka = tie_key[static_cast<std::size_t>(a)];
    const auto kb = tie_key[static_cast<std::size_t>(b)];
    return ka != kb ? ka < kb : a < b;
  });
  ds.labels.assign(static_cast<std::size_t>(n), 1);
  for (Index k = 0; k < n / 2; ++k) ds.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 0;

  ds.logits = std::move(logits);
  ds.sigma = std::move(sigma);
  ds.split.assign(static_cast<std::size_t>(n), Split::Unassigned);
  split(ds, RandomStream::derive(cfg.seed, {kStreamSplit}).next_u64());
  return ds;
}

void split(Dataset& ds, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(ds.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  ds.split.assign(n, Split::Test);
  for (std::size_t k = 0; k < n_train; ++k) ds.split[order[k]] = Split::Train;
  for (std::size_t k = n_train; k < n_train + n_val; ++k) ds.split[order[k]] = Split::Validation;
}

}  // namespace scbm::synth
