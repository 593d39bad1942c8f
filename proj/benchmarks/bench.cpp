#include <numeric>

#include <benchmark/benchmark.h>
#include <Eigen/Cholesky>

#include "scbm/gauss/gaussian.hpp"
#include "scbm/intervention/intervention.hpp"
#include "scbm/model/loss.hpp"
#include "scbm/model/predict.hpp"

namespace {

using namespace scbm;

gauss::ConceptDistribution random_dist(Index c, RandomStream& rng) {
  const Matrix a = rng.normal_matrix(c, c);
  Matrix cov = a * a.transpose() / static_cast<double>(c);
  cov.diagonal().array() += 0.1;
  gauss::ConceptDistribution d;
  d.mean = rng.normal_matrix(c, 1).col(0);
  d.chol = Eigen::LLT<Matrix>(cov).matrixL();
  return d;
}

void BM_Condition(benchmark::State& state) {
  const auto c = static_cast<Index>(state.range(0));
  const auto k = static_cast<Index>(state.range(1));
  RandomStream rng(1);
  const auto d = random_dist(c, rng);
  std::vector<Index> s(static_cast<std::size_t>(k));
  std::iota(s.begin(), s.end(), Index{0});
  const Eigen::VectorXd v = rng.normal_matrix(k, 1).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(gauss::condition(d, s, v));
}
BENCHMARK(BM_Condition)->Args({15, 5})->Args({100, 10})->Args({100, 50});

void BM_ConfidenceRegion(benchmark::State& state) {
  const auto c = static_cast<Index>(state.range(0));
  RandomStream rng(2);
  const auto d = random_dist(c, rng);
  std::vector<Index> s(static_cast<std::size_t>(c));
  std::iota(s.begin(), s.end(), Index{0});
  std::vector<int> values;
  for (Index i = 0; i < c; ++i) values.push_back(static_cast<int>(i % 2));
  const intervention::StrategyConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(intervention::strategy_confidence_region(d, s, values, cfg));
}
BENCHMARK(BM_ConfidenceRegion)->Arg(1)->Arg(5)->Arg(15);

// One forward/backward pass of the training loss on a desk-sized batch.
void BM_TrainingStep(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const Index p = 100;
  const Index c = 15;
  ScbmModel model(variant, p, c, ArchConfig{}, 3);
  RandomStream rng(4);
  Batch b;
  b.x = rng.normal_matrix(64, p);
  b.concepts = (rng.uniform_matrix(64, c).array() < 0.5).cast<double>();
  for (int i = 0; i < 64; ++i) b.labels.push_back(i % 2);
  LossOptions o;
  o.mc_samples = 10;
  o.lambda2 = variant == Variant::Amortized ? 1.0 : 0.0;
  nn::ParamStore grads;
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(model, b, o, rng, nn::Mode::Train, &grads));
}
BENCHMARK(BM_TrainingStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_PredictRow(benchmark::State& state) {
  const Index c = 15;
  ScbmModel model(Variant::Global, 100, c, ArchConfig{}, 5);
  RandomStream rng(6);
  const auto d = model.concept_head_one(rng.normal_matrix(1, 100).row(0));
  const PredictOptions opts{static_cast<int>(state.range(0)), 1.0, ProbMode::McMean};
  for (auto _ : state) benchmark::DoNotOptimize(predict_one(model, d, opts, rng));
}
BENCHMARK(BM_PredictRow)->Arg(10)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
