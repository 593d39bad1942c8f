#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scbm/error.hpp"
#include "scbm/gauss/chi2.hpp"
#include "scbm/intervention/intervention.hpp"
#include "scbm/metrics/metrics.hpp"
#include "scbm/model/predict.hpp"
#include "scbm/synth/generator.hpp"

namespace scbm::intervention {
namespace {

using gauss::ConceptDistribution;
using testing::random_spd;
using testing::scalar_sigmoid;

double log_sig(double v) { return -std::log1p(std::exp(-v)); }

double region_objective(const Vector& eta, const std::vector<int>& c) {
  double f = 0.0;
  for (Index i = 0; i < eta.size(); ++i) f += c[static_cast<std::size_t>(i)] == 1 ? log_sig(eta(i)) : log_sig(-eta(i));
  return f;
}

// Mahalanobis distance by explicit inverse, independent of the library's solves.
double mahalanobis(const Vector& eta, const Vector& mu, const Matrix& cov) {
  const Vector d = eta - mu;
  return d.dot(cov.inverse() * d);
}

TEST(Percentile, LinearInterpolation) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_NEAR(percentile(v, 0.05), 5.95, 1e-12);
  EXPECT_NEAR(percentile(v, 0.95), 95.05, 1e-12);
  EXPECT_EQ(percentile({3.0}, 0.05), 3.0);
}

TEST(Percentile, TableProperties) {
  Matrix constant = Matrix::Constant(50, 2, -1.25);
  const PercentileTable t = build_percentile_table(constant);
  EXPECT_EQ(t.low(0), -1.25);
  EXPECT_EQ(t.high(1), -1.25);

  RandomStream rng(1);
  Matrix logits = rng.normal_matrix(101, 3);
  const PercentileTable a = build_percentile_table(logits);
  for (int shuffle = 0; shuffle < 20; ++shuffle) {
    for (Index i = logits.rows(); i > 1; --i) logits.row(i - 1).swap(logits.row(static_cast<Index>(rng.index(i))));
    const PercentileTable b = build_percentile_table(logits);
    EXPECT_EQ(a.low, b.low);
    EXPECT_EQ(a.high, b.high);
  }
  EXPECT_TRUE((a.low.array() <= a.high.array()).all());
  EXPECT_THROW(build_percentile_table(Matrix::Zero(0, 3)), UsageError);
}

TEST(Strategy, PercentileIsDefinitional) {
  PercentileTable t;
  t.low = Vector::LinSpaced(4, -4.0, -1.0);
  t.high = Vector::LinSpaced(4, 1.0, 4.0);
  const Vector eta = strategy_percentile({2, 0}, {1, 0}, t);
  EXPECT_EQ(eta(0), t.high(2));
  EXPECT_EQ(eta(1), t.low(0));
  EXPECT_THROW(strategy_percentile({5}, {1}, t), UsageError);
}

// The percentile strategy ignores mu, so a mean already beyond the 95th
// percentile gets a shift in the wrong direction.
TEST(Strategy, PercentileCanShiftTheWrongWay) {
  PercentileTable t;
  t.low = Vector::Constant(1, -2.0);
  t.high = Vector::Constant(1, 2.0);
  const double mu = 3.5;
  EXPECT_LT(strategy_percentile({0}, {1}, t)(0) - mu, 0.0);
}

TEST(Strategy, ConfidenceRegionSingleConceptClosedForm) {
  StrategyConfig cfg;
  const double r = std::sqrt(gauss::chi2_quantile(1.0, 0.99));
  EXPECT_NEAR(r, 2.5758293035489, 1e-6);
  ConceptDistribution d;
  d.mean = Vector::Zero(1);
  d.chol = Matrix::Identity(1, 1);
  EXPECT_NEAR(strategy_confidence_region(d, {0}, {1}, cfg).eta(0), 2.5758293035489, 1e-4);

  RandomStream rng(4);
  for (int t = 0; t < 200; ++t) {
    d.mean = Vector::Constant(1, 3.0 * rng.normal());
    const double sd = 0.1 + 3.0 * rng.uniform();
    d.chol = Matrix::Constant(1, 1, sd);
    const int c = static_cast<int>(rng.index(2));
    const RegionSolution sol = strategy_confidence_region(d, {0}, {c}, cfg);
    EXPECT_NEAR(sol.eta(0), d.mean(0) + (c == 1 ? 1.0 : -1.0) * r * sd, 1e-4 * std::max(1.0, sd));
    EXPECT_TRUE(sol.converged);
  }
}

struct RegionCase {
  ConceptDistribution dist;
  std::vector<Index> s;
  std::vector<int> values;
};

RegionCase random_region_case(RandomStream& rng) {
  const Index c = 1 + static_cast<Index>(rng.index(8));
  RegionCase rc;
  const Matrix cov = random_spd(c, rng) * (0.2 + 4.0 * rng.uniform());
  rc.dist.mean = 3.0 * rng.normal_matrix(c, 1).col(0);
  rc.dist.chol = Eigen::LLT<Matrix>(cov).matrixL();
  std::vector<Index> all(static_cast<std::size_t>(c));
  std::iota(all.begin(), all.end(), Index{0});
  for (Index i = c; i > 1; --i) std::swap(all[static_cast<std::size_t>(i - 1)], all[rng.index(static_cast<std::size_t>(i))]);
  all.resize(1 + rng.index(static_cast<std::size_t>(c)));
  rc.s = all;
  for (std::size_t k = 0; k < rc.s.size(); ++k) rc.values.push_back(static_cast<int>(rng.index(2)));
  return rc;
}

TEST(StrategyProperty, ConfidenceRegionDesiderata) {
  RandomStream rng(5);
  StrategyConfig cfg;
  for (int t = 0; t < 1000; ++t) {
    const RegionCase rc = random_region_case(rng);
    const auto d = static_cast<Index>(rc.s.size());
    const Matrix cov = rc.dist.chol * rc.dist.chol.transpose();
    Matrix cov_ss(d, d);
    Vector mu_s(d);
    for (Index i = 0; i < d; ++i) {
      mu_s(i) = rc.dist.mean(rc.s[static_cast<std::size_t>(i)]);
      for (Index j = 0; j < d; ++j) cov_ss(i, j) = cov(rc.s[static_cast<std::size_t>(i)], rc.s[static_cast<std::size_t>(j)]);
    }
    const double r2 = gauss::chi2_quantile(static_cast<double>(d), 0.99);
    const RegionSolution sol = strategy_confidence_region(rc.dist, rc.s, rc.values, cfg);
    EXPECT_LE(mahalanobis(sol.eta, mu_s, cov_ss), r2 + 1e-6) << "case " << t;
    EXPECT_TRUE(sol.converged) << "case " << t;
    for (Index i = 0; i < d; ++i) {
      const int c = rc.values[static_cast<std::size_t>(i)];
      if (c == 1) {
        EXPECT_GE(sol.eta(i), mu_s(i)) << "case " << t;
        EXPECT_GE(log_sig(sol.eta(i)), log_sig(mu_s(i)));
      } else {
        EXPECT_LE(sol.eta(i), mu_s(i)) << "case " << t;
        EXPECT_GE(log_sig(-sol.eta(i)), log_sig(-mu_s(i)));
      }
    }
    // No random feasible point does better.
    const double best = region_objective(sol.eta, rc.values);
    const Matrix l = Eigen::LLT<Matrix>(cov_ss).matrixL();
    for (int probe = 0; probe < 50; ++probe) {
      Vector z = rng.normal_matrix(d, 1).col(0);
      z *= std::sqrt(r2) * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / z.norm();
      Vector eta = mu_s + l * z;
      bool signs_ok = true;
      for (Index i = 0; i < d; ++i)
        signs_ok &= rc.values[static_cast<std::size_t>(i)] == 1 ? eta(i) >= mu_s(i) : eta(i) <= mu_s(i);
      if (signs_ok) EXPECT_LE(region_objective(eta, rc.values), best + 1e-7) << "case " << t;
    }
  }
}

// Diagonal covariance with two intervened concepts, compared with a grid over
// the feasible box at resolution 1e-3 in each coordinate.
TEST(Strategy, DiagonalTwoConceptsMatchesGridSearch) {
  RandomStream rng(6);
  StrategyConfig cfg;
  const double r2 = gauss::chi2_quantile(2.0, 0.99);
  for (int t = 0; t < 20; ++t) {
    ConceptDistribution d;
    d.mean = 2.0 * rng.normal_matrix(2, 1).col(0);
    const Vector sd = (0.3 + 1.5 * rng.uniform_matrix(2, 1).array()).matrix().col(0);
    d.chol = sd.asDiagonal();
    const std::vector<int> c = {static_cast<int>(rng.index(2)), static_cast<int>(rng.index(2))};
    const RegionSolution sol = strategy_confidence_region(d, {0, 1}, c, cfg);

    const double step = 1e-3;
    auto axis_value = [&](int i, double delta) {
      const double eta = d.mean(i) + (c[static_cast<std::size_t>(i)] == 1 ? delta : -delta);
      return c[static_cast<std::size_t>(i)] == 1 ? log_sig(eta) : log_sig(-eta);
    };
    const int n0 = static_cast<int>(std::sqrt(r2) * sd(0) / step);
    double grid_best = -1e300;
    Vector grid_eta(2);
    for (int a = 0; a <= n0; ++a) {
      const double d0 = a * step;
      const double rem = r2 - (d0 / sd(0)) * (d0 / sd(0));
      if (rem < 0) break;
      const double d1 = std::floor(std::sqrt(rem) * sd(1) / step) * step;  // objective rises in each delta
      const double f = axis_value(0, d0) + axis_value(1, d1);
      if (f > grid_best) {
        grid_best = f;
        grid_eta << d.mean(0) + (c[0] == 1 ? d0 : -d0), d.mean(1) + (c[1] == 1 ? d1 : -d1);
      }
    }
    const double got = region_objective(sol.eta, c);
    EXPECT_GE(got, grid_best - 1e-9) << "case " << t;
    EXPECT_LE(got - grid_best, 5e-3);
    EXPECT_LT((sol.eta - grid_eta).cwiseAbs().maxCoeff(), 2e-2) << "case " << t;
  }
}

TEST(Strategy, BudgetExhaustionFlagsWarning) {
  ConceptDistribution d;
  d.mean = Vector::Zero(3);
  d.chol = Matrix::Identity(3, 3);
  StrategyConfig cfg;
  cfg.max_iterations = 1;
  const RegionSolution sol = strategy_confidence_region(d, {0, 1, 2}, {1, 0, 1}, cfg);
  EXPECT_FALSE(sol.converged);
  EXPECT_LE(sol.statistic, sol.radius_sq + 1e-6);
  cfg.level = 1.0;
  EXPECT_THROW(strategy_confidence_region(d, {0}, {1}, cfg), ConfigError);
}

ArchConfig small_arch() {
  ArchConfig a;
  a.hidden_width = 8;
  a.hidden_layers = 1;
  return a;
}

PercentileTable wide_table(Index c) {
  PercentileTable t;
  t.low = Vector::Constant(c, -3.0);
  t.high = Vector::Constant(c, 3.0);
  return t;
}

TEST(Apply, FullInterventionIsDeterministic) {
  ScbmModel m(Variant::Global, 3, 4, small_arch(), 1);
  RandomStream rng(2);
  const ConceptDistribution d = m.concept_head_one(rng.normal_matrix(1, 3).row(0));
  const std::vector<int> c = {1, 0, 0, 1};
  const InterventionState st =
      apply_intervention(m, d, {0, 1, 2, 3}, c, StrategyConfig{}, wide_table(4), PredictOptions{}, rng);
  Matrix cm(1, 4);
  cm << 1, 0, 0, 1;
  EXPECT_EQ(st.concept_probs, cm.row(0).transpose());
  EXPECT_EQ(st.target_probs, m.head_probs(cm).row(0).transpose());
  EXPECT_FALSE(st.conditional.has_value());
}

TEST(Apply, DiagonalCovarianceLeavesOthersUnchanged) {
  ScbmModel m(Variant::HardCbm, 3, 4, small_arch(), 1);
  ConceptDistribution d;
  d.mean = Vector(4);
  d.mean << 0.5, -1.0, 2.0, 0.1;
  d.chol = Vector(Vector::LinSpaced(4, 0.5, 2.0)).asDiagonal();
  for (auto kind : {StrategyKind::Percentile, StrategyKind::ConfidenceRegion}) {
    StrategyConfig cfg;
    cfg.kind = kind;
    RandomStream rng(3);
    const InterventionState st =
        apply_intervention(m, d, {2, 0}, {0, 1}, cfg, wide_table(4), PredictOptions{1000, 1.0, ProbMode::MeanLogit}, rng);
    ASSERT_TRUE(st.conditional.has_value());
    EXPECT_EQ(st.conditional->mean(0), d.mean(1));
    EXPECT_EQ(st.conditional->mean(1), d.mean(3));
    EXPECT_NEAR(st.concept_probs(1), scalar_sigmoid(d.mean(1)), 1e-15);
    EXPECT_NEAR(st.concept_probs(3), scalar_sigmoid(d.mean(3)), 1e-15);
    EXPECT_NEAR(st.conditional->cov(0, 0), 1.0, 1e-12);
  }
}

TEST(Apply, CorrelatedConceptMovesWithIntervention) {
  ScbmModel m(Variant::Global, 3, 2, small_arch(), 1);
  ConceptDistribution d;
  d.mean = Vector(2);
  d.mean << 0.2, -0.3;
  Matrix cov(2, 2);
  cov << 1.0, 0.9, 0.9, 1.0;
  d.chol = Eigen::LLT<Matrix>(cov).matrixL();
  const PredictOptions opts{200000, 1.0, ProbMode::McMean};
  RandomStream rng(4);
  const double before = predict_one(m, d, opts, rng).concept_probs(1);
  const InterventionState st = apply_intervention(m, d, {0}, {1}, StrategyConfig{}, wide_table(2), opts, rng);

  const double eta1 = 0.2 + std::sqrt(gauss::chi2_quantile(1.0, 0.99));
  EXPECT_NEAR(st.eta(0), eta1, 1e-4);
  const double mean2 = -0.3 + 0.9 * (st.eta(0) - 0.2);
  const double sd2 = std::sqrt(1.0 - 0.81);
  RandomStream oracle(77);
  double acc = 0.0;
  const int draws = 1000000;
  for (int k = 0; k < draws; ++k) acc += scalar_sigmoid(mean2 + sd2 * oracle.normal());
  EXPECT_NEAR(st.concept_probs(1), acc / draws, 3e-3);
  EXPECT_GT(st.concept_probs(1), before);
}

TEST(Apply, InvalidSets) {
  ScbmModel m(Variant::Global, 3, 3, small_arch(), 1);
  RandomStream rng(5);
  const ConceptDistribution d = m.concept_head_one(rng.normal_matrix(1, 3).row(0));
  const PercentileTable t = wide_table(3);
  EXPECT_THROW(apply_intervention(m, d, {0, 0}, {1, 1}, StrategyConfig{}, t, PredictOptions{}, rng), UsageError);
  EXPECT_THROW(apply_intervention(m, d, {3}, {1}, StrategyConfig{}, t, PredictOptions{}, rng), UsageError);
  EXPECT_THROW(apply_intervention(m, d, {1}, {2}, StrategyConfig{}, t, PredictOptions{}, rng), UsageError);
  EXPECT_THROW(apply_intervention(m, d, {1}, {}, StrategyConfig{}, t, PredictOptions{}, rng), UsageError);
}

TEST(Policy, UncertaintyPicksClosestToHalf) {
  RandomStream rng(1);
  EXPECT_EQ(policy_next(PolicyKind::Uncertainty, Eigen::Vector3d(0.9, 0.51, 0.1), {}, rng), 1);
  EXPECT_EQ(policy_next(PolicyKind::Uncertainty, Eigen::Vector3d(0.9, 0.51, 0.1), {1}, rng), 0);
  EXPECT_EQ(policy_next(PolicyKind::Uncertainty, Eigen::Vector4d(0.9, 0.25, 0.75, 0.25), {}, rng), 1);
  EXPECT_THROW(policy_next(PolicyKind::Uncertainty, Eigen::Vector2d(0.5, 0.5), {0, 1}, rng), UsageError);
  EXPECT_THROW(policy_next(PolicyKind::Random, Eigen::Vector2d(0.5, 0.5), {1, 0}, rng), UsageError);
}

TEST(Policy, RandomIsUniformOverFreeConcepts) {
  RandomStream rng(2);
  std::vector<int> counts(6, 0);
  const Vector p = Vector::Constant(6, 0.5);
  for (int t = 0; t < 10000; ++t) ++counts[static_cast<std::size_t>(policy_next(PolicyKind::Random, p, {4, 1}, rng))];
  EXPECT_EQ(counts[1], 0);
  EXPECT_EQ(counts[4], 0);
  for (int i : {0, 2, 3, 5}) EXPECT_NEAR(counts[static_cast<std::size_t>(i)], 2500, 150);
}

TEST(PolicyProperty, NeverReselects) {
  RandomStream rng(3);
  for (int t = 0; t < 300; ++t) {
    const Index c = 1 + static_cast<Index>(rng.index(10));
    const Vector p = rng.uniform_matrix(c, 1).col(0);
    std::vector<Index> s;
    const PolicyKind kind = t % 2 ? PolicyKind::Random : PolicyKind::Uncertainty;
    while (static_cast<Index>(s.size()) < c) {
      const Index next = policy_next(kind, p, s, rng);
      EXPECT_EQ(std::find(s.begin(), s.end(), next), s.end());
      s.push_back(next);
    }
  }
}

struct CurveFixture {
  synth::Dataset ds;
  std::vector<Index> rows;
  Matrix x;
  Matrix concepts;
  std::vector<int> labels;

  CurveFixture(Index n, Index c, std::uint64_t seed) : ds(synth::generate(synth::SynthConfig{n, 5, c, 2, seed})) {
    for (Index r = 0; r < n; ++r) rows.push_back(r);
    x = ds.x;
    concepts = ds.concepts.cast<double>();
    labels = ds.labels;
  }
};

TEST(Curve, BoundaryRows) {
  const CurveFixture f(60, 4, 1);
  const PredictOptions opts{20, 1.0, ProbMode::McMean};
  for (Variant v : {Variant::Global, Variant::Amortized, Variant::HardCbm}) {
    ScbmModel m(v, 5, 4, small_arch(), 2);
    const auto preds = predict(m, f.x, f.rows, opts, 9);
    for (auto policy : {PolicyKind::Random, PolicyKind::Uncertainty})
      for (auto kind : {StrategyKind::Percentile, StrategyKind::ConfidenceRegion}) {
        StrategyConfig cfg;
        cfg.kind = kind;
        const InterventionCurve curve =
            run_intervention_curve(m, wide_table(4), f.x, f.concepts, f.labels, f.rows, policy, cfg, 9, opts, 9);
        EXPECT_TRUE(curve.clipped);
        ASSERT_EQ(curve.points.size(), 5u);
        EXPECT_EQ(curve.points[0].concept_accuracy,
                  metrics::concept_accuracy(concept_prob_matrix(preds), f.concepts));
        EXPECT_EQ(curve.points[0].target_accuracy, metrics::target_accuracy(target_prob_matrix(preds), f.labels));
        EXPECT_EQ(curve.points[4].concept_accuracy, 1.0);
      }
  }
}

// Random policy on an almost deterministic model: the k intervened concepts
// are correct and each other concept keeps its k = 0 correctness, so the
// expected accuracy is (k + (C - k)/C * A) / C with A the k = 0 hit count.
TEST(Curve, HardCbmRandomPolicyMatchesClosedForm) {
  const Index c = 5;
  const CurveFixture f(4000, c, 3);
  ScbmModel m(Variant::HardCbm, 5, c, small_arch(), 4);
  const PredictOptions opts{10, 1.0, ProbMode::McMean};
  const Matrix probs = concept_prob_matrix(predict(m, f.x, f.rows, opts, 5));
  const double base_hits = metrics::concept_accuracy(probs, f.concepts) * static_cast<double>(c);
  const InterventionCurve curve = run_intervention_curve(m, wide_table(c), f.x, f.concepts, f.labels, f.rows,
                                                         PolicyKind::Random, StrategyConfig{}, 5, opts, 5);
  for (int k = 0; k <= 5; ++k) {
    const double kk = k;
    const double expected = (kk + (static_cast<double>(c) - kk) / static_cast<double>(c) * base_hits) / static_cast<double>(c);
    EXPECT_NEAR(curve.points[static_cast<std::size_t>(k)].concept_accuracy, expected, 0.015) << "k=" << k;
  }
}

TEST(Curve, IsDeterministicAndRejectsBadInput) {
  const CurveFixture f(30, 3, 6);
  ScbmModel m(Variant::Amortized, 5, 3, small_arch(), 7);
  const PredictOptions opts{8, 1.0, ProbMode::McMean};
  auto run = [&] {
    return run_intervention_curve(m, wide_table(3), f.x, f.concepts, f.labels, f.rows, PolicyKind::Random,
                                  StrategyConfig{}, 3, opts, 11);
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    EXPECT_EQ(a.points[k].concept_accuracy, b.points[k].concept_accuracy);
    EXPECT_EQ(a.points[k].target_accuracy, b.points[k].target_accuracy);
  }
  EXPECT_THROW(run_intervention_curve(m, wide_table(3), f.x, f.concepts, f.labels, f.rows, PolicyKind::Random,
                                      StrategyConfig{}, -1, opts, 1),
               ConfigError);
}

TEST(Parse, StrategyAndPolicyNames) {
  EXPECT_EQ(parse_strategy("percentile"), StrategyKind::Percentile);
  EXPECT_EQ(parse_strategy(to_string(StrategyKind::ConfidenceRegion)), StrategyKind::ConfidenceRegion);
  EXPECT_EQ(parse_policy("uncertainty"), PolicyKind::Uncertainty);
  EXPECT_THROW(parse_policy("greedy"), ConfigError);
}

}  // namespace
}  // namespace scbm::intervention
