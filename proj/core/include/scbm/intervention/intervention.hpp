#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scbm/gauss/gaussian.hpp"
#include "scbm/intervention/percentile.hpp"
#include "scbm/model/predict.hpp"
#include "scbm/model/scbm_model.hpp"
#include "scbm/random_stream.hpp"

namespace scbm::intervention {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class StrategyKind { Percentile, ConfidenceRegion };
enum class PolicyKind { Random, Uncertainty };

std::string to_string(StrategyKind k);
StrategyKind parse_strategy(const std::string& s);  // percentile | confidence-region
std::string to_string(PolicyKind k);
PolicyKind parse_policy(const std::string& s);  // random | uncertainty

struct StrategyConfig {
  StrategyKind kind = StrategyKind::ConfidenceRegion;
  double level = 0.99;
  double tolerance = 1e-6;
  int max_iterations = 500;
  void validate() const;
};

struct RegionSolution {
  Vector eta;  // intervened logits, in the order of S
  bool converged = true;
  int iterations = 0;
  double radius_sq = 0.0;  // chi-square threshold
  double statistic = 0.0;  // lr statistic at the solution
};

/// 95th percentile for c_i = 1, 5th for c_i = 0.
Vector strategy_percentile(const std::vector<Index>& s, const std::vector<int>& values, const PercentileTable& table);

/// Maximizes sum_i log p(c_i | eta_i) over eta_S subject to the likelihood-ratio
/// region of N(mu_S, Sigma_SS) at `cfg.level` and the sign constraints
/// eta_i >= mu_i (c_i = 1), eta_i <= mu_i (c_i = 0).
RegionSolution strategy_confidence_region(const gauss::ConceptDistribution& dist, const std::vector<Index>& s,
                                          const std::vector<int>& values, const StrategyConfig& cfg);

/// The same problem given mu_S and a factor of Sigma_SS directly.
RegionSolution solve_confidence_region(const Vector& mu, const Matrix& chol, const std::vector<int>& values,
                                       double radius_sq, const StrategyConfig& cfg);

struct InterventionState {
  std::vector<Index> intervened;  // S, in intervention order
  std::vector<int> values;        // c'_S
  Vector eta;                     // eta'_S
  std::optional<gauss::ConditionalResult> conditional;
  Vector concept_probs;  // C; intervened entries are their set values
  Vector target_probs;   // K
  bool solver_warning = false;
};

/// Sets eta'_S by the strategy, conditions the rest, and predicts. Draws from
/// `rng`: M x |R| normals then M x |R| uniforms for the remaining set R (M x C
/// of each when S is empty, matching predict_one). With S covering every
/// concept the target is softmax(g(c_S)) with no sampling.
InterventionState apply_intervention(const ScbmModel& model, const gauss::ConceptDistribution& dist,
                                     const std::vector<Index>& s, const std::vector<int>& values,
                                     const StrategyConfig& strategy, const PercentileTable& table,
                                     const PredictOptions& opts, RandomStream& rng);

/// Next concept to intervene on. Uncertainty: argmin |p_i - 0.5| over free
/// concepts, lowest index on ties. Random: uniform over free concepts. Throws
/// UsageError when nothing is left.
Index policy_next(PolicyKind kind, const Vector& probs, const std::vector<Index>& intervened, RandomStream& rng);

struct CurvePoint {
  int k = 0;
  double concept_accuracy = 0.0;
  double target_accuracy = 0.0;
};

struct InterventionCurve {
  std::vector<CurvePoint> points;
  bool clipped = false;     // max_k exceeded C
  int solver_warnings = 0;  // confidence-region solves that hit the budget
};

/// Oracle-user curve over the given rows: at each step the policy picks a
/// concept, it is set to its true value, and the whole set is re-solved.
/// Instance r uses instance_stream(seed, r) afresh at every k, so k = 0
/// reproduces predict().
InterventionCurve run_intervention_curve(const ScbmModel& model, const PercentileTable& table,
                                         const Matrix& x, const Matrix& concepts, const std::vector<int>& labels,
                                         const std::vector<Index>& row_ids, PolicyKind policy,
                                         const StrategyConfig& strategy, int max_k, const PredictOptions& opts,
                                         std::uint64_t seed);

}  // namespace scbm::intervention
