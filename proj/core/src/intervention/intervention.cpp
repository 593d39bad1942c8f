#include "scbm/intervention/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "scbm/error.hpp"
#include "scbm/gauss/chi2.hpp"
#include "scbm/model/loss.hpp"
#include "scbm/nn/ops.hpp"

namespace scbm::intervention {
namespace {

constexpr std::uint64_t kPolicyStream = 0x9011;

void check_set(const std::vector<Index>& s, const std::vector<int>& values, Index dim) {
  if (s.size() != values.size()) throw UsageError("intervention: one value per intervened concept required");
  std::vector<bool> seen(static_cast<std::size_t>(dim), false);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < 0 || s[k] >= dim) throw UsageError("intervention: concept index " + std::to_string(s[k]) + " out of range");
    if (seen[static_cast<std::size_t>(s[k])]) throw UsageError("intervention: concept " + std::to_string(s[k]) + " repeated");
    seen[static_cast<std::size_t>(s[k])] = true;
    if (values[k] != 0 && values[k] != 1) throw UsageError("intervention: concept values must be 0 or 1");
  }
}

// Barrier objective over delta > 0 with delta^T A delta < r^2:
// t * sum log sigmoid(z_i + delta_i) + log(r^2 - delta^T A delta) + sum log delta_i.
struct Barrier {
  const Vector& z;
  const Matrix& a;
  double r2;

  double slack(const Vector& d) const { return r2 - d.dot(a * d); }

  double value(const Vector& d, double t) const {
    double f = 0.0;
    for (Index i = 0; i < d.size(); ++i) f += nn::log_sigmoid(z(i) + d(i)) + std::log(d(i)) / t;
    return t * f + std::log(slack(d));
  }
};

double objective(const Vector& z, const Vector& d) {
  double f = 0.0;
  for (Index i = 0; i < d.size(); ++i) f += nn::log_sigmoid(z(i) + d(i));
  return f;
}

}  // namespace

std::string to_string(StrategyKind k) { return k == StrategyKind::Percentile ? "percentile" : "confidence-region"; }

StrategyKind parse_strategy(const std::string& s) {
  if (s == "percentile") return StrategyKind::Percentile;
  if (s == "confidence-region") return StrategyKind::ConfidenceRegion;
  throw ConfigError("unknown strategy '" + s + "' (expected percentile or confidence-region)");
}

std::string to_string(PolicyKind k) { return k == PolicyKind::Random ? "random" : "uncertainty"; }

PolicyKind parse_policy(const std::string& s) {
  if (s == "random") return PolicyKind::Random;
  if (s == "uncertainty") return PolicyKind::Uncertainty;
  throw ConfigError("unknown policy '" + s + "' (expected random or uncertainty)");
}

void StrategyConfig::validate() const {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("strategy: confidence level must lie in (0, 1)");
  if (!(tolerance > 0.0)) throw ConfigError("strategy: tolerance must be positive");
  if (max_iterations < 1) throw ConfigError("strategy: max_iterations must be >= 1");
}

Vector strategy_percentile(const std::vector<Index>& s, const std::vector<int>& values, const PercentileTable& table) {
  check_set(s, values, table.dim());
  Vector eta(static_cast<Index>(s.size()));
  for (std::size_t k = 0; k < s.size(); ++k)
    eta(static_cast<Index>(k)) = values[k] == 1 ? table.high(s[k]) : table.low(s[k]);
  return eta;
}

RegionSolution solve_confidence_region(const Vector& mu, const Matrix& chol, const std::vector<int>& values,
                                       double radius_sq, const StrategyConfig& cfg) {
  const Index d = mu.size();
  if (d == 0 || chol.rows() != d || chol.cols() != d || static_cast<Index>(values.size()) != d)
    throw UsageError("confidence region: dimensions disagree");
  // delta_i = s_i (eta_i - mu_i) >= 0 with s_i = +1 for c_i = 1, -1 for c_i = 0.
  Vector sign(d);
  for (Index i = 0; i < d; ++i) sign(i) = values[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
  const Vector z = sign.cwiseProduct(mu);
  const Matrix w = chol.triangularView<Eigen::Lower>().solve(Matrix(sign.asDiagonal()));
  const Matrix a = w.transpose() * w;
  const Barrier barrier{z, a, radius_sq};

  RegionSolution out;
  out.radius_sq = radius_sq;

  // Strictly feasible start on the diagonal at half the radius.
  Vector delta = Vector::Constant(d, 0.5 * std::sqrt(radius_sq / Vector::Ones(d).dot(a * Vector::Ones(d))));

  const double m = static_cast<double>(d + 1);
  double t = 1.0;
  int iterations = 0;
  bool budget_hit = false;
  while (true) {
    for (;;) {
      if (iterations >= cfg.max_iterations) {
        budget_hit = true;
        break;
      }
      const double h = barrier.slack(delta);
      const Vector ad = a * delta;
      Vector grad(d);
      Matrix hess = -(2.0 / h) * a - (4.0 / (h * h)) * ad * ad.transpose();
      for (Index i = 0; i < d; ++i) {
        const double sg = nn::sigmoid(z(i) + delta(i));
        grad(i) = t * (1.0 - sg) + 1.0 / delta(i) - 2.0 * ad(i) / h;
        hess(i, i) += -t * sg * (1.0 - sg) - 1.0 / (delta(i) * delta(i));
      }
      const Eigen::LDLT<Matrix> ldlt(-hess);
      Vector step = ldlt.info() == Eigen::Success ? Vector(ldlt.solve(grad)) : grad;
      if (!step.allFinite()) step = grad;
      const double decrement = grad.dot(step);
      ++iterations;
      const double base = barrier.value(delta, t);
      // Relative to the barrier value: at large t the absolute decrement never
      // drops below its own roundoff.
      if (decrement / 2.0 <= 1e-10 * std::max(1.0, std::abs(base))) break;

      // Largest step keeping delta > 0, then backtracking into the region with Armijo.
      double alpha = 1.0;
      for (Index i = 0; i < d; ++i)
        if (step(i) < 0.0) alpha = std::min(alpha, -0.99 * delta(i) / step(i));
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        const Vector trial = delta + alpha * step;
        if (trial == delta) break;  // step below roundoff: centred as far as doubles allow
        if ((trial.array() <= 0.0).any() || !(barrier.slack(trial) > 0.0)) continue;
        if (barrier.value(trial, t) >= base + 0.25 * alpha * decrement) {
          delta = trial;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (budget_hit || m / t <= 1e-3 * cfg.tolerance) break;
    t *= 20.0;
  }

  // The objective increases along every ray delta >= 0, so scaling the iterate
  // onto the boundary keeps the signs and can only help.
  const double q = delta.dot(a * delta);
  if (q > 0.0) {
    const Vector scaled = delta * std::sqrt(radius_sq / q);
    if (objective(z, scaled) >= objective(z, delta)) delta = scaled;
  }

  out.eta = mu + sign.cwiseProduct(delta);
  out.iterations = iterations;
  out.converged = !budget_hit;
  out.statistic = gauss::lr_statistic(out.eta, mu, chol);
  return out;
}

RegionSolution strategy_confidence_region(const gauss::ConceptDistribution& dist, const std::vector<Index>& s,
                                          const std::vector<int>& values, const StrategyConfig& cfg) {
  cfg.validate();
  check_set(s, values, dist.dim());
  if (s.empty()) throw UsageError("confidence region: the intervened set is empty");
  const auto d = static_cast<Index>(s.size());
  const Matrix cov = dist.covariance();
  Matrix cov_ss(d, d);
  Vector mu_s(d);
  for (Index i = 0; i < d; ++i) {
    mu_s(i) = dist.mean(s[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < d; ++j) cov_ss(i, j) = cov(s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(j)]);
  }
  const Matrix chol = gauss::cholesky_with_jitter(cov_ss);
  return solve_confidence_region(mu_s, chol, values, gauss::chi2_quantile(static_cast<double>(d), cfg.level), cfg);
}

InterventionState apply_intervention(const ScbmModel& model, const gauss::ConceptDistribution& dist,
                                     const std::vector<Index>& s, const std::vector<int>& values,
                                     const StrategyConfig& strategy, const PercentileTable& table,
                                     const PredictOptions& opts, RandomStream& rng) {
  const Index c = dist.dim();
  check_set(s, values, c);
  InterventionState st;
  st.intervened = s;
  st.values = values;
  if (s.empty()) {
    const Prediction p = predict_one(model, dist, opts, rng);
    st.concept_probs = p.concept_probs;
    st.target_probs = p.target_probs;
    return st;
  }

  if (strategy.kind == StrategyKind::Percentile) {
    st.eta = strategy_percentile(s, values, table);
  } else {
    const RegionSolution sol = strategy_confidence_region(dist, s, values, strategy);
    st.eta = sol.eta;
    st.solver_warning = !sol.converged;
  }

  st.concept_probs.resize(c);
  Vector fixed_c(c);
  for (std::size_t k = 0; k < s.size(); ++k) {
    st.concept_probs(s[k]) = values[k];
    fixed_c(s[k]) = values[k];
  }

  if (static_cast<Index>(s.size()) == c) {
    st.target_probs = model.head_probs(fixed_c.transpose()).row(0).transpose();
    return st;
  }

  st.conditional = gauss::condition(dist, s, st.eta);
  const auto& cond = *st.conditional;
  const auto r = static_cast<Index>(cond.remaining.size());
  const Matrix eps = rng.normal_matrix(opts.mc_samples, r);
  const Matrix uniforms = rng.uniform_matrix(opts.mc_samples, r);
  Matrix eta = eps * cond.chol.transpose();
  eta.rowwise() += cond.mean.transpose();

  Vector rem_probs;
  if (opts.prob_mode == ProbMode::McMean)
    rem_probs = eta.unaryExpr([](double v) { return nn::sigmoid(v); }).colwise().mean().transpose();
  else
    rem_probs = cond.mean.unaryExpr([](double v) { return nn::sigmoid(v); });
  const Matrix hard_rem = (gumbel_relaxed(eta, uniforms, opts.temperature).array() >= 0.5).cast<double>();

  Matrix hard(opts.mc_samples, c);
  for (std::size_t k = 0; k < s.size(); ++k) hard.col(s[k]).setConstant(values[k]);
  for (Index j = 0; j < r; ++j) {
    const Index orig = cond.remaining[static_cast<std::size_t>(j)];
    hard.col(orig) = hard_rem.col(j);
    st.concept_probs(orig) = rem_probs(j);
  }
  st.target_probs = model.head_probs(hard).colwise().mean().transpose();
  return st;
}

Index policy_next(PolicyKind kind, const Vector& probs, const std::vector<Index>& intervened, RandomStream& rng) {
  std::vector<bool> taken(static_cast<std::size_t>(probs.size()), false);
  for (Index i : intervened) {
    if (i < 0 || i >= probs.size()) throw UsageError("policy: intervened index out of range");
    taken[static_cast<std::size_t>(i)] = true;
  }
  std::vector<Index> free;
  for (Index i = 0; i < probs.size(); ++i)
    if (!taken[static_cast<std::size_t>(i)]) free.push_back(i);
  if (free.empty()) throw UsageError("policy: every concept is already intervened on");
  if (kind == PolicyKind::Random) return free[rng.index(free.size())];
  Index best = free.front();
  double best_gap = std::abs(probs(best) - 0.5);
  for (Index i : free) {
    const double gap = std::abs(probs(i) - 0.5);
    if (gap < best_gap) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

InterventionCurve run_intervention_curve(const ScbmModel& model, const PercentileTable& table,
                                         const Matrix& x, const Matrix& concepts, const std::vector<int>& labels,
                                         const std::vector<Index>& row_ids, PolicyKind policy,
                                         const StrategyConfig& strategy, int max_k, const PredictOptions& opts,
                                         std::uint64_t seed) {
  strategy.validate();
  const Index n = x.rows();
  const Index c = model.num_concepts();
  if (concepts.rows() != n || concepts.cols() != c || static_cast<Index>(labels.size()) != n ||
      static_cast<Index>(row_ids.size()) != n)
    throw ConfigError("intervention curve: inputs disagree in shape");
  if (max_k < 0) throw ConfigError("intervention curve: max_k must be >= 0");

  InterventionCurve curve;
  if (max_k > c) {
    curve.clipped = true;
    max_k = static_cast<int>(c);
  }
  std::vector<double> concept_hits(static_cast<std::size_t>(max_k) + 1, 0.0);
  std::vector<double> target_hits(static_cast<std::size_t>(max_k) + 1, 0.0);

  const auto dists = model.concept_head(x);
  for (Index r = 0; r < n; ++r) {
    const auto id = static_cast<std::uint64_t>(row_ids[static_cast<std::size_t>(r)]);
    RandomStream policy_rng = RandomStream::derive(seed, {kPolicyStream, id});
    std::vector<Index> s;
    std::vector<int> values;
    for (int k = 0; k <= max_k; ++k) {
      RandomStream rng = instance_stream(seed, id);
      const InterventionState st =
          apply_intervention(model, dists[static_cast<std::size_t>(r)], s, values, strategy, table, opts, rng);
      curve.solver_warnings += st.solver_warning;
      Index hits = 0;
      for (Index i = 0; i < c; ++i) hits += (st.concept_probs(i) >= 0.5) == (concepts(r, i) >= 0.5);
      concept_hits[static_cast<std::size_t>(k)] += static_cast<double>(hits);
      Index cls = 0;
      st.target_probs.maxCoeff(&cls);
      target_hits[static_cast<std::size_t>(k)] += cls == labels[static_cast<std::size_t>(r)];
      if (k == max_k) break;
      const Index next = policy_next(policy, st.concept_probs, s, policy_rng);
      s.push_back(next);
      values.push_back(concepts(r, next) >= 0.5 ? 1 : 0);
    }
  }
  for (int k = 0; k <= max_k; ++k) {
    CurvePoint p;
    p.k = k;
    if (n > 0) {
      p.concept_accuracy = concept_hits[static_cast<std::size_t>(k)] / static_cast<double>(n * c);
      p.target_accuracy = target_hits[static_cast<std::size_t>(k)] / static_cast<double>(n);
    }
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace scbm::intervention
