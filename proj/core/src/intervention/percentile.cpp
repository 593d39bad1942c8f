#include "scbm/intervention/percentile.hpp"

#include <algorithm>
#include <cmath>

#include "scbm/error.hpp"
#include "scbm/model/scbm_model.hpp"

namespace scbm::intervention {

void PercentileTable::validate() const {
  if (low.size() != high.size()) throw ConfigError("percentile table: length mismatch");
  for (Eigen::Index i = 0; i < low.size(); ++i)
    if (!std::isfinite(low(i)) || !std::isfinite(high(i)) || low(i) > high(i))
      throw ConfigError("percentile table: invalid entry for concept " + std::to_string(i));
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PercentileTable build_percentile_table(const Eigen::MatrixXd& logits) {
  if (logits.rows() == 0) throw UsageError("percentile table: the training split is empty");
  PercentileTable t;
  t.low.resize(logits.cols());
  t.high.resize(logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    std::vector<double> col(logits.col(i).data(), logits.col(i).data() + logits.rows());
    t.low(i) = percentile(col, 0.05);
    t.high(i) = percentile(std::move(col), 0.95);
  }
  return t;
}

PercentileTable build_percentile_table(const ScbmModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw UsageError("percentile table: the training split is empty");
  const auto dists = model.concept_head(x);
  Eigen::MatrixXd mu(x.rows(), model.num_concepts());
  for (std::size_t r = 0; r < dists.size(); ++r) mu.row(static_cast<Eigen::Index>(r)) = dists[r].mean.transpose();
  return build_percentile_table(mu);
}

}  // namespace scbm::intervention
