#pragma once

#include <vector>

#include <Eigen/Core>

namespace scbm {
class ScbmModel;
}

namespace scbm::intervention {

/// Per-concept 5th and 95th percentiles of training-set predicted logits mu_i(x).
struct PercentileTable {
  Eigen::VectorXd low;   // 5th
  Eigen::VectorXd high;  // 95th

  Eigen::Index dim() const { return low.size(); }
  void validate() const;
};

/// Linear interpolation between order statistics at position q * (n - 1).
double percentile(std::vector<double> values, double q);

/// Percentiles of each column of `logits` (N x C). Throws UsageError when N == 0.
PercentileTable build_percentile_table(const Eigen::MatrixXd& logits);

/// Percentiles of the eval-mode means mu(x) over the rows of `x`.
PercentileTable build_percentile_table(const ScbmModel& model, const Eigen::MatrixXd& x);

}  // namespace scbm::intervention
