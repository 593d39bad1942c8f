#include "scbm/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "scbm/error.hpp"

namespace scbm::metrics {
namespace {

void check(const Matrix& probs, const Matrix& concepts, const char* what) {
  if (probs.rows() != concepts.rows() || probs.cols() != concepts.cols())
    throw ConfigError(std::string(what) + ": probability and concept shapes differ");
}

bool predicted(double p) { return p >= 0.5; }
bool positive(double c) { return c >= 0.5; }

}  // namespace

double concept_accuracy(const Matrix& probs, const Matrix& concepts) {
  check(probs, concepts, "concept_accuracy");
  if (probs.size() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j)
    for (Eigen::Index i = 0; i < probs.rows(); ++i) hits += predicted(probs(i, j)) == positive(concepts(i, j));
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double jaccard(const Matrix& probs, const Matrix& concepts) {
  check(probs, concepts, "jaccard");
  Eigen::Index inter = 0;
  Eigen::Index uni = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j)
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const bool a = predicted(probs(i, j));
      const bool b = positive(concepts(i, j));
      inter += a && b;
      uni += a || b;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double brier(const Matrix& probs, const Matrix& concepts) {
  check(probs, concepts, "brier");
  if (probs.size() == 0) return 0.0;
  return (probs - concepts).squaredNorm() / static_cast<double>(probs.size());
}

double ece(const Matrix& probs, const Matrix& concepts, int bins) {
  check(probs, concepts, "ece");
  if (bins < 1) throw ConfigError("ece: bins must be >= 1");
  if (probs.size() == 0) return 0.0;
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<Eigen::Index> count(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index j = 0; j < probs.cols(); ++j)
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const double p = probs(i, j);
      const double conf = std::max(p, 1.0 - p);
      int b = static_cast<int>(std::floor((conf - 0.5) / 0.5 * bins));
      b = std::clamp(b, 0, bins - 1);
      const auto k = static_cast<std::size_t>(b);
      conf_sum[k] += conf;
      acc_sum[k] += predicted(p) == positive(concepts(i, j)) ? 1.0 : 0.0;
      ++count[k];
    }
  double total = 0.0;
  const auto n = static_cast<double>(probs.size());
  for (std::size_t k = 0; k < count.size(); ++k) {
    if (count[k] == 0) continue;
    const auto m = static_cast<double>(count[k]);
    total += (m / n) * std::abs(acc_sum[k] / m - conf_sum[k] / m);
  }
  return total;
}

double target_accuracy(const Matrix& class_probs, const std::vector<int>& labels) {
  if (class_probs.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ConfigError("target_accuracy: one label per row required");
  if (labels.empty()) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index r = 0; r < class_probs.rows(); ++r) {
    Eigen::Index best = 0;
    class_probs.row(r).maxCoeff(&best);
    hits += best == labels[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

MetricReport report(const Matrix& concept_probs, const Matrix& concepts, const Matrix& class_probs,
                    const std::vector<int>& labels) {
  MetricReport r;
  r.target_accuracy = target_accuracy(class_probs, labels);
  r.concept_accuracy = concept_accuracy(concept_probs, concepts);
  r.jaccard = jaccard(concept_probs, concepts);
  r.brier = brier(concept_probs, concepts);
  r.ece = ece(concept_probs, concepts);
  return r;
}

}  // namespace scbm::metrics
