#pragma once

#include <vector>

#include <Eigen/Core>

namespace scbm::metrics {

using Matrix = Eigen::MatrixXd;

// Concept metrics pool all N x C entries; a probability counts as a positive
// prediction when it is >= 0.5. Shape mismatches throw ConfigError.

double concept_accuracy(const Matrix& probs, const Matrix& concepts);
/// Intersection over union of predicted and true positives; 1 when both are empty.
double jaccard(const Matrix& probs, const Matrix& concepts);
double brier(const Matrix& probs, const Matrix& concepts);
/// Equal-width bins on confidence max(p, 1-p) over [0.5, 1].
double ece(const Matrix& probs, const Matrix& concepts, int bins = 10);

/// Fraction of rows whose argmax class (lowest index on ties) equals the label.
double target_accuracy(const Matrix& class_probs, const std::vector<int>& labels);

struct MetricReport {
  double target_accuracy = 0.0;
  double concept_accuracy = 0.0;
  double jaccard = 0.0;
  double brier = 0.0;
  double ece = 0.0;
};

MetricReport report(const Matrix& concept_probs, const Matrix& concepts, const Matrix& class_probs,
                    const std::vector<int>& labels);

}  // namespace scbm::metrics
