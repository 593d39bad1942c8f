#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scbm::synth {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

enum class Split : std::uint8_t { Unassigned = 0, Train = 1, Validation = 2, Test = 3 };

const char* to_string(Split s);
/// Accepts "train", "val"/"validation", "test"; throws ConfigError otherwise.
Split parse_split(const std::string& s);

/// Covariates, binary concepts and labels, one row per sample. Synthetic data
/// additionally carries the true logits and the concept covariance.
struct Dataset {
  Matrix x;              // N x p
  BinaryMatrix concepts;  // N x C, entries 0/1
  std::vector<int> labels;
  std::vector<Split> split;
  std::optional<Matrix> logits;  // N x C
  std::optional<Matrix> sigma;   // C x C

  Index size() const { return x.rows(); }
  Index num_features() const { return x.cols(); }
  Index num_concepts() const { return concepts.cols(); }

  /// Row indices tagged with `s`, ascending.
  std::vector<Index> rows(Split s) const;
  /// Concepts of one row as doubles.
  Eigen::RowVectorXd concept_row(Index r) const;
  /// Gathers the given rows (covariates, concepts, labels; split tags kept).
  Dataset subset(const std::vector<Index>& rows) const;

  /// Throws ConfigError on inconsistent shapes or non-binary entries.
  void validate() const;
};

}  // namespace scbm::synth
