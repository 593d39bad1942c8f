#include "scbm/synth/dataset.hpp"

#include "scbm/error.hpp"

namespace scbm::synth {

const char* to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "val";
    case Split::Test:
      return "test";
    case Split::Unassigned:
      break;
  }
  return "unassigned";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val" || s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

std::vector<Index> Dataset::rows(Split s) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(static_cast<Index>(i));
  return out;
}

Eigen::RowVectorXd Dataset::concept_row(Index r) const { return concepts.row(r).cast<double>(); }

Dataset Dataset::subset(const std::vector<Index>& idx) const {
  Dataset out;
  const auto n = static_cast<Index>(idx.size());
  out.x.resize(n, x.cols());
  out.concepts.resize(n, concepts.cols());
  out.labels.resize(idx.size());
  out.split.resize(idx.size());
  if (logits) out.logits = Matrix(n, logits->cols());
  for (Index k = 0; k < n; ++k) {
    const Index r = idx[static_cast<std::size_t>(k)];
    out.x.row(k) = x.row(r);
    out.concepts.row(k) = concepts.row(r);
    out.labels[static_cast<std::size_t>(k)] = labels[static_cast<std::size_t>(r)];
    out.split[static_cast<std::size_t>(k)] = split[static_cast<std::size_t>(r)];
    if (logits) out.logits->row(k) = logits->row(r);
  }
  out.sigma = sigma;
  return out;
}

void Dataset::validate() const {
  const Index n = x.rows();
  if (concepts.rows() != n || static_cast<Index>(labels.size()) != n || static_cast<Index>(split.size()) != n)
    throw ConfigError("dataset: covariates, concepts, labels and split tags disagree on the number of rows");
  if ((concepts.array() > 1).any()) throw ConfigError("dataset: concept entries must be 0 or 1");
  for (int y : labels)
    if (y < 0) throw ConfigError("dataset: labels must be non-negative class indices");
  if (logits && (logits->rows() != n || logits->cols() != concepts.cols()))
    throw ConfigError("dataset: logits shape does not match concepts");
  if (sigma && (sigma->rows() != concepts.cols() || sigma->cols() != concepts.cols()))
    throw ConfigError("dataset: sigma must be C x C");
}

}  // namespace scbm::synth
