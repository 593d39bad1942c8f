#include "scbm/model/scbm_model.hpp"

#include <cmath>

#include "scbm/error.hpp"
#include "scbm/random_stream.hpp"

namespace scbm {

nn::MlpSpec ScbmModel::make_backbone(Variant variant, Index num_features, Index num_concepts, const ArchConfig& arch) {
  nn::MlpSpec spec;
  spec.input_width = num_features;
  for (Index l = 0; l < arch.hidden_layers; ++l) spec.layers.push_back({arch.hidden_width, nn::Activation::Relu});
  const Index out = variant == Variant::Amortized ? num_concepts + gauss::packed_size(num_concepts) : num_concepts;
  spec.layers.push_back({out, nn::Activation::Identity});
  spec.batch_norm = arch.batch_norm;
  spec.dropout = arch.dropout;
  spec.validate();
  return spec;
}

ScbmModel::ScbmModel(Variant variant, Index num_features, Index num_concepts, const ArchConfig& arch,
                     std::uint64_t seed)
    : variant_(variant),
      num_concepts_(num_concepts),
      num_classes_(arch.num_classes),
      arch_(arch),
      backbone_(make_backbone(variant, num_features, num_concepts, arch)) {
  if (num_concepts < 1) throw ConfigError("model: at least one concept is required");
  RandomStream rng = RandomStream::derive(seed, {0x1417});
  nn::init_mlp(backbone_, params_, kBackbonePrefix, rng);

  nn::MlpSpec head;
  head.input_width = num_concepts;
  head.layers.push_back({num_classes_, nn::Activation::Identity});
  nn::ParamStore head_params;
  nn::init_mlp(head, head_params, "head.", rng);
  params_.add(kHeadWeight, head_params.at("head.layer0.weight"));
  params_.add(kHeadBias, head_params.at("head.layer0.bias"));

  if (variant == Variant::Global)
    params_.add(kGlobalCholesky, gauss::unbuild_cholesky(Matrix::Identity(num_concepts, num_concepts)).transpose());
}

ScbmModel ScbmModel::from_params(Variant variant, Index num_features, Index num_concepts, const ArchConfig& arch,
                                 nn::ParamStore params) {
  ScbmModel m;
  m.variant_ = variant;
  m.num_concepts_ = num_concepts;
  m.num_classes_ = arch.num_classes;
  m.arch_ = arch;
  m.backbone_ = make_backbone(variant, num_features, num_concepts, arch);

  // Validate that the store has what the spec expects.
  nn::ParamStore expected;
  RandomStream rng(0);
  nn::init_mlp(m.backbone_, expected, kBackbonePrefix, rng);
  expected.add(kHeadWeight, Matrix::Zero(num_concepts, arch.num_classes));
  expected.add(kHeadBias, Matrix::Zero(1, arch.num_classes));
  if (variant == Variant::Global) expected.add(kGlobalCholesky, Matrix::Zero(1, gauss::packed_size(num_concepts)));
  if (expected.size() != params.size()) throw ConfigError("model: parameter count does not match the architecture");
  for (const auto& e : expected.entries()) {
    const auto& got = params.entry(e.name);
    if (got.value.rows() != e.value.rows() || got.value.cols() != e.value.cols())
      throw ConfigError("model: parameter '" + e.name + "' has the wrong shape");
  }
  m.params_ = std::move(params);
  return m;
}

Matrix ScbmModel::shared_cholesky() const {
  switch (variant_) {
    case Variant::Global:
      return gauss::build_cholesky(params_.at(kGlobalCholesky).row(0).transpose());
    case Variant::HardCbm:
      return kHardCbmScale * Matrix::Identity(num_concepts_, num_concepts_);
    case Variant::Amortized:
      break;
  }
  throw UsageError("model: the amortized variant has no shared covariance");
}

void ScbmModel::set_global_cholesky(const Matrix& chol) {
  if (variant_ != Variant::Global) throw UsageError("model: only the global variant has a learned shared factor");
  params_.at(kGlobalCholesky) = gauss::unbuild_cholesky(chol).transpose();
}

gauss::ConceptDistribution ScbmModel::distribution_from_raw(const RowVector& raw) const {
  gauss::ConceptDistribution d;
  d.mean = raw.head(num_concepts_).transpose();
  if (variant_ == Variant::Amortized)
    d.chol = gauss::build_cholesky(raw.tail(gauss::packed_size(num_concepts_)).transpose());
  else
    d.chol = shared_cholesky();
  return d;
}

std::vector<gauss::ConceptDistribution> ScbmModel::concept_head(const Matrix& x) const {
  // Row at a time: a batched product may round differently from a single-row
  // one, and served single instances must match batch evaluation exactly.
  std::vector<gauss::ConceptDistribution> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Index r = 0; r < x.rows(); ++r) {
    const Matrix raw = nn::mlp_eval(backbone_, params_, kBackbonePrefix, x.row(r));
    out.push_back(distribution_from_raw(raw.row(0)));
  }
  return out;
}

gauss::ConceptDistribution ScbmModel::concept_head_one(const RowVector& x) const {
  return concept_head(Matrix(x)).front();
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    RowVector e = (logits.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Matrix ScbmModel::head_probs(const Matrix& concepts) const {
  if (concepts.cols() != num_concepts_) throw ConfigError("model: concept vector has the wrong width");
  Matrix logits = concepts * params_.at(kHeadWeight);
  logits.rowwise() += params_.at(kHeadBias).row(0);
  return softmax_rows(logits);
}

}  // namespace scbm
