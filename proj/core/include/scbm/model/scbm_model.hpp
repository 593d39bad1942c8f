#pragma once

#include <cstdint>
#include <vector>

#include "scbm/gauss/gaussian.hpp"
#include "scbm/model/config.hpp"
#include "scbm/nn/mlp.hpp"
#include "scbm/nn/param_store.hpp"

namespace scbm {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Fixed Cholesky scale of the hard CBM: eta = mu + 1e-3 * eps.
inline constexpr double kHardCbmScale = 1e-3;

/// Parameter names shared by every variant.
inline constexpr const char* kBackbonePrefix = "backbone.";
inline constexpr const char* kHeadWeight = "head.weight";
inline constexpr const char* kHeadBias = "head.bias";
inline constexpr const char* kGlobalCholesky = "sigma.raw";

/// Concept predictor h_phi (MLP backbone emitting the Gaussian parameters of
/// the concept logits) plus the linear target head g_psi.
///
/// Backbone outputs per variant:
///   Global    : C means; the factor is the shared `sigma.raw` parameter
///   Amortized : C means followed by C(C+1)/2 packed raw Cholesky values
///   HardCbm   : C means; the factor is fixed to 1e-3 * I
class ScbmModel {
 public:
  ScbmModel() = default;
  ScbmModel(Variant variant, Index num_features, Index num_concepts, const ArchConfig& arch, std::uint64_t seed);

  Variant variant() const { return variant_; }
  Index num_features() const { return backbone_.input_width; }
  Index num_concepts() const { return num_concepts_; }
  Index num_classes() const { return num_classes_; }
  const nn::MlpSpec& backbone() const { return backbone_; }
  const ArchConfig& arch() const { return arch_; }

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Eval-mode concept distributions, one per row of `x`.
  std::vector<gauss::ConceptDistribution> concept_head(const Matrix& x) const;
  gauss::ConceptDistribution concept_head_one(const RowVector& x) const;

  /// Factor shared by all inputs (global and hard-CBM variants).
  Matrix shared_cholesky() const;
  void set_global_cholesky(const Matrix& chol);

  /// Class probabilities softmax(g_psi(c)) for each row of `concepts`.
  Matrix head_probs(const Matrix& concepts) const;

  /// Rebuilds a model around an existing parameter store (checkpoint loading).
  static ScbmModel from_params(Variant variant, Index num_features, Index num_concepts, const ArchConfig& arch,
                               nn::ParamStore params);

 private:
  static nn::MlpSpec make_backbone(Variant variant, Index num_features, Index num_concepts, const ArchConfig& arch);
  gauss::ConceptDistribution distribution_from_raw(const RowVector& raw) const;

  Variant variant_ = Variant::Global;
  Index num_concepts_ = 0;
  Index num_classes_ = 2;
  ArchConfig arch_;
  nn::MlpSpec backbone_;
  nn::ParamStore params_;
};

/// Row-wise softmax of logits.
Matrix softmax_rows(const Matrix& logits);

}  // namespace scbm
