#pragma once

#include <string>
#include <vector>

#include "scbm/nn/param_store.hpp"
#include "scbm/nn/tape.hpp"
#include "scbm/random_stream.hpp"

namespace scbm::nn {

enum class Activation { Relu, Identity, Sigmoid };

struct LayerSpec {
  Eigen::Index width = 0;
  Activation activation = Activation::Relu;
};

/// Dense network description. Batch normalization and dropout, when enabled,
/// apply to every layer except the last (dense -> batch norm -> activation ->
/// dropout).
struct MlpSpec {
  Eigen::Index input_width = 0;
  std::vector<LayerSpec> layers;
  bool batch_norm = false;
  double dropout = 0.0;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  Eigen::Index output_width() const { return layers.empty() ? input_width : layers.back().width; }
  /// Throws ConfigError on an empty layer list, non-positive widths, or a
  /// dropout rate outside [0, 1).
  void validate() const;
};

enum class Mode { Train, Eval };

/// Seeded uniform fan-in initialization (He-style bound sqrt(6/fan_in) for ReLU
/// layers, sqrt(3/fan_in) otherwise); biases zero, batch-norm scale one.
void init_mlp(const MlpSpec& spec, ParamStore& params, const std::string& prefix, RandomStream& rng);

/// Records the network on `tape`. In Train mode dropout masks are drawn from
/// `rng` and batch-norm running statistics in `params` are updated; in Eval
/// mode running statistics are used and dropout is off.
Var mlp_forward(Tape& tape, const MlpSpec& spec, ParamStore& params, const std::string& prefix, Var x, Mode mode,
                RandomStream& rng);

/// Eval-mode forward without gradient bookkeeping. Pure in `params`.
Matrix mlp_eval(const MlpSpec& spec, const ParamStore& params, const std::string& prefix, const Matrix& x);

std::string layer_name(const std::string& prefix, std::size_t layer, const char* field);

}  // namespace scbm::nn
