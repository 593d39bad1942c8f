#pragma once

#include <cstdint>

#include "scbm/nn/param_store.hpp"

namespace scbm::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators with the same names/shapes as the parameters they track.
struct AdamState {
  AdamState(const ParamStore& params, AdamConfig config)
      : config(config), first_moment(params.zeros_like()), second_moment(params.zeros_like()) {}

  AdamConfig config;
  std::uint64_t step = 0;
  ParamStore first_moment;
  ParamStore second_moment;
};

/// One bias-corrected Adam update of every trainable entry. Throws
/// TrainingError naming the offending parameter if any gradient is non-finite;
/// in that case nothing is modified.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state);

}  // namespace scbm::nn
