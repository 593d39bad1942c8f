#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "scbm/nn/param_store.hpp"

namespace scbm::nn {

/// Deterministic loss closure. When `grads` is non-null it must be filled with
/// analytic gradients (same names as `params`).
using LossClosure = std::function<double(const ParamStore& params, ParamStore* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients with central differences. Error per coordinate is
/// |analytic - numeric| / max(1, |analytic|). With `max_coords_per_param` > 0, a
/// seeded sample of that many coordinates is checked per trainable entry.
GradCheckResult grad_check(const ParamStore& params, const LossClosure& loss, double step = 1e-5,
                           std::size_t max_coords_per_param = 0, std::uint64_t sample_seed = 0);

}  // namespace scbm::nn
