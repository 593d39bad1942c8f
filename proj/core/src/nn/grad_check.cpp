#include "scbm/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "scbm/random_stream.hpp"

namespace scbm::nn {

GradCheckResult grad_check(const ParamStore& params, const LossClosure& loss, double step,
                           std::size_t max_coords_per_param, std::uint64_t sample_seed) {
  ParamStore analytic = params.zeros_like();
  loss(params, &analytic);

  GradCheckResult result;
  ParamStore probe = params;
  RandomStream rng(sample_seed);
  for (auto& e : probe.entries()) {
    if (!e.trainable) continue;
    const auto n = static_cast<std::size_t>(e.value.size());
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords_per_param > 0 && max_coords_per_param < n) {
      for (std::size_t i = 0; i < max_coords_per_param; ++i) std::swap(coords[i], coords[i + rng.index(n - i)]);
      coords.resize(max_coords_per_param);
    }
    for (std::size_t k : coords) {
      double& x = e.value.data()[k];
      const double original = x;
      x = original + step;
      const double up = loss(probe, nullptr);
      x = original - step;
      const double down = loss(probe, nullptr);
      x = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.at(e.name).data()[k];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.coordinates;
      if (result.worst_index < 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = e.name;
        result.worst_index = static_cast<Eigen::Index>(k);
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace scbm::nn
