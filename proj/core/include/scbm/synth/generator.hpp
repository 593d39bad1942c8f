#pragma once

#include <cstdint>
#include <string>

#include "scbm/synth/dataset.hpp"

namespace scbm::synth {

struct SynthConfig {
  Index n = 50'000;
  Index p = 1'500;
  Index c = 100;
  Index rank = 10;  // columns of the low-rank covariance factor W
  std::uint64_t seed = 0;

  static SynthConfig paper(std::uint64_t seed = 0) { return SynthConfig{50'000, 1'500, 100, 10, seed}; }
  static SynthConfig desk(std::uint64_t seed = 0) { return SynthConfig{5'000, 100, 15, 10, seed}; }
  /// "paper" or "desk"; throws ConfigError otherwise.
  static SynthConfig preset(const std::string& name, std::uint64_t seed = 0);

  void validate() const;
};

/// Synthetic tabular benchmark with correlated concepts:
///   Sigma = W W^T + diag(delta), W_ij ~ N(0,1), delta_i ~ U[0,1]
///   eta_n ~ N(0, Sigma), c_ni = 1{eta_ni >= 0}
///   x_n = h(eta_n) + eps_n with h a random ReLU MLP, eps_n ~ N(0, I)
///   y_n = 1{g(c_n) >= median_n g(c_n)} with g a random linear map, rows tied
///   at the median ordered by a seeded random key so exactly floor(N/2) get 0
/// The result is split 60/20/20 with `split(ds, seed)`. Pure in `cfg`.
Dataset generate(const SynthConfig& cfg);

/// Seeded shuffle into train/val/test of sizes round(0.6N), round(0.2N), rest.
void split(Dataset& ds, std::uint64_t seed);

}  // namespace scbm::synth
