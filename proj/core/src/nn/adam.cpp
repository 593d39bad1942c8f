#include "scbm/nn/adam.hpp"

#include <cmath>

#include "scbm/error.hpp"

namespace scbm::nn {

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state) {
  for (const auto& e : params.entries()) {
    if (!e.trainable) continue;
    const Matrix& g = grads.at(e.name);
    if (g.rows() != e.value.rows() || g.cols() != e.value.cols())
      throw ConfigError("adam: gradient shape mismatch for '" + e.name + "'");
    if (!g.allFinite()) throw TrainingError("adam: non-finite gradient for parameter '" + e.name + "'");
  }

  state.step += 1;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);

  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    const Matrix& g = grads.at(e.name);
    Matrix& m = state.first_moment.at(e.name);
    Matrix& v = state.second_moment.at(e.name);
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    e.value.array() -= c.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.epsilon);
  }
}

}  // namespace scbm::nn
