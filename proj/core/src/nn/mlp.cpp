#include "scbm/nn/mlp.hpp"

#include <cmath>

#include "scbm/error.hpp"
#include "scbm/nn/ops.hpp"

namespace scbm::nn {

void MlpSpec::validate() const {
  if (input_width <= 0) throw ConfigError("mlp: input width must be positive");
  if (layers.empty()) throw ConfigError("mlp: at least one layer is required");
  for (const auto& l : layers)
    if (l.width <= 0) throw ConfigError("mlp: layer widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("mlp: dropout rate must lie in [0, 1)");
}

std::string layer_name(const std::string& prefix, std::size_t layer, const char* field) {
  return prefix + "layer" + std::to_string(layer) + "." + field;
}

void init_mlp(const MlpSpec& spec, ParamStore& params, const std::string& prefix, RandomStream& rng) {
  spec.validate();
  Eigen::Index fan_in = spec.input_width;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& layer = spec.layers[l];
    const double bound =
        std::sqrt((layer.activation == Activation::Relu ? 6.0 : 3.0) / static_cast<double>(fan_in));
    Matrix w(fan_in, layer.width);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = bound * (2.0 * rng.uniform() - 1.0);
    params.add(layer_name(prefix, l, "weight"), std::move(w));
    params.add(layer_name(prefix, l, "bias"), Matrix::Zero(1, layer.width));
    if (spec.batch_norm && l + 1 < spec.layers.size()) {
      params.add(layer_name(prefix, l, "bn_gamma"), Matrix::Ones(1, layer.width));
      params.add(layer_name(prefix, l, "bn_beta"), Matrix::Zero(1, layer.width));
      params.add(layer_name(prefix, l, "bn_running_mean"), Matrix::Zero(1, layer.width), false);
      params.add(layer_name(prefix, l, "bn_running_var"), Matrix::Ones(1, layer.width), false);
    }
    fan_in = layer.width;
  }
}

namespace {

Var activate(Tape& tape, Var h, Activation a) {
  switch (a) {
    case Activation::Relu:
      return relu(tape, h);
    case Activation::Sigmoid:
      return sigmoid(tape, h);
    case Activation::Identity:
      break;
  }
  return h;
}

Var batch_norm_frozen(Tape& tape, Var x, Var gamma, Var beta, const Matrix& rmean, const Matrix& rvar,
                      double eps) {
  const Matrix& X = tape.value(x);
  const Matrix& G = tape.value(gamma);
  const Matrix& B = tape.value(beta);
  Eigen::RowVectorXd inv_std = (rvar.row(0).array() + eps).rsqrt();
  Matrix xhat(X.rows(), X.cols());
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    xhat.col(j) = ((X.col(j).array() - rmean(0, j)) * inv_std(j)).matrix();
    out.col(j) = ((X.col(j).array() - rmean(0, j)) * inv_std(j) * G(0, j) + B(0, j)).matrix();
  }
  return tape.record(std::move(out), {x, gamma, beta},
                     [x, gamma, beta, xhat = std::move(xhat), inv_std](Tape& tp, const Matrix& g) {
                       if (Matrix* gg = tp.grad_for(gamma)) *gg += g.cwiseProduct(xhat).colwise().sum();
                       if (Matrix* gb = tp.grad_for(beta)) *gb += g.colwise().sum();
                       if (Matrix* gx = tp.grad_for(x))
                         *gx += g * (inv_std.array() * tp.value(gamma).row(0).array()).matrix().asDiagonal();
                     });
}

}  // namespace

Var mlp_forward(Tape& tape, const MlpSpec& spec, ParamStore& params, const std::string& prefix, Var x, Mode mode,
                RandomStream& rng) {
  if (tape.value(x).cols() != spec.input_width)
    throw ConfigError("mlp: input has " + std::to_string(tape.value(x).cols()) + " columns, expected " +
                      std::to_string(spec.input_width));
  Var h = x;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const bool hidden = l + 1 < spec.layers.size();
    Var w = tape.param(params, layer_name(prefix, l, "weight"));
    Var b = tape.param(params, layer_name(prefix, l, "bias"));
    h = add_row(tape, matmul(tape, h, w), b);
    if (spec.batch_norm && hidden) {
      Var gamma = tape.param(params, layer_name(prefix, l, "bn_gamma"));
      Var beta = tape.param(params, layer_name(prefix, l, "bn_beta"));
      Matrix& rmean = params.at(layer_name(prefix, l, "bn_running_mean"));
      Matrix& rvar = params.at(layer_name(prefix, l, "bn_running_var"));
      if (mode == Mode::Train) {
        Eigen::RowVectorXd bm, bv;
        h = batch_norm_train(tape, h, gamma, beta, spec.bn_eps, &bm, &bv);
        rmean = spec.bn_momentum * rmean + (1.0 - spec.bn_momentum) * Matrix(bm);
        rvar = spec.bn_momentum * rvar + (1.0 - spec.bn_momentum) * Matrix(bv);
      } else {
        h = batch_norm_frozen(tape, h, gamma, beta, rmean, rvar, spec.bn_eps);
      }
    }
    h = activate(tape, h, spec.layers[l].activation);
    if (hidden && spec.dropout > 0.0 && mode == Mode::Train) {
      const Matrix& hv = tape.value(h);
      Matrix mask(hv.rows(), hv.cols());
      const double keep = 1.0 - spec.dropout;
      for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j) mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
      h = mul_const(tape, h, mask);
    }
  }
  return h;
}

Matrix mlp_eval(const MlpSpec& spec, const ParamStore& params, const std::string& prefix, const Matrix& x) {
  if (x.cols() != spec.input_width)
    throw ConfigError("mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                      std::to_string(spec.input_width));
  Matrix h = x;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const bool hidden = l + 1 < spec.layers.size();
    Matrix z = h * params.at(layer_name(prefix, l, "weight"));
    z.rowwise() += params.at(layer_name(prefix, l, "bias")).row(0);
    if (spec.batch_norm && hidden) {
      const Matrix& rmean = params.at(layer_name(prefix, l, "bn_running_mean"));
      const Matrix& rvar = params.at(layer_name(prefix, l, "bn_running_var"));
      const Matrix& gamma = params.at(layer_name(prefix, l, "bn_gamma"));
      const Matrix& beta = params.at(layer_name(prefix, l, "bn_beta"));
      Eigen::RowVectorXd inv_std = (rvar.row(0).array() + spec.bn_eps).rsqrt();
      for (Eigen::Index j = 0; j < z.cols(); ++j)
        z.col(j) = ((z.col(j).array() - rmean(0, j)) * inv_std(j) * gamma(0, j) + beta(0, j)).matrix();
    }
    switch (spec.layers[l].activation) {
      case Activation::Relu:
        z = z.cwiseMax(0.0);
        break;
      case Activation::Sigmoid:
        z = z.unaryExpr([](double v) { return sigmoid(v); });
        break;
      case Activation::Identity:
        break;
    }
    h = std::move(z);
  }
  return h;
}

}  // namespace scbm::nn
