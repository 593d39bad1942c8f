#include "scbm/nn/tape.hpp"

#include "scbm/error.hpp"

namespace scbm::nn {

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  const auto& e = store.entry(name);
  Node n;
  n.value = e.value;
  n.requires_grad = e.trainable;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (Var v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Matrix* Tape::grad_for(Var v) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

ParamStore Tape::backward(Var output, const Matrix& output_grad, const ParamStore& like) {
  if (consumed_) throw UsageError("tape already consumed by a previous backward pass");
  consumed_ = true;
  const Node& out = nodes_[output.id];
  if (output_grad.rows() != out.value.rows() || output_grad.cols() != out.value.cols())
    throw ConfigError("output gradient shape does not match the tape output");

  if (Matrix* g = grad_for(output)) *g += output_grad;

  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // Inputs always precede their op, so the closure never touches n.grad.
    n.backward(*this, n.grad);
  }

  ParamStore grads = like.zeros_like();
  for (const Node& n : nodes_) {
    if (n.param_name.empty() || !n.has_grad) continue;
    if (!grads.contains(n.param_name)) continue;
    grads.at(n.param_name) += n.grad;
  }
  return grads;
}

ParamStore Tape::backward(Var output, const ParamStore& like) {
  const Matrix& v = value(output);
  return backward(output, Matrix::Ones(v.rows(), v.cols()), like);
}

}  // namespace scbm::nn
