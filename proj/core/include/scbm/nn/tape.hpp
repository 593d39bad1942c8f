#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "scbm/nn/param_store.hpp"

namespace scbm::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Operation-level reverse-mode tape. Every recorded op stores its forward value
/// and a closure that pushes the op's output gradient into its inputs. A tape
/// is single-use: `backward` consumes it.
class Tape {
 public:
  /// Receives the gradient of the op's output; accumulates into inputs via
  /// `grad_for`.
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value);

  /// Leaf bound to a parameter. Gradients for it are reported under `name`.
  Var param(const ParamStore& store, const std::string& name);

  /// Records an op. `inputs` decide whether the node needs a gradient at all;
  /// `backward` is only invoked when it does and has received one.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of `v`, zero-initialized on first access. Returns nullptr
  /// when `v` does not depend on any parameter.
  Matrix* grad_for(Var v);

  /// Runs the reverse pass from `output` seeded with `output_grad`. Returns a
  /// gradient store with the names and shapes of `like`; parameters not on the
  /// tape get exact zeros. Throws UsageError when the tape was already consumed.
  ParamStore backward(Var output, const Matrix& output_grad, const ParamStore& like);

  /// Convenience for scalar outputs (seed 1).
  ParamStore backward(Var output, const ParamStore& like);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    std::string param_name;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace scbm::nn
