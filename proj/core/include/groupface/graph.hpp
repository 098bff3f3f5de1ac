#pragma once

#include <functional>
#include <vector>

#include "groupface/tensor.hpp"

namespace groupface {

/// Records primitive operations in execution order and replays their
/// gradient rules in reverse.
///
/// Every operation writes exactly one output tensor. Recording order is the
/// execution order, so the tape is topologically sorted by construction.
/// Gradients of leaf tensors (parameters, inputs) accumulate across backward
/// calls until they are reset with Tensor::zero_grad(); gradients of
/// intermediate outputs are recomputed from scratch on every call.
class Graph {
 public:
  /// Gradient rule; reads the output gradient and adds into input gradients.
  /// Input gradient buffers are guaranteed to exist when it runs.
  using BackwardFn = std::function<void()>;

  void record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn backward);

  /// Populates d(loss)/d(t) for every tensor the loss depends on.
  void backward(const Tensor& loss);

  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  struct Op {
    Tensor output;
    std::vector<Tensor> inputs;
    BackwardFn backward;
  };
  std::vector<Op> ops_;
};

}  // namespace groupface
