#pragma once

#include "groupface/graph.hpp"
#include "groupface/tensor.hpp"

namespace groupface {

enum class Mode { train, eval };

/// Running statistics owned by one batch-norm layer.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t width = 1);
};

// Every op below computes its forward value eagerly and records its gradient
// rule on the graph. Row-wise ops act on rank-2 [N x D] tensors.

/// y = x W + b for x [N x Din], W [Din x Dout], b [Dout].
Tensor fully_connected(Graph& g, const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Per-column normalization followed by gamma * xhat + beta. Train mode uses
/// batch statistics (biased variance) and folds them into the running
/// statistics; eval mode uses the running statistics.
Tensor batch_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  Mode mode);

Tensor relu(Graph& g, const Tensor& x);

/// Row-wise softmax, max-subtracted.
Tensor softmax(Graph& g, const Tensor& z);

/// Scales every row to unit Euclidean norm. Zero rows are rejected.
Tensor l2_normalize(Graph& g, const Tensor& v);

/// a * b^T for a [N x D], b [M x D].
Tensor matmul_transposed(Graph& g, const Tensor& a, const Tensor& b);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor multiply(Graph& g, const Tensor& a, const Tensor& b);
/// a + factor * b, element-wise.
Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double factor);
Tensor sum(Graph& g, const Tensor& x);
/// [N x A] ++ [N x B] -> [N x (A+B)].
Tensor concat_columns(Graph& g, const Tensor& a, const Tensor& b);

}  // namespace groupface
