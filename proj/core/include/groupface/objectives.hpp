#pragma once

#include <cstdint>
#include <string>

#include "groupface/graph.hpp"
#include "groupface/grouping.hpp"
#include "groupface/tensor.hpp"

namespace groupface {

enum class MarginMode { arcface, cosface, plain };

std::string to_string(MarginMode mode);
MarginMode parse_margin_mode(const std::string& text);

struct LossConfig {
  MarginMode margin_mode = MarginMode::arcface;
  double scale = 64.0;
  double margin = 0.5;
  double lambda = 0.1;

  /// Default margin for a mode: 0.5 for arcface, 0.35 for cosface, 0 for plain.
  static double default_margin(MarginMode mode);
  void validate() const;
};

/// Target cosines are clamped to this distance from +-1 before arccos.
inline constexpr double kArccosClamp = 1e-7;

/// Mean margin-softmax cross-entropy over cosine logits [N x M].
///
/// The target logit becomes s*cos(theta_y + m) (arcface), s*(cos theta_y - m)
/// (cosface) or s*cos theta_y (plain); the others stay s*cos theta_j.
Tensor margin_softmax_loss(Graph& g, const Tensor& cosines, const Labels& labels, const LossConfig& cfg);

/// Mean cross-entropy between softmax(gdn_logits) and fixed group labels.
Tensor self_grouping_loss(Graph& g, const Tensor& gdn_logits, const Labels& labels);

/// l1 + lambda * l2.
Tensor combined_loss(Graph& g, const Tensor& l1, const Tensor& l2, double lambda);
double combined_loss(double l1, double l2, double lambda);

}  // namespace groupface
