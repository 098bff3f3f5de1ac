#include "groupface/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "groupface/ops.hpp"

namespace groupface {

std::string to_string(MarginMode mode) {
  switch (mode) {
    case MarginMode::arcface: return "arcface";
    case MarginMode::cosface: return "cosface";
    case MarginMode::plain: return "plain";
  }
  return "unknown";
}

MarginMode parse_margin_mode(const std::string& text) {
  if (text == "arcface") return MarginMode::arcface;
  if (text == "cosface") return MarginMode::cosface;
  if (text == "plain") return MarginMode::plain;
  throw std::invalid_argument("unknown margin mode '" + text + "' (expected arcface, cosface or plain)");
}

double LossConfig::default_margin(MarginMode mode) {
  switch (mode) {
    case MarginMode::arcface: return 0.5;
    case MarginMode::cosface: return 0.35;
    case MarginMode::plain: return 0.0;
  }
  return 0.0;
}

void LossConfig::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("loss scale must be positive");
  if (!(margin >= 0.0)) throw std::invalid_argument("loss margin must be non-negative");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (margin_mode == MarginMode::arcface && !(margin < std::numbers::pi / 2)) {
    throw std::invalid_argument("arcface margin must be below pi/2");
  }
  if (margin_mode == MarginMode::cosface && !(margin < 1.0)) {
    throw std::invalid_argument("cosface margin must be below 1");
  }
}

namespace {

struct TargetLogit {
  double value;
  double slope;  // d value / d cosine
};

TargetLogit target_logit(double cosine, const LossConfig& cfg) {
  switch (cfg.margin_mode) {
    case MarginMode::plain: return {cosine, 1.0};
    case MarginMode::cosface: return {cosine - cfg.margin, 1.0};
    case MarginMode::arcface: {
      const double lo = -1.0 + kArccosClamp, hi = 1.0 - kArccosClamp;
      const double c = std::clamp(cosine, lo, hi);
      const double theta = std::acos(c);
      const double value = std::cos(theta + cfg.margin);
      if (cosine < lo || cosine > hi) return {value, 0.0};
      return {value, std::sin(theta + cfg.margin) / std::sin(theta)};
    }
  }
  throw std::logic_error("unhandled margin mode");
}

/// Shared softmax cross-entropy core: loss value and d(mean loss)/d(logit).
double cross_entropy(std::span<const double> logits, std::size_t n, std::size_t k, const Labels& labels,
                     std::vector<double>& dlogits) {
  dlogits.assign(n * k, 0.0);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = &logits[r * k];
    const double peak = *std::max_element(z, z + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(z[c] - peak);
    const double log_denom = std::log(denom) + peak;
    total += log_denom - z[labels[r]];
    for (std::size_t c = 0; c < k; ++c) dlogits[r * k + c] = std::exp(z[c] - log_denom) * inv_n;
    dlogits[r * k + labels[r]] -= inv_n;
  }
  return total * inv_n;
}

void check_labels(const Labels& labels, std::size_t n, std::size_t classes, const char* where) {
  if (labels.size() != n) {
    throw std::invalid_argument(std::string(where) + ": " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
  }
  for (auto label : labels) {
    if (label >= classes) {
      throw std::invalid_argument(std::string(where) + ": label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
}

}  // namespace

Tensor margin_softmax_loss(Graph& g, const Tensor& cosines, const Labels& labels, const LossConfig& cfg) {
  cfg.validate();
  if (cosines.rank() != 2) throw std::invalid_argument("margin_softmax_loss: cosines must be [N x M]");
  const std::size_t n = cosines.rows(), m = cosines.cols();
  check_labels(labels, n, m, "margin_softmax_loss");
  auto cv = cosines.data();
  for (double c : cv) {
    if (!(std::abs(c) <= 1.0 + 1e-9)) throw std::domain_error("margin_softmax_loss: cosine outside [-1, 1]");
  }

  std::vector<double> logits(cv.size());
  std::vector<double> target_slope(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) logits[r * m + c] = cfg.scale * cv[r * m + c];
    const auto target = target_logit(cv[r * m + labels[r]], cfg);
    logits[r * m + labels[r]] = cfg.scale * target.value;
    target_slope[r] = target.slope;
  }
  std::vector<double> dlogits;
  Tensor loss = Tensor::scalar(cross_entropy(logits, n, m, labels, dlogits));

  const double scale = cfg.scale;
  g.record(loss, {cosines}, [cosines, loss, labels, dlogits = std::move(dlogits), target_slope, n, m, scale]() mutable {
    const double upstream = std::as_const(loss).grad()[0];
    auto dc = cosines.grad_buffer();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        double local = scale * dlogits[r * m + c];
        if (c == labels[r]) local *= target_slope[r];
        dc[r * m + c] += upstream * local;
      }
  });
  return loss;
}

Tensor self_grouping_loss(Graph& g, const Tensor& gdn_logits, const Labels& labels) {
  if (gdn_logits.rank() != 2) throw std::invalid_argument("self_grouping_loss: logits must be [N x K]");
  const std::size_t n = gdn_logits.rows(), k = gdn_logits.cols();
  check_labels(labels, n, k, "self_grouping_loss");
  std::vector<double> dlogits;
  Tensor loss = Tensor::scalar(cross_entropy(gdn_logits.data(), n, k, labels, dlogits));
  g.record(loss, {gdn_logits}, [gdn_logits, loss, dlogits = std::move(dlogits)]() mutable {
    const double upstream = std::as_const(loss).grad()[0];
    auto dz = gdn_logits.grad_buffer();
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += upstream * dlogits[i];
  });
  return loss;
}

Tensor combined_loss(Graph& g, const Tensor& l1, const Tensor& l2, double lambda) {
  return add_scaled(g, l1, l2, lambda);
}

double combined_loss(double l1, double l2, double lambda) { return l1 + lambda * l2; }

}  // namespace groupface
