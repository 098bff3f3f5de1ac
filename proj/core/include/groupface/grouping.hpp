#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "groupface/tensor.hpp"

namespace groupface {

using Labels = std::vector<std::uint32_t>;

inline constexpr std::size_t kDefaultExpectationWindow = 64;

/// Running estimate of E[p(G_k|x)]: the per-group mean probability of each of
/// the most recent `window` batches, kept in a ring buffer.
class GroupState {
 public:
  GroupState(std::size_t num_groups, std::size_t window = kDefaultExpectationWindow);

  std::size_t num_groups() const { return num_groups_; }
  std::size_t window() const { return window_; }
  std::size_t batches_seen() const { return batches_seen_; }
  bool empty() const { return means_.empty(); }
  /// Stored batch means, oldest first.
  const std::deque<std::vector<double>>& means() const { return means_; }

  /// Appends one batch mean, evicting the oldest when the window is full.
  /// The mean must lie in [0,1] componentwise and sum to 1 within 1e-9.
  void push(std::vector<double> mean);

  /// Rebuilds a state from serialized fields.
  static GroupState restore(std::size_t num_groups, std::size_t window, std::uint64_t batches_seen,
                            std::vector<std::vector<double>> means);

  friend bool operator==(const GroupState&, const GroupState&) = default;

 private:
  std::size_t num_groups_;
  std::size_t window_;
  std::uint64_t batches_seen_ = 0;
  std::deque<std::vector<double>> means_;
};

/// Pushes the column means of a [N x K] probability batch.
void update_expectation(GroupState& state, const Tensor& batch_probs);

/// Unweighted mean of the stored batch means. Throws on an empty state.
Tensor current_expectation(const GroupState& state);

/// current_expectation, or the uniform 1/K vector before any batch is seen.
Tensor expectation_or_uniform(const GroupState& state);

/// Combines per-worker states that observed the same steps: the i-th stored
/// mean of the result is the average of the workers' i-th means.
GroupState merge(std::span<const GroupState> states);

/// p~_k = (p_k - e_k) / K + 1/K for every row of p.
Tensor expectation_normalized_probability(const Tensor& probs, const Tensor& expectation);

/// argmax_k p~(G_k|x) per row using the state's expectation (uniform if empty).
Labels assign_labels_self_distributed(const Tensor& probs, const GroupState& state);

/// argmax_k p(G_k|x) per row.
Labels assign_labels_naive(const Tensor& probs);

}  // namespace groupface
