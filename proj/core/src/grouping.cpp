#include "groupface/grouping.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace groupface {

namespace {

constexpr double kSumTolerance = 1e-9;

void check_probability_rows(const Tensor& probs, std::size_t num_groups, const char* where) {
  if (probs.rank() != 2 || probs.cols() != num_groups) {
    throw std::invalid_argument(std::string(where) + ": expected [N x " + std::to_string(num_groups) +
                                "] probabilities, got " + to_string(probs.shape()));
  }
}

}  // namespace

GroupState::GroupState(std::size_t num_groups, std::size_t window) : num_groups_(num_groups), window_(window) {
  if (num_groups < 2) throw std::invalid_argument("GroupState needs at least 2 groups");
  if (window == 0) throw std::invalid_argument("GroupState window must be positive");
}

void GroupState::push(std::vector<double> mean) {
  if (mean.size() != num_groups_) {
    throw std::invalid_argument("group mean has " + std::to_string(mean.size()) + " entries, state has K=" +
                                std::to_string(num_groups_));
  }
  double total = 0.0;
  for (double m : mean) {
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("group mean component outside [0,1]");
    total += m;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw std::invalid_argument("group mean sums to " + std::to_string(total) + ", expected 1");
  }
  if (means_.size() == window_) means_.pop_front();
  means_.push_back(std::move(mean));
  ++batches_seen_;
}

GroupState GroupState::restore(std::size_t num_groups, std::size_t window, std::uint64_t batches_seen,
                               std::vector<std::vector<double>> means) {
  if (means.size() > window) throw std::invalid_argument("restored GroupState holds more means than its window");
  if (batches_seen < means.size()) throw std::invalid_argument("restored GroupState batch count too small");
  GroupState state(num_groups, window);
  for (auto& m : means) state.push(std::move(m));
  state.batches_seen_ = batches_seen;
  return state;
}

void update_expectation(GroupState& state, const Tensor& batch_probs) {
  check_probability_rows(batch_probs, state.num_groups(), "update_expectation");
  const std::size_t n = batch_probs.rows(), k = batch_probs.cols();
  std::vector<double> mean(k, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) mean[c] += batch_probs.at(r, c);
  for (auto& m : mean) m /= static_cast<double>(n);
  state.push(std::move(mean));
}

Tensor current_expectation(const GroupState& state) {
  if (state.empty()) throw std::logic_error("current_expectation: no batch recorded yet");
  const auto& means = state.means();
  Tensor e({state.num_groups()}, 0.0);
  auto ev = e.data();
  for (const auto& m : means)
    for (std::size_t c = 0; c < m.size(); ++c) ev[c] += m[c];
  for (auto& v : ev) v /= static_cast<double>(means.size());
  return e;
}

Tensor expectation_or_uniform(const GroupState& state) {
  if (state.empty()) return Tensor({state.num_groups()}, 1.0 / static_cast<double>(state.num_groups()));
  return current_expectation(state);
}

GroupState merge(std::span<const GroupState> states) {
  if (states.empty()) throw std::invalid_argument("merge needs at least one state");
  const auto& first = states.front();
  for (const auto& s : states) {
    if (s.num_groups() != first.num_groups() || s.window() != first.window()) {
      throw std::invalid_argument("merge: states disagree on K or window (K=" + std::to_string(s.num_groups()) +
                                  "/" + std::to_string(first.num_groups()) + ", B=" + std::to_string(s.window()) +
                                  "/" + std::to_string(first.window()) + ")");
    }
    if (s.batches_seen() != first.batches_seen() || s.means().size() != first.means().size()) {
      throw std::invalid_argument("merge: states observed different numbers of batches");
    }
  }

  // Averaged as first + sum(x - first) / n so identical inputs merge exactly.
  const double count = static_cast<double>(states.size());
  std::vector<std::vector<double>> merged;
  merged.reserve(first.means().size());
  for (std::size_t step = 0; step < first.means().size(); ++step) {
    std::vector<double> avg = first.means()[step];
    std::vector<double> delta(avg.size(), 0.0);
    for (std::size_t w = 1; w < states.size(); ++w) {
      const auto& m = states[w].means()[step];
      for (std::size_t c = 0; c < avg.size(); ++c) delta[c] += m[c] - avg[c];
    }
    for (std::size_t c = 0; c < avg.size(); ++c) avg[c] += delta[c] / count;
    merged.push_back(std::move(avg));
  }
  return GroupState::restore(first.num_groups(), first.window(), first.batches_seen(), std::move(merged));
}

Tensor expectation_normalized_probability(const Tensor& probs, const Tensor& expectation) {
  const std::size_t k = expectation.size();
  check_probability_rows(probs, k, "expectation_normalized_probability");
  const double inv_k = 1.0 / static_cast<double>(k);
  Tensor out(probs.shape());
  auto pv = probs.data();
  auto ev = expectation.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < pv.size(); ++i) ov[i] = (pv[i] - ev[i % k]) * inv_k + inv_k;
  return out;
}

Labels assign_labels_self_distributed(const Tensor& probs, const GroupState& state) {
  const Tensor normalized = expectation_normalized_probability(probs, expectation_or_uniform(state));
  const std::size_t n = normalized.rows(), k = normalized.cols();
  Labels labels(n);
  auto v = normalized.data();
  for (std::size_t r = 0; r < n; ++r) labels[r] = static_cast<std::uint32_t>(argmax(v.subspan(r * k, k)));
  return labels;
}

Labels assign_labels_naive(const Tensor& probs) {
  if (probs.rank() != 2) throw std::invalid_argument("assign_labels_naive: expected [N x K], got " + to_string(probs.shape()));
  const std::size_t n = probs.rows(), k = probs.cols();
  Labels labels(n);
  auto v = probs.data();
  for (std::size_t r = 0; r < n; ++r) labels[r] = static_cast<std::uint32_t>(argmax(v.subspan(r * k, k)));
  return labels;
}

}  // namespace groupface
