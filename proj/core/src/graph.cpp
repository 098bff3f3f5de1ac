#include "groupface/graph.hpp"

#include <stdexcept>
#include <unordered_set>

namespace groupface {

void Graph::record(const Tensor& output, std::vector<Tensor> inputs, BackwardFn backward) {
  if (!output.defined()) throw std::logic_error("cannot record an operation with an undefined output");
  for (const auto& op : ops_) {
    if (op.output.same_storage(output)) throw std::logic_error("tensor recorded as the output of two operations");
  }
  ops_.push_back(Op{output, std::move(inputs), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got " +
                                (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
  }

  // Reverse sweep marks the operations the loss depends on.
  std::unordered_set<const void*> needed{loss.id()};
  std::vector<bool> active(ops_.size(), false);
  for (std::size_t i = ops_.size(); i-- > 0;) {
    if (!needed.contains(ops_[i].output.id())) continue;
    active[i] = true;
    for (const auto& input : ops_[i].inputs) needed.insert(input.id());
  }

  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (!active[i]) continue;
    ops_[i].output.zero_grad();
    for (auto& input : ops_[i].inputs) input.ensure_grad();
  }

  Tensor seed = loss;
  seed.ensure_grad();
  seed.grad()[0] += 1.0;

  for (std::size_t i = ops_.size(); i-- > 0;) {
    if (active[i]) ops_[i].backward();
  }
}

}  // namespace groupface
