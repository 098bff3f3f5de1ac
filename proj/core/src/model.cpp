#include "groupface/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace groupface {

std::string to_string(EnsembleMode mode) { return mode == EnsembleMode::soft ? "soft" : "hard"; }
std::string to_string(FusionMode mode) { return mode == FusionMode::aggregate ? "aggregate" : "concatenate"; }

EnsembleMode parse_ensemble_mode(const std::string& text) {
  if (text == "soft") return EnsembleMode::soft;
  if (text == "hard") return EnsembleMode::hard;
  throw std::invalid_argument("unknown ensemble mode '" + text + "' (expected soft or hard)");
}

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "aggregate") return FusionMode::aggregate;
  if (text == "concatenate") return FusionMode::concatenate;
  throw std::invalid_argument("unknown fusion mode '" + text + "' (expected aggregate or concatenate)");
}

void ModelConfig::validate() const {
  if (input_dim == 0 || shared_dim == 0 || embed_dim == 0 || gdn_hidden_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  if (num_groups < 2) throw std::invalid_argument("model needs at least 2 groups");
  if (num_identities < 2) throw std::invalid_argument("model needs at least 2 identities");
  for (auto width : backbone_layers) {
    if (width == 0) throw std::invalid_argument("backbone widths must be positive");
  }
}

std::size_t ModelConfig::final_dim() const {
  return group_branch && fusion_mode == FusionMode::concatenate ? 2 * embed_dim : embed_dim;
}

namespace {

void check_reps(const Tensor& probs, const std::vector<Tensor>& reps, const char* where) {
  if (reps.empty()) throw std::invalid_argument(std::string(where) + ": no group representations");
  if (probs.rank() != 2 || probs.cols() != reps.size()) {
    throw std::invalid_argument(std::string(where) + ": probabilities " + to_string(probs.shape()) + " for " +
                                std::to_string(reps.size()) + " group representations");
  }
  for (const auto& r : reps) {
    if (r.shape() != reps.front().shape() || r.rank() != 2 || r.rows() != probs.rows()) {
      throw std::invalid_argument(std::string(where) + ": group representation shape " + to_string(r.shape()) +
                                  " does not match " + to_string(reps.front().shape()));
    }
  }
}

Linear make_linear(std::size_t in, std::size_t out) { return {Tensor({in, out}), Tensor({out})}; }
BatchNorm make_batch_norm(std::size_t width) { return {Tensor({width}, 1.0), Tensor({width}, 0.0), BatchNormState(width)}; }

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
}

void init_linear(Linear& layer, std::mt19937_64& rng) {
  fill_uniform(layer.weight, 1.0 / std::sqrt(static_cast<double>(layer.weight.rows())), rng);
}

Tensor apply(Graph& g, const Linear& layer, const Tensor& x) { return fully_connected(g, x, layer.weight, layer.bias); }
Tensor apply(Graph& g, BatchNorm& bn, const Tensor& x, Mode mode) {
  return batch_norm(g, x, bn.gamma, bn.beta, bn.state, mode);
}

void copy_values(const Tensor& from, Tensor& to) {
  auto src = from.data();
  auto dst = to.data();
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace

Tensor soft_ensemble(Graph& g, const Tensor& group_probs, const std::vector<Tensor>& group_reps) {
  check_reps(group_probs, group_reps, "soft_ensemble");
  const std::size_t n = group_probs.rows(), k = group_reps.size(), e = group_reps.front().cols();
  Tensor y({n, e});
  auto yv = y.data();
  auto pv = group_probs.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < k; ++j) {
      const double p = pv[r * k + j];
      auto rv = group_reps[j].data();
      for (std::size_t c = 0; c < e; ++c) yv[r * e + c] += p * rv[r * e + c];
    }

  std::vector<Tensor> inputs{group_probs};
  inputs.insert(inputs.end(), group_reps.begin(), group_reps.end());
  g.record(y, inputs, [probs = group_probs, reps = group_reps, y, n, k, e]() mutable {
    auto dy = std::as_const(y).grad();
    auto pv = std::as_const(probs).data();
    auto dp = probs.grad_buffer();
    for (std::size_t j = 0; j < k; ++j) {
      auto rv = std::as_const(reps[j]).data();
      auto dr = reps[j].grad_buffer();
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < e; ++c) {
          acc += dy[r * e + c] * rv[r * e + c];
          dr[r * e + c] += pv[r * k + j] * dy[r * e + c];
        }
        dp[r * k + j] += acc;
      }
    }
  });
  return y;
}

Tensor hard_ensemble(Graph& g, const Tensor& group_probs, const std::vector<Tensor>& group_reps) {
  check_reps(group_probs, group_reps, "hard_ensemble");
  const std::size_t n = group_probs.rows(), k = group_reps.size(), e = group_reps.front().cols();
  std::vector<std::size_t> chosen(n);
  Tensor y({n, e});
  auto yv = y.data();
  auto pv = group_probs.data();
  for (std::size_t r = 0; r < n; ++r) {
    chosen[r] = argmax(pv.subspan(r * k, k));
    auto rv = group_reps[chosen[r]].data();
    std::copy_n(&rv[r * e], e, &yv[r * e]);
  }
  g.record(y, group_reps, [reps = group_reps, y, chosen, n, e]() mutable {
    auto dy = std::as_const(y).grad();
    for (std::size_t r = 0; r < n; ++r) {
      auto dr = reps[chosen[r]].grad_buffer();
      for (std::size_t c = 0; c < e; ++c) dr[r * e + c] += dy[r * e + c];
    }
  });
  return y;
}

Tensor fuse(Graph& g, const Tensor& instance, const Tensor& group_rep, FusionMode mode) {
  if (instance.shape() != group_rep.shape()) {
    throw std::invalid_argument("fuse: shape mismatch " + to_string(instance.shape()) + " vs " +
                                to_string(group_rep.shape()));
  }
  switch (mode) {
    case FusionMode::aggregate: return add(g, instance, group_rep);
    case FusionMode::concatenate: return concat_columns(g, instance, group_rep);
  }
  throw std::invalid_argument("fuse: unknown fusion mode");
}

Tensor identity_logits(Graph& g, const Tensor& v, const Tensor& classifier) {
  if (v.rank() != 2 || classifier.rank() != 2 || v.cols() != classifier.cols()) {
    throw std::invalid_argument("identity_logits: features " + to_string(v.shape()) + " vs classifier " +
                                to_string(classifier.shape()));
  }
  return matmul_transposed(g, l2_normalize(g, v), l2_normalize(g, classifier));
}

GroupFaceModel::GroupFaceModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t width = config_.input_dim;
  for (auto out : config_.backbone_layers) {
    backbone_.push_back({make_linear(width, out), make_batch_norm(out)});
    width = out;
  }
  shared_bn_ = make_batch_norm(width);
  shared_fc_ = make_linear(width, config_.shared_dim);
  instance_head_ = make_linear(config_.shared_dim, config_.embed_dim);
  for (std::size_t k = 0; k < config_.num_groups; ++k) {
    group_heads_.push_back(make_linear(config_.shared_dim, config_.embed_dim));
  }
  gdn_bn1_ = make_batch_norm(config_.embed_dim);
  gdn_fc1_ = make_linear(config_.embed_dim, config_.gdn_hidden_dim);
  gdn_bn2_ = make_batch_norm(config_.gdn_hidden_dim);
  gdn_fc2_ = make_linear(config_.gdn_hidden_dim, config_.gdn_hidden_dim);
  gdn_out_ = make_linear(config_.gdn_hidden_dim, config_.num_groups);
  classifier_ = Tensor({config_.num_identities, config_.final_dim()});
}

GroupFaceModel::GroupFaceModel(ModelConfig config, std::uint64_t seed) : GroupFaceModel(std::move(config)) {
  std::mt19937_64 rng(seed);
  for (auto& block : backbone_) init_linear(block.fc, rng);
  init_linear(shared_fc_, rng);
  init_linear(instance_head_, rng);
  for (auto& head : group_heads_) init_linear(head, rng);
  init_linear(gdn_fc1_, rng);
  init_linear(gdn_fc2_, rng);
  init_linear(gdn_out_, rng);
  fill_uniform(classifier_, 1.0 / std::sqrt(static_cast<double>(classifier_.cols())), rng);
}

GroupFaceModel GroupFaceModel::clone() const {
  GroupFaceModel copy(config_);
  auto src = named_parameters();
  auto dst = copy.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) copy_values(src[i].tensor, dst[i].tensor);
  auto src_bn = batch_norms();
  auto dst_bn = copy.batch_norms();
  for (std::size_t i = 0; i < src_bn.size(); ++i) {
    copy_values(src_bn[i]->state.running_mean, dst_bn[i]->state.running_mean);
    copy_values(src_bn[i]->state.running_var, dst_bn[i]->state.running_var);
  }
  return copy;
}

ForwardOutputs GroupFaceModel::forward(Graph& g, const Tensor& x, Mode mode) {
  if (x.rank() != 2 || x.cols() != config_.input_dim) {
    throw std::invalid_argument("forward: input " + (x.defined() ? to_string(x.shape()) : std::string("undefined")) +
                                " does not match input_dim " + std::to_string(config_.input_dim));
  }
  ForwardOutputs out;
  Tensor h = x;
  for (auto& block : backbone_) h = relu(g, apply(g, block.bn, apply(g, block.fc, h), mode));
  out.shared_feature = relu(g, apply(g, shared_fc_, apply(g, shared_bn_, h, mode)));
  out.instance = apply(g, instance_head_, out.shared_feature);

  const Tensor gdn_input = config_.gdn_input_gradient ? out.instance : out.instance.clone();
  Tensor a = relu(g, apply(g, gdn_fc1_, apply(g, gdn_bn1_, gdn_input, mode)));
  out.gdn_intermediate = apply(g, gdn_fc2_, apply(g, gdn_bn2_, a, mode));
  out.gdn_logits = apply(g, gdn_out_, relu(g, out.gdn_intermediate));
  out.group_probs = softmax(g, out.gdn_logits);

  if (config_.group_branch) {
    for (const auto& head : group_heads_) out.group_reps.push_back(apply(g, head, out.shared_feature));
    out.group_rep = config_.ensemble_mode == EnsembleMode::soft ? soft_ensemble(g, out.group_probs, out.group_reps)
                                                                : hard_ensemble(g, out.group_probs, out.group_reps);
    out.final_rep = fuse(g, out.instance, out.group_rep, config_.fusion_mode);
  } else {
    out.final_rep = out.instance;
  }
  out.logits = identity_logits(g, out.final_rep, classifier_);
  return out;
}

std::vector<NamedTensor> GroupFaceModel::named_parameters() const {
  std::vector<NamedTensor> params;
  auto add_linear = [&](const std::string& name, const Linear& l) {
    params.push_back({name + ".weight", l.weight});
    params.push_back({name + ".bias", l.bias});
  };
  auto add_bn = [&](const std::string& name, const BatchNorm& bn) {
    params.push_back({name + ".gamma", bn.gamma});
    params.push_back({name + ".beta", bn.beta});
  };
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    add_linear("backbone." + std::to_string(i) + ".fc", backbone_[i].fc);
    add_bn("backbone." + std::to_string(i) + ".bn", backbone_[i].bn);
  }
  add_bn("shared.bn", shared_bn_);
  add_linear("shared.fc", shared_fc_);
  add_linear("instance_head", instance_head_);
  for (std::size_t k = 0; k < group_heads_.size(); ++k) add_linear("group_head." + std::to_string(k), group_heads_[k]);
  add_bn("gdn.bn1", gdn_bn1_);
  add_linear("gdn.fc1", gdn_fc1_);
  add_bn("gdn.bn2", gdn_bn2_);
  add_linear("gdn.fc2", gdn_fc2_);
  add_linear("gdn.out", gdn_out_);
  params.push_back({"classifier", classifier_});
  return params;
}

std::vector<Tensor> GroupFaceModel::parameters() const {
  std::vector<Tensor> params;
  for (auto& p : named_parameters()) params.push_back(p.tensor);
  return params;
}

std::vector<BatchNorm*> GroupFaceModel::batch_norms() {
  std::vector<BatchNorm*> layers;
  for (auto& block : backbone_) layers.push_back(&block.bn);
  layers.insert(layers.end(), {&shared_bn_, &gdn_bn1_, &gdn_bn2_});
  return layers;
}

std::vector<const BatchNorm*> GroupFaceModel::batch_norms() const {
  std::vector<const BatchNorm*> layers;
  for (const auto& block : backbone_) layers.push_back(&block.bn);
  layers.insert(layers.end(), {&shared_bn_, &gdn_bn1_, &gdn_bn2_});
  return layers;
}

void GroupFaceModel::zero_group_heads() {
  for (auto& head : group_heads_) {
    for (auto& v : head.weight.data()) v = 0.0;
    for (auto& v : head.bias.data()) v = 0.0;
  }
}

GroupFaceModel GroupFaceModel::instance_only() const {
  if (config_.fusion_mode == FusionMode::concatenate) {
    throw std::invalid_argument("instance_only: concatenated fusion has no instance-only equivalent");
  }
  GroupFaceModel copy = clone();
  copy.config_.group_branch = false;
  return copy;
}

std::size_t GroupFaceModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : named_parameters()) {
    if (!config_.group_branch && p.name.starts_with("group_head.")) continue;
    total += p.tensor.size();
  }
  return total;
}

std::size_t GroupFaceModel::flops_per_sample() const {
  std::size_t flops = 0;
  auto fc = [&](const Linear& l) { flops += 2 * l.weight.size(); };
  for (const auto& block : backbone_) fc(block.fc);
  fc(shared_fc_);
  fc(instance_head_);
  if (config_.group_branch) {
    for (const auto& head : group_heads_) fc(head);
  }
  fc(gdn_fc1_);
  fc(gdn_fc2_);
  fc(gdn_out_);
  flops += 2 * classifier_.size();
  return flops;
}

}  // namespace groupface
