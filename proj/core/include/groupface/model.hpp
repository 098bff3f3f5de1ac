#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groupface/graph.hpp"
#include "groupface/ops.hpp"
#include "groupface/tensor.hpp"

namespace groupface {

enum class EnsembleMode { soft, hard };
enum class FusionMode { aggregate, concatenate };

std::string to_string(EnsembleMode mode);
std::string to_string(FusionMode mode);
EnsembleMode parse_ensemble_mode(const std::string& text);
FusionMode parse_fusion_mode(const std::string& text);

struct ModelConfig {
  std::size_t input_dim = 32;
  std::size_t shared_dim = 64;
  std::size_t embed_dim = 32;
  std::size_t num_groups = 8;
  std::size_t num_identities = 200;
  std::size_t gdn_hidden_dim = 32;
  EnsembleMode ensemble_mode = EnsembleMode::soft;
  FusionMode fusion_mode = FusionMode::aggregate;
  /// Widths of the FC-BN-ReLU blocks ahead of the shared-feature block.
  std::vector<std::size_t> backbone_layers{64};
  /// false gives the instance-only model: the final representation is v_x and
  /// the GDN does not feed the identity classifier.
  bool group_branch = true;
  /// false detaches the GDN input so no GDN gradient reaches the trunk.
  bool gdn_input_gradient = true;

  void validate() const;
  /// Width of the classifier input: embed_dim, or 2*embed_dim when concatenating.
  std::size_t final_dim() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  BatchNormState state;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ForwardOutputs {
  Tensor shared_feature;           // [N x shared_dim]
  Tensor instance;                 // v_x [N x E]
  std::vector<Tensor> group_reps;  // K x [N x E]; empty for the instance-only model
  Tensor gdn_logits;               // f(x) [N x K]
  Tensor group_probs;              // p(G_k|x) [N x K]
  Tensor gdn_intermediate;         // v-hat [N x gdn_hidden_dim]
  Tensor group_rep;                // v_G [N x E]; undefined for the instance-only model
  Tensor final_rep;                // v-bar [N x final_dim]
  Tensor logits;                   // cos theta [N x M]
};

/// v_G = sum_k p(G_k|x) v^{G_k}_x per row.
Tensor soft_ensemble(Graph& g, const Tensor& group_probs, const std::vector<Tensor>& group_reps);

/// v_G = v^{G_k*}_x with k* the row argmax (lowest index on ties). No
/// gradient reaches the probabilities.
Tensor hard_ensemble(Graph& g, const Tensor& group_probs, const std::vector<Tensor>& group_reps);

Tensor fuse(Graph& g, const Tensor& instance, const Tensor& group_rep, FusionMode mode);

/// Cosine between every row of v and every classifier row.
Tensor identity_logits(Graph& g, const Tensor& v, const Tensor& classifier);

class GroupFaceModel {
 public:
  GroupFaceModel(ModelConfig config, std::uint64_t seed);

  GroupFaceModel(const GroupFaceModel&) = delete;
  GroupFaceModel& operator=(const GroupFaceModel&) = delete;
  GroupFaceModel(GroupFaceModel&&) = default;
  GroupFaceModel& operator=(GroupFaceModel&&) = default;

  /// Independent deep copy (parameters and running statistics).
  GroupFaceModel clone() const;

  const ModelConfig& config() const { return config_; }

  ForwardOutputs forward(Graph& g, const Tensor& x, Mode mode);

  /// All learnable tensors in declaration order.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  /// Batch-norm layers in declaration order.
  std::vector<BatchNorm*> batch_norms();
  std::vector<const BatchNorm*> batch_norms() const;

  /// Sets every group-head weight and bias to zero.
  void zero_group_heads();
  /// Copy of this model with the group branch disabled.
  GroupFaceModel instance_only() const;

  std::size_t parameter_count() const;
  /// Multiply-adds x2 of every FC layer for one sample.
  std::size_t flops_per_sample() const;

  const std::vector<Linear>& group_heads() const { return group_heads_; }
  const Tensor& classifier() const { return classifier_; }

 private:
  struct Block {
    Linear fc;
    BatchNorm bn;
  };

  explicit GroupFaceModel(ModelConfig config);

  ModelConfig config_;
  std::vector<Block> backbone_;
  BatchNorm shared_bn_;
  Linear shared_fc_;
  Linear instance_head_;
  std::vector<Linear> group_heads_;
  BatchNorm gdn_bn1_;
  Linear gdn_fc1_;
  BatchNorm gdn_bn2_;
  Linear gdn_fc2_;
  Linear gdn_out_;
  Tensor classifier_;  // [M x final_dim], used row-normalized
};

}  // namespace groupface
