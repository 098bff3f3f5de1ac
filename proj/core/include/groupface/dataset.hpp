#pragma once

#include <cstdint>
#include <string>

#include "groupface/config.hpp"
#include "groupface/grouping.hpp"
#include "groupface/tensor.hpp"

namespace groupface {

/// Planted-structure generator settings. Identities are drawn around latent
/// group centers on the unit hypersphere; samples scatter around identities.
struct SyntheticDataConfig {
  std::size_t num_identities = 250;  // train + eval
  std::size_t eval_identities = 50;
  std::size_t samples_per_identity = 20;
  std::size_t input_dim = 32;
  std::size_t num_latent_groups = 8;
  double identity_noise = 0.1;  // sigma_id
  double group_spread = 0.15;   // sigma_grp
  std::uint64_t seed = 1;

  void validate() const;
  static SyntheticDataConfig from_config(KeyValueConfig& kv);
};

struct Split {
  Tensor features;    // [N x D]
  Labels identities;  // global identity ids
  Labels groups;      // planted latent group per sample

  std::size_t size() const { return identities.size(); }
};

struct Dataset {
  Split train;
  Split eval;
};

/// Deterministic given cfg.seed. Train and eval identities are disjoint.
Dataset generate_synthetic_dataset(const SyntheticDataConfig& cfg);

/// Throws if any identity appears in both splits.
void check_disjoint_identities(const Dataset& data);

enum class ValueType : std::uint32_t { f32 = 1, f64 = 2 };

/// Row-major matrix file: 8-byte magic, u32 version, u32 value type, u64
/// record count, u32 dimension, then the values (all little-endian).
void write_matrix_file(const std::string& path, const Tensor& rows, ValueType type);
Tensor read_matrix_file(const std::string& path);

/// Raw little-endian u32 array.
void write_label_file(const std::string& path, const Labels& labels);
Labels read_label_file(const std::string& path);

/// Writes <split>.features.bin, <split>.identity.u32, <split>.group.u32 and a
/// dataset.json sidecar listing each file's role.
void write_dataset(const std::string& dir, const Dataset& data);
Dataset read_dataset(const std::string& dir);

/// Rounds features through float32 as storing and reloading would.
Dataset round_trip_precision(Dataset data);

}  // namespace groupface
