#pragma once

#include <optional>
#include <string>

#include "groupface/config.hpp"
#include "groupface/grouping.hpp"
#include "groupface/model.hpp"

namespace groupface {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  GroupFaceModel model;
  std::optional<GroupState> group_state;
};

/// Layout (little-endian): 8-byte magic "GFCKPT01", u32 version, u32 reserved;
/// ModelConfig as key=value text; parameters in declaration order as
/// (name, rank, extents, f64 values); batch-norm running statistics; then the
/// GroupState if present.
void save_checkpoint(const std::string& path, const GroupFaceModel& model, const GroupState* state);
Checkpoint load_checkpoint(const std::string& path);

/// key=value round trip of ModelConfig.
std::string model_config_text(const ModelConfig& cfg);
/// Reads model keys; input_dim and num_identities are optional when the
/// caller supplies them from data.
ModelConfig model_config_from(KeyValueConfig& kv, const ModelConfig& defaults = {});

}  // namespace groupface
