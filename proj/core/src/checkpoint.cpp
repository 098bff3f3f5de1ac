#include "groupface/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace groupface {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'C', 'K', 'P', 'T', '0', '1'};

void write_tensor(std::ostream& out, const Tensor& t) {
  detail::write_le(out, static_cast<std::uint32_t>(t.rank()));
  for (auto extent : t.shape()) detail::write_le(out, static_cast<std::uint64_t>(extent));
  for (double v : t.data()) detail::write_f64(out, v);
}

void read_tensor_into(std::istream& in, Tensor& target, const std::string& what) {
  const auto rank = detail::read_le<std::uint32_t>(in, what);
  Shape shape(rank);
  for (auto& extent : shape) extent = static_cast<std::size_t>(detail::read_le<std::uint64_t>(in, what));
  if (shape != target.shape()) {
    throw std::runtime_error("checkpoint tensor " + what + " has shape " + to_string(shape) + ", model expects " +
                             to_string(target.shape()));
  }
  for (auto& v : target.data()) v = detail::read_f64(in, what);
}

std::string join(const std::vector<std::size_t>& values) {
  std::string text;
  for (std::size_t i = 0; i < values.size(); ++i) text += (i ? "," : "") + std::to_string(values[i]);
  return text;
}

}  // namespace

std::string model_config_text(const ModelConfig& cfg) {
  KeyValueConfig kv;
  kv.set("input_dim", std::to_string(cfg.input_dim));
  kv.set("shared_dim", std::to_string(cfg.shared_dim));
  kv.set("embed_dim", std::to_string(cfg.embed_dim));
  kv.set("num_groups", std::to_string(cfg.num_groups));
  kv.set("num_identities", std::to_string(cfg.num_identities));
  kv.set("gdn_hidden_dim", std::to_string(cfg.gdn_hidden_dim));
  kv.set("ensemble_mode", to_string(cfg.ensemble_mode));
  kv.set("fusion_mode", to_string(cfg.fusion_mode));
  kv.set("backbone_layers", join(cfg.backbone_layers));
  kv.set("group_branch", cfg.group_branch ? "true" : "false");
  kv.set("gdn_input_gradient", cfg.gdn_input_gradient ? "true" : "false");
  return kv.to_text();
}

ModelConfig model_config_from(KeyValueConfig& kv, const ModelConfig& defaults) {
  ModelConfig cfg = defaults;
  cfg.input_dim = kv.get_size("input_dim", cfg.input_dim);
  cfg.shared_dim = kv.get_size("shared_dim", cfg.shared_dim);
  cfg.embed_dim = kv.get_size("embed_dim", cfg.embed_dim);
  cfg.num_groups = kv.get_size("num_groups", cfg.num_groups);
  cfg.num_identities = kv.get_size("num_identities", cfg.num_identities);
  cfg.gdn_hidden_dim = kv.get_size("gdn_hidden_dim", cfg.gdn_hidden_dim);
  cfg.ensemble_mode = parse_ensemble_mode(kv.get_string("ensemble_mode", to_string(cfg.ensemble_mode)));
  cfg.fusion_mode = parse_fusion_mode(kv.get_string("fusion_mode", to_string(cfg.fusion_mode)));
  if (kv.has("backbone_layers") && kv.values().at("backbone_layers").empty()) {
    kv.accept("backbone_layers");
    cfg.backbone_layers.clear();
  } else {
    cfg.backbone_layers = kv.get_sizes("backbone_layers", cfg.backbone_layers);
  }
  cfg.group_branch = kv.get_bool("group_branch", cfg.group_branch);
  cfg.gdn_input_gradient = kv.get_bool("gdn_input_gradient", cfg.gdn_input_gradient);
  return cfg;
}

void save_checkpoint(const std::string& path, const GroupFaceModel& model, const GroupState* state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  detail::write_le(out, kCheckpointVersion);
  detail::write_le(out, std::uint32_t{0});
  detail::write_string(out, model_config_text(model.config()));

  const auto params = model.named_parameters();
  detail::write_le(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::write_string(out, p.name);
    write_tensor(out, p.tensor);
  }

  const auto norms = model.batch_norms();
  detail::write_le(out, static_cast<std::uint32_t>(norms.size()));
  for (const auto* bn : norms) {
    detail::write_f64(out, bn->state.momentum);
    detail::write_f64(out, bn->state.eps);
    write_tensor(out, bn->state.running_mean);
    write_tensor(out, bn->state.running_var);
  }

  detail::write_le(out, static_cast<std::uint32_t>(state ? 1 : 0));
  if (state) {
    detail::write_le(out, static_cast<std::uint64_t>(state->num_groups()));
    detail::write_le(out, static_cast<std::uint64_t>(state->window()));
    detail::write_le(out, static_cast<std::uint64_t>(state->batches_seen()));
    detail::write_le(out, static_cast<std::uint64_t>(state->means().size()));
    for (const auto& mean : state->means())
      for (double v : mean) detail::write_f64(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error(path + ": not a checkpoint file");
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  detail::read_le<std::uint32_t>(in, "header");

  auto kv = KeyValueConfig::parse(detail::read_string(in, "model config"), path + " (model config)");
  const ModelConfig cfg = model_config_from(kv);
  kv.finish();
  Checkpoint ckpt{GroupFaceModel(cfg, 0), std::nullopt};

  auto params = ckpt.model.named_parameters();
  const auto count = detail::read_le<std::uint32_t>(in, "parameter count");
  if (count != params.size()) {
    throw std::runtime_error(path + ": " + std::to_string(count) + " parameters, model expects " +
                             std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = detail::read_string(in, "parameter name");
    if (name != p.name) throw std::runtime_error(path + ": expected parameter " + p.name + ", found " + name);
    read_tensor_into(in, p.tensor, name);
  }

  auto norms = ckpt.model.batch_norms();
  const auto bn_count = detail::read_le<std::uint32_t>(in, "batch-norm count");
  if (bn_count != norms.size()) throw std::runtime_error(path + ": batch-norm layer count mismatch");
  for (auto* bn : norms) {
    bn->state.momentum = detail::read_f64(in, "bn momentum");
    bn->state.eps = detail::read_f64(in, "bn eps");
    read_tensor_into(in, bn->state.running_mean, "bn running mean");
    read_tensor_into(in, bn->state.running_var, "bn running var");
  }

  if (detail::read_le<std::uint32_t>(in, "group state flag") == 1) {
    const auto k = detail::read_le<std::uint64_t>(in, "group state");
    const auto window = detail::read_le<std::uint64_t>(in, "group state");
    const auto seen = detail::read_le<std::uint64_t>(in, "group state");
    const auto stored = detail::read_le<std::uint64_t>(in, "group state");
    std::vector<std::vector<double>> means(stored, std::vector<double>(k));
    for (auto& mean : means)
      for (auto& v : mean) v = detail::read_f64(in, "group state mean");
    ckpt.group_state = GroupState::restore(k, window, seen, std::move(means));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error(path + ": trailing bytes in checkpoint");
  return ckpt;
}

}  // namespace groupface
