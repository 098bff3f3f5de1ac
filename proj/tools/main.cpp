#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "groupface/ablation.hpp"
#include "groupface/checkpoint.hpp"
#include "groupface/dataset.hpp"
#include "groupface/evaluation.hpp"
#include "groupface/training.hpp"

namespace {

using namespace groupface;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

void write_json(const std::string& path, const nlohmann::json& doc) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

// Evaluation keys shared by train (final report) and ablate.
void read_eval_keys(KeyValueConfig& kv, SimilarityConfig& sim, EvalOptions& eval) {
  sim.beta = kv.get_double("beta", sim.beta);
  sim.gamma = kv.get_double("gamma", sim.gamma);
  eval.far_levels = kv.get_doubles("far_levels", eval.far_levels);
  eval.max_pairs = kv.get_size("max_pairs", eval.max_pairs);
}

int run_gen_data(const GlobalOptions& global, const std::string& config_path, const std::string& out_dir) {
  auto kv = KeyValueConfig::load(config_path);
  auto cfg = SyntheticDataConfig::from_config(kv);
  kv.finish();
  if (global.seed) cfg.seed = *global.seed;
  const Dataset data = generate_synthetic_dataset(cfg);
  write_dataset(out_dir, data);
  std::cout << "wrote " << data.train.size() << " train and " << data.eval.size() << " eval samples to " << out_dir
            << '\n';
  return 0;
}

int run_train(const GlobalOptions& global, const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  const Dataset data = read_dataset(data_dir);
  check_disjoint_identities(data);

  auto kv = KeyValueConfig::load(config_path);
  ModelConfig defaults;
  defaults.input_dim = data.train.features.cols();
  class_indices(data.train.identities, defaults.num_identities);
  const ModelConfig model_cfg = model_config_from(kv, defaults);
  const LossConfig loss = loss_config_from(kv);
  TrainConfig tcfg = TrainConfig::from_config(kv);
  SimilarityConfig sim;
  EvalOptions eval;
  read_eval_keys(kv, sim, eval);
  kv.finish();
  if (global.seed) tcfg.seed = *global.seed;
  eval.threads = global.threads;

  GroupFaceModel model(model_cfg, tcfg.seed);
  const TrainingResult result = train(model, data.train, loss, tcfg);

  std::filesystem::create_directories(out_dir);
  save_checkpoint(out_dir + "/checkpoint.bin", model, &result.group_state);
  write_loss_curve_csv(out_dir + "/loss_curve.csv", result.loss_curve);
  write_label_trace_csv(out_dir + "/label_trace.csv", result.label_trace);
  const EvalReport report = evaluate(model, data.eval, sim, false, eval);
  write_json(out_dir + "/report.json", to_json(report));
  std::cout << "trained " << result.loss_curve.size() << " steps; final loss " << result.loss_curve.back().loss
            << "; eval pair accuracy " << report.pair_accuracy << '\n';
  return 0;
}

int run_eval(const GlobalOptions& global, const std::string& checkpoint_path, const std::string& data_dir,
             bool group_similarity, const SimilarityConfig& sim, std::size_t max_pairs, const std::string& out_path,
             const std::string& roc_path) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset data = read_dataset(data_dir);
  check_disjoint_identities(data);
  EvalOptions options;
  options.threads = global.threads;
  options.max_pairs = max_pairs;
  if (global.seed) options.seed = *global.seed;
  const auto emb = embed(ckpt.model, data.eval.features, options.chunk_rows);
  const auto details = evaluate_embeddings(emb, data.eval.identities, sim, group_similarity, options);
  write_json(out_path, to_json(details.report));
  if (!roc_path.empty()) write_roc_csv(roc_path, roc_curve(details.genuine, details.impostor));
  std::cout << "pair accuracy " << details.report.pair_accuracy << ", rank-1 " << details.report.rank1 << '\n';
  return 0;
}

int run_ablate(const GlobalOptions& global, const std::string& suite_path, const std::string& out_path) {
  auto kv = KeyValueConfig::load(suite_path);
  AblationSuite suite = AblationSuite::from_config(kv);
  kv.finish();
  if (global.seed) suite.seeds = {*global.seed};
  suite.eval.threads = global.threads;
  const auto rows = run_ablation(suite);
  write_ablation_csv(out_path, rows);
  for (const auto& row : rows) {
    if (row.seed == "mean") {
      std::cout << row.config << ": pair accuracy " << row.pair_accuracy << ", label KL " << row.final_label_kl
                << '\n';
    }
  }
  return 0;
}

int run_export(const std::string& checkpoint_path, const std::string& data_dir, const std::string& split,
               const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset data = read_dataset(data_dir);
  export_embeddings(ckpt.model, split == "train" ? data.train : data.eval, out_dir);
  std::cout << "exported " << split << " embeddings to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GroupFace desk-scale trainer and evaluator"};
  app.require_subcommand(1);
  GlobalOptions global;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the seed from the config")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", global.threads, "Threads for pair scoring")->check(CLI::PositiveNumber);

  std::string config, data, out, checkpoint, suite, roc, split = "eval";
  bool group_similarity = false;
  SimilarityConfig sim;
  std::size_t max_pairs = EvalOptions{}.max_pairs;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic identity dataset");
  gen->add_option("--config", config, "key=value data config")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model and write checkpoint, curves and report");
  tr->add_option("--config", config, "key=value model/loss/train config")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", out, "Run directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the eval split");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_flag("--group-similarity", group_similarity, "Score pairs with the group-aware similarity");
  ev->add_option("--beta", sim.beta, "Group-aware similarity weight")->check(CLI::NonNegativeNumber);
  ev->add_option("--gamma", sim.gamma, "Group-aware similarity exponent")->check(CLI::PositiveNumber);
  ev->add_option("--max-pairs", max_pairs, "Subsample pairs above this count")->check(CLI::PositiveNumber);
  ev->add_option("--roc", roc, "Also write ROC points (threshold,far,tar) as CSV");
  ev->add_option("--out", out, "report.json path")->required();

  auto* ab = app.add_subcommand("ablate", "Run the ablation suite over paired seeds");
  ab->add_option("--suite", suite, "key=value suite config")->required()->check(CLI::ExistingFile);
  ab->add_option("--out", out, "CSV table path")->required();

  auto* ex = app.add_subcommand("export", "Export per-sample representations");
  ex->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ex->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ex->add_option("--split", split, "Which split to export")->check(CLI::IsMember({"train", "eval"}));
  ex->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) global.seed = seed;

  try {
    if (*gen) return run_gen_data(global, config, out);
    if (*tr) return run_train(global, config, data, out);
    if (*ev) return run_eval(global, checkpoint, data, group_similarity, sim, max_pairs, out, roc);
    if (*ab) return run_ablate(global, suite, out);
    if (*ex) return run_export(checkpoint, data, split, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
