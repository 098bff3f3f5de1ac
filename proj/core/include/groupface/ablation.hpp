#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groupface/dataset.hpp"
#include "groupface/evaluation.hpp"
#include "groupface/model.hpp"
#include "groupface/objectives.hpp"
#include "groupface/training.hpp"

namespace groupface {

struct Experiment {
  std::string name;
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
};

struct ExperimentResult {
  TrainingResult training;
  EvalReport report;        // cosine similarity
  EvalReport group_report;  // group-aware similarity
  std::size_t parameters = 0;
  std::size_t flops = 0;
};

/// Model config with input_dim and num_identities taken from the training split.
ModelConfig fit_model_config(ModelConfig cfg, const Dataset& data);

/// Fresh model (seeded with `seed`), trained and evaluated on the eval split.
ExperimentResult run_experiment(const Dataset& data, const Experiment& experiment, std::uint64_t seed,
                                const SimilarityConfig& sim, const EvalOptions& eval);

/// Named variants of a base configuration:
///   baseline        instance-only model, lambda = 0
///   s-groupface     soft ensemble
///   h-groupface     hard ensemble
///   naive-labeling  soft ensemble, argmax labels instead of self-distributed
///   no-l2           soft ensemble, lambda = 0
///   concat-fusion   soft ensemble, concatenated fusion
///   k<N>            soft ensemble with N groups (e.g. k4, k16, k32)
Experiment preset(const std::string& name, const Experiment& base);
std::vector<std::string> default_ablation_configs();

struct AblationSuite {
  SyntheticDataConfig data;
  Experiment base;
  SimilarityConfig similarity;
  EvalOptions eval;
  std::vector<std::string> configs = default_ablation_configs();
  std::vector<std::uint64_t> seeds{1, 2, 3};

  static AblationSuite from_config(KeyValueConfig& kv);
};

struct AblationRow {
  std::string config;
  std::string seed;  // decimal seed, or "mean"
  double pair_accuracy = 0.0;
  double pair_accuracy_group_similarity = 0.0;
  double rank1 = 0.0;
  double strictest_tar = 0.0;
  double strictest_tar_group_similarity = 0.0;
  double final_label_kl = 0.0;
  double final_loss = 0.0;
  double parameters = 0.0;
  double flops = 0.0;
};

/// Label KL over the last `window` phase-2 steps (phase 1 when there is no phase 2).
double final_label_kl(const TrainingResult& result, std::size_t window);

AblationRow summarize(const std::string& config, std::uint64_t seed, const ExperimentResult& result,
                      std::size_t kl_window);

/// One row per (config, seed) in suite order, then one mean row per config.
/// Every config sees the same dataset and seeds for a given seed.
std::vector<AblationRow> run_ablation(const AblationSuite& suite);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace groupface
