#include "groupface/ablation.hpp"

#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "groupface/checkpoint.hpp"

namespace groupface {

ModelConfig fit_model_config(ModelConfig cfg, const Dataset& data) {
  cfg.input_dim = data.train.features.cols();
  class_indices(data.train.identities, cfg.num_identities);
  return cfg;
}

ExperimentResult run_experiment(const Dataset& data, const Experiment& experiment, std::uint64_t seed,
                                const SimilarityConfig& sim, const EvalOptions& eval) {
  check_disjoint_identities(data);
  TrainConfig tcfg = experiment.train;
  tcfg.seed = seed;
  GroupFaceModel model(fit_model_config(experiment.model, data), seed);
  ExperimentResult result{train(model, data.train, experiment.loss, tcfg), {}, {}, model.parameter_count(),
                          model.flops_per_sample()};
  const auto emb = embed(model, data.eval.features, eval.chunk_rows);
  result.report = evaluate_embeddings(emb, data.eval.identities, sim, false, eval).report;
  result.group_report = evaluate_embeddings(emb, data.eval.identities, sim, true, eval).report;
  return result;
}

std::vector<std::string> default_ablation_configs() {
  return {"baseline", "h-groupface", "s-groupface", "naive-labeling", "no-l2", "concat-fusion", "k4", "k16", "k32"};
}

Experiment preset(const std::string& name, const Experiment& base) {
  Experiment e = base;
  e.name = name;
  e.model.group_branch = true;
  e.model.ensemble_mode = EnsembleMode::soft;
  e.model.fusion_mode = FusionMode::aggregate;
  e.train.labeling = LabelingMode::self_distributed;
  if (name == "baseline") {
    e.model.group_branch = false;
    e.loss.lambda = 0.0;
  } else if (name == "s-groupface") {
  } else if (name == "h-groupface") {
    e.model.ensemble_mode = EnsembleMode::hard;
  } else if (name == "naive-labeling") {
    e.train.labeling = LabelingMode::naive;
  } else if (name == "no-l2") {
    e.loss.lambda = 0.0;
  } else if (name == "concat-fusion") {
    e.model.fusion_mode = FusionMode::concatenate;
  } else if (name.size() > 1 && name[0] == 'k' && name.find_first_not_of("0123456789", 1) == std::string::npos) {
    e.model.num_groups = std::stoul(name.substr(1));
  } else {
    throw std::invalid_argument("unknown ablation config '" + name + "'");
  }
  e.model.validate();
  return e;
}

AblationSuite AblationSuite::from_config(KeyValueConfig& kv) {
  AblationSuite suite;
  suite.configs = kv.get_strings("configs", suite.configs);
  suite.seeds.clear();
  for (auto s : kv.get_sizes("seeds", {1, 2, 3})) suite.seeds.push_back(s);
  suite.data = SyntheticDataConfig::from_config(kv);
  suite.base.model = model_config_from(kv);
  suite.base.loss = loss_config_from(kv);
  suite.base.train = TrainConfig::from_config(kv);
  suite.similarity.beta = kv.get_double("beta", suite.similarity.beta);
  suite.similarity.gamma = kv.get_double("gamma", suite.similarity.gamma);
  suite.eval.far_levels = kv.get_doubles("far_levels", suite.eval.far_levels);
  suite.eval.max_pairs = kv.get_size("max_pairs", suite.eval.max_pairs);
  if (suite.configs.empty() || suite.seeds.empty()) throw std::invalid_argument("ablation suite needs configs and seeds");
  for (const auto& name : suite.configs) preset(name, suite.base);
  return suite;
}

double final_label_kl(const TrainingResult& result, std::size_t window) {
  const bool has_phase2 = !result.label_trace.empty() && result.label_trace.back().phase == 2;
  return aggregated_label_kl(result.label_trace, has_phase2 ? 2 : 1, true, window);
}

AblationRow summarize(const std::string& config, std::uint64_t seed, const ExperimentResult& result,
                      std::size_t kl_window) {
  AblationRow row;
  row.config = config;
  row.seed = std::to_string(seed);
  row.pair_accuracy = result.report.pair_accuracy;
  row.pair_accuracy_group_similarity = result.group_report.pair_accuracy;
  row.rank1 = result.report.rank1;
  row.strictest_tar = result.report.tar_at_far.empty() ? 0.0 : result.report.tar_at_far.begin()->second;
  row.strictest_tar_group_similarity =
      result.group_report.tar_at_far.empty() ? 0.0 : result.group_report.tar_at_far.begin()->second;
  row.final_label_kl = final_label_kl(result.training, kl_window);
  row.final_loss = result.training.loss_curve.back().loss;
  row.parameters = static_cast<double>(result.parameters);
  row.flops = static_cast<double>(result.flops);
  return row;
}

std::vector<AblationRow> run_ablation(const AblationSuite& suite) {
  std::vector<Experiment> experiments;
  for (const auto& name : suite.configs) experiments.push_back(preset(name, suite.base));

  std::vector<AblationRow> rows;
  std::vector<AblationRow> means(experiments.size());
  for (auto seed : suite.seeds) {
    SyntheticDataConfig dcfg = suite.data;
    dcfg.seed = seed;
    const Dataset data = generate_synthetic_dataset(dcfg);
    for (std::size_t e = 0; e < experiments.size(); ++e) {
      const auto result = run_experiment(data, experiments[e], seed, suite.similarity, suite.eval);
      rows.push_back(summarize(experiments[e].name, seed, result, experiments[e].train.window));
      const auto& r = rows.back();
      auto& m = means[e];
      m.pair_accuracy += r.pair_accuracy;
      m.pair_accuracy_group_similarity += r.pair_accuracy_group_similarity;
      m.rank1 += r.rank1;
      m.strictest_tar += r.strictest_tar;
      m.strictest_tar_group_similarity += r.strictest_tar_group_similarity;
      m.final_label_kl += r.final_label_kl;
      m.final_loss += r.final_loss;
      m.parameters += r.parameters;
      m.flops += r.flops;
    }
  }
  const double count = static_cast<double>(suite.seeds.size());
  for (std::size_t e = 0; e < experiments.size(); ++e) {
    auto m = means[e];
    m.config = experiments[e].name;
    m.seed = "mean";
    for (double* field : {&m.pair_accuracy, &m.pair_accuracy_group_similarity, &m.rank1, &m.strictest_tar,
                          &m.strictest_tar_group_similarity, &m.final_label_kl, &m.final_loss, &m.parameters,
                          &m.flops}) {
      *field /= count;
    }
    rows.push_back(m);
  }
  return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ablation table to " + path);
  out << "config,seed,pair_accuracy,pair_accuracy_group_similarity,rank1,strictest_tar,"
         "strictest_tar_group_similarity,final_label_kl,final_loss,parameters,flops_per_sample\n"
      << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.config << ',' << r.seed << ',' << r.pair_accuracy << ',' << r.pair_accuracy_group_similarity << ','
        << r.rank1 << ',' << r.strictest_tar << ',' << r.strictest_tar_group_similarity << ',' << r.final_label_kl
        << ',' << r.final_loss << ',' << r.parameters << ',' << r.flops << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace groupface
