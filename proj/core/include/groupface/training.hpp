#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "groupface/config.hpp"
#include "groupface/dataset.hpp"
#include "groupface/grouping.hpp"
#include "groupface/model.hpp"
#include "groupface/objectives.hpp"

namespace groupface {

enum class LabelingMode { self_distributed, naive };

std::string to_string(LabelingMode mode);
LabelingMode parse_labeling_mode(const std::string& text);

struct TrainConfig {
  std::size_t phase1_steps = 1000;  // identity loss only
  std::size_t phase2_steps = 2000;  // identity + self-grouping loss
  std::size_t batch_size = 64;
  /// Staged rates; stage boundaries sit at 50/80 and 70/80 of the total steps.
  std::vector<double> stage_rates{0.005, 0.0005, 0.00005};
  /// Explicit (start step, rate) pairs; overrides stage_rates when non-empty.
  std::vector<std::pair<std::size_t, double>> lr_schedule;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::uint64_t seed = 1;
  std::size_t window = kDefaultExpectationWindow;
  LabelingMode labeling = LabelingMode::self_distributed;
  /// Batch shards with private GroupStates merged every step.
  std::size_t workers = 1;

  std::size_t total_steps() const { return phase1_steps + phase2_steps; }
  double learning_rate(std::size_t step) const;
  void validate() const;
  static TrainConfig from_config(KeyValueConfig& kv);
};

LossConfig loss_config_from(KeyValueConfig& kv);

/// SGD with momentum and L2 weight decay: v = mu v + (g + wd p); p -= lr v.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double momentum, double weight_decay);
  void zero_grad();
  void step(double learning_rate);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
  double weight_decay_;
};

struct StepRecord {
  std::size_t step;
  int phase;
  double learning_rate;
  double loss;
  double identity_loss;
  double grouping_loss;
};

struct LabelTraceRecord {
  std::size_t step;
  int phase;
  std::vector<std::size_t> histogram;
  double kl_to_uniform;
};

struct TrainingResult {
  std::vector<StepRecord> loss_curve;
  std::vector<LabelTraceRecord> label_trace;
  GroupState group_state;
};

struct StepContext {
  std::size_t step;
  int phase;
  const GroupFaceModel& model;
  const ForwardOutputs& outputs;
  const Labels& group_labels;
};

/// Called after backward, before the parameter update.
using StepObserver = std::function<void(const StepContext&)>;

/// Sorted unique identities -> contiguous class indices.
Labels class_indices(const Labels& identities, std::size_t& num_classes);

TrainingResult train(GroupFaceModel& model, const Split& data, const LossConfig& loss, const TrainConfig& cfg,
                     const StepObserver& observer = {});

/// KL-to-uniform of the label histograms summed over `steps` trace records of
/// a phase, taken from its start or its end.
double aggregated_label_kl(const std::vector<LabelTraceRecord>& trace, int phase, bool from_end, std::size_t steps);

void write_loss_curve_csv(const std::string& path, const std::vector<StepRecord>& curve);
void write_label_trace_csv(const std::string& path, const std::vector<LabelTraceRecord>& trace);

}  // namespace groupface
