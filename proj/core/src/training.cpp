#include "groupface/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>

#include "groupface/metrics.hpp"

namespace groupface {

std::string to_string(LabelingMode mode) {
  return mode == LabelingMode::self_distributed ? "self_distributed" : "naive";
}

LabelingMode parse_labeling_mode(const std::string& text) {
  if (text == "self_distributed") return LabelingMode::self_distributed;
  if (text == "naive") return LabelingMode::naive;
  throw std::invalid_argument("unknown labeling mode '" + text + "' (expected self_distributed or naive)");
}

double TrainConfig::learning_rate(std::size_t step) const {
  if (!lr_schedule.empty()) {
    double rate = lr_schedule.front().second;
    for (const auto& [start, r] : lr_schedule) {
      if (step >= start) rate = r;
    }
    return rate;
  }
  const std::size_t total = std::max<std::size_t>(total_steps(), 1);
  const std::size_t stage = step < total * 50 / 80 ? 0 : step < total * 70 / 80 ? 1 : 2;
  return stage_rates[std::min(stage, stage_rates.size() - 1)];
}

void TrainConfig::validate() const {
  if (total_steps() == 0) throw std::invalid_argument("training needs at least one step");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2 (batch norm)");
  if (stage_rates.empty() && lr_schedule.empty()) throw std::invalid_argument("no learning rate given");
  for (double r : stage_rates) {
    if (!(r > 0.0)) throw std::invalid_argument("learning rates must be positive");
  }
  for (const auto& [start, r] : lr_schedule) {
    if (!(r > 0.0)) throw std::invalid_argument("learning rates must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (window == 0) throw std::invalid_argument("expectation window must be positive");
  if (workers == 0 || batch_size % workers != 0 || batch_size / workers < 1) {
    throw std::invalid_argument("batch_size must split evenly across workers");
  }
}

TrainConfig TrainConfig::from_config(KeyValueConfig& kv) {
  TrainConfig cfg;
  cfg.phase1_steps = kv.get_size("phase1_steps", cfg.phase1_steps);
  cfg.phase2_steps = kv.get_size("phase2_steps", cfg.phase2_steps);
  cfg.batch_size = kv.get_size("batch_size", cfg.batch_size);
  cfg.stage_rates = kv.get_doubles("learning_rates", cfg.stage_rates);
  for (const auto& item : kv.get_strings("lr_schedule", {})) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("lr_schedule entries must be step:rate, got " + item);
    cfg.lr_schedule.emplace_back(std::stoull(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
  }
  std::sort(cfg.lr_schedule.begin(), cfg.lr_schedule.end());
  cfg.momentum = kv.get_double("momentum", cfg.momentum);
  cfg.weight_decay = kv.get_double("weight_decay", cfg.weight_decay);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.window = kv.get_size("window", cfg.window);
  cfg.labeling = parse_labeling_mode(kv.get_string("labeling", to_string(cfg.labeling)));
  cfg.workers = kv.get_size("workers", cfg.workers);
  return cfg;
}

LossConfig loss_config_from(KeyValueConfig& kv) {
  LossConfig cfg;
  cfg.margin_mode = parse_margin_mode(kv.get_string("margin_mode", to_string(cfg.margin_mode)));
  cfg.scale = kv.get_double("scale", cfg.scale);
  cfg.margin = kv.get_double("margin", LossConfig::default_margin(cfg.margin_mode));
  cfg.lambda = kv.get_double("lambda", cfg.lambda);
  return cfg;
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.emplace_back(p.size(), 0.0);
}

void SgdMomentum::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void SgdMomentum::step(double learning_rate) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].data();
    auto grad = std::as_const(params_[i]).grad();
    auto& vel = velocity_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      vel[j] = momentum_ * vel[j] + grad[j] + weight_decay_ * values[j];
      values[j] -= learning_rate * vel[j];
    }
  }
}

Labels class_indices(const Labels& identities, std::size_t& num_classes) {
  Labels unique(identities);
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  num_classes = unique.size();
  Labels classes(identities.size());
  for (std::size_t i = 0; i < identities.size(); ++i) {
    classes[i] = static_cast<std::uint32_t>(std::lower_bound(unique.begin(), unique.end(), identities[i]) - unique.begin());
  }
  return classes;
}

namespace {

/// Epoch-wise shuffled batches; the trailing partial batch of an epoch is dropped.
class BatchSampler {
 public:
  BatchSampler(std::size_t count, std::size_t batch, std::uint64_t seed) : order_(count), batch_(batch), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > order_.size()) reshuffle();
    std::vector<std::size_t> picked(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                    order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return picked;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

Tensor gather_rows(const Tensor& source, const std::vector<std::size_t>& rows) {
  const std::size_t d = source.cols();
  std::vector<double> values;
  values.reserve(rows.size() * d);
  auto src = source.data();
  for (auto r : rows) values.insert(values.end(), src.begin() + static_cast<std::ptrdiff_t>(r * d),
                                    src.begin() + static_cast<std::ptrdiff_t>((r + 1) * d));
  return Tensor({rows.size(), d}, std::move(values));
}

}  // namespace

TrainingResult train(GroupFaceModel& model, const Split& data, const LossConfig& loss, const TrainConfig& cfg,
                     const StepObserver& observer) {
  cfg.validate();
  loss.validate();
  const ModelConfig& mc = model.config();
  if (data.features.cols() != mc.input_dim) {
    throw std::invalid_argument("train: data has " + std::to_string(data.features.cols()) +
                                " features, model expects " + std::to_string(mc.input_dim));
  }
  std::size_t num_classes = 0;
  const Labels classes = class_indices(data.identities, num_classes);
  if (num_classes != mc.num_identities) {
    throw std::invalid_argument("train: data has " + std::to_string(num_classes) + " identities, model expects " +
                                std::to_string(mc.num_identities));
  }
  if (data.size() < cfg.batch_size) throw std::invalid_argument("train: fewer samples than one batch");

  const std::size_t k = mc.num_groups;
  TrainingResult result{{}, {}, GroupState(k, cfg.window)};
  std::vector<GroupState> worker_states(cfg.workers, GroupState(k, cfg.window));
  SgdMomentum optimizer(model.parameters(), cfg.momentum, cfg.weight_decay);
  BatchSampler sampler(data.size(), cfg.batch_size, cfg.seed);
  const std::size_t shard = cfg.batch_size / cfg.workers;

  for (std::size_t step = 0; step < cfg.total_steps(); ++step) {
    try {
      const int phase = step < cfg.phase1_steps ? 1 : 2;
      const auto rows = sampler.next();
      const Tensor x = gather_rows(data.features, rows);
      Labels y(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) y[i] = classes[rows[i]];

      Graph g;
      const ForwardOutputs out = model.forward(g, x, Mode::train);
      const Tensor l1 = margin_softmax_loss(g, out.logits, y, loss);

      if (cfg.workers == 1) {
        update_expectation(result.group_state, out.group_probs);
      } else {
        for (std::size_t w = 0; w < cfg.workers; ++w) {
          update_expectation(worker_states[w], out.group_probs.rows_slice(w * shard, (w + 1) * shard));
        }
        result.group_state = merge(worker_states);
      }
      const Labels group_labels = cfg.labeling == LabelingMode::self_distributed
                                      ? assign_labels_self_distributed(out.group_probs, result.group_state)
                                      : assign_labels_naive(out.group_probs);

      const Tensor l2 = self_grouping_loss(g, out.gdn_logits, group_labels);
      const bool joint = phase == 2 && loss.lambda > 0.0;
      const Tensor total = joint ? combined_loss(g, l1, l2, loss.lambda) : l1;
      if (!std::isfinite(total.item())) {
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
      }

      optimizer.zero_grad();
      g.backward(total);
      if (observer) observer(StepContext{step, phase, model, out, group_labels});
      const double lr = cfg.learning_rate(step);
      optimizer.step(lr);

      result.loss_curve.push_back({step, phase, lr, total.item(), l1.item(), l2.item()});
      auto stats = label_distribution_stats(group_labels, k);
      result.label_trace.push_back({step, phase, std::move(stats.histogram), stats.kl_to_uniform});
    } catch (const std::domain_error& e) {
      // Overflow surfaces inside an op before the loss check can see it.
      throw std::runtime_error("train: non-finite values at step " + std::to_string(step) + " (" + e.what() + ")");
    }
  }
  return result;
}

double aggregated_label_kl(const std::vector<LabelTraceRecord>& trace, int phase, bool from_end, std::size_t steps) {
  std::vector<const LabelTraceRecord*> selected;
  for (const auto& r : trace) {
    if (r.phase == phase) selected.push_back(&r);
  }
  if (selected.empty()) throw std::invalid_argument("aggregated_label_kl: no trace records for the phase");
  const std::size_t take = std::min(steps, selected.size());
  const std::size_t begin = from_end ? selected.size() - take : 0;
  std::vector<std::size_t> histogram(selected.front()->histogram.size(), 0);
  for (std::size_t i = begin; i < begin + take; ++i)
    for (std::size_t c = 0; c < histogram.size(); ++c) histogram[c] += selected[i]->histogram[c];
  return label_distribution_stats(std::span<const std::size_t>(histogram)).kl_to_uniform;
}

void write_loss_curve_csv(const std::string& path, const std::vector<StepRecord>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss curve to " + path);
  out << "step,phase,learning_rate,loss,identity_loss,grouping_loss\n" << std::setprecision(17);
  for (const auto& r : curve) {
    out << r.step << ',' << r.phase << ',' << r.learning_rate << ',' << r.loss << ',' << r.identity_loss << ','
        << r.grouping_loss << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_label_trace_csv(const std::string& path, const std::vector<LabelTraceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write label trace to " + path);
  out << "step,phase,kl_to_uniform";
  const std::size_t k = trace.empty() ? 0 : trace.front().histogram.size();
  for (std::size_t c = 0; c < k; ++c) out << ",group_" << c;
  out << '\n' << std::setprecision(17);
  for (const auto& r : trace) {
    out << r.step << ',' << r.phase << ',' << r.kl_to_uniform;
    for (auto count : r.histogram) out << ',' << count;
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace groupface
