// Acceptance suite. One PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Heavy criteria train on the default synthetic benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "groupface/ablation.hpp"
#include "groupface/checkpoint.hpp"
#include "groupface/gradient_check.hpp"
#include "groupface/grouping.hpp"
#include "groupface/metrics.hpp"
#include "groupface/objectives.hpp"
#include "groupface/training.hpp"
#include "oracles.hpp"

using namespace groupface;

namespace {

int failures = 0;

void verdict(int id, bool pass, const std::string& title, const std::string& detail) {
  std::printf("criterion %d: %s  %s | %s\n", id, pass ? "PASS" : "FAIL", title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& text) {
  std::printf("    %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream out;
  out.precision(precision);
  out << v;
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------

void gradient_integrity() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where, floors;
  for (EnsembleMode ensemble : {EnsembleMode::soft, EnsembleMode::hard}) {
    ModelConfig cfg;
    cfg.input_dim = 8;
    cfg.shared_dim = 16;
    cfg.embed_dim = 8;
    cfg.num_groups = 4;
    cfg.num_identities = 10;
    cfg.gdn_hidden_dim = 8;
    cfg.backbone_layers = {16};
    cfg.ensemble_mode = ensemble;
    GroupFaceModel model(cfg, 17);
    // Distinct output biases keep all-clipped GDN rows off an argmax tie.
    for (auto& p : model.named_parameters())
      if (p.name == "gdn.out.bias")
        for (std::size_t k = 0; k < 4; ++k) p.tensor.data()[k] = 0.05 * static_cast<double>(k);

    oracle::Gen gen(23);
    const Tensor x({8, 8}, gen.normals(64));
    const Labels ids{0, 1, 2, 3, 4, 5, 6, 7};
    Labels groups;
    {
      Graph g;
      GroupState state(4, 1);
      const auto out = model.forward(g, x, Mode::train);
      update_expectation(state, out.group_probs);
      groups = assign_labels_self_distributed(out.group_probs, state);
    }
    const LossConfig loss;
    auto f = [&](Graph& g) {
      const auto out = model.forward(g, x, Mode::train);
      return combined_loss(g, margin_softmax_loss(g, out.logits, ids, loss),
                           self_grouping_loss(g, out.gdn_logits, groups), loss.lambda);
    };
    // Components smaller than the rounding noise over the tolerance (exact
    // zeros such as a bias ahead of batch norm) are held to an absolute bound.
    double value = 0.0;
    {
      Graph g;
      value = f(g).item();
    }
    const double floor = std::max(kGradientCheckFloor, finite_difference_noise(value, 1e-5) / 1e-4);
    const auto report = gradient_check_report(f, model.parameters(), 1e-5, floor);
    floors += fmt(floor, 3) + " ";
    if (report.max_relative_error >= worst) {
      worst = report.max_relative_error;
      where = std::string(ensemble == EnsembleMode::soft ? "soft" : "hard") + " " +
              model.named_parameters()[report.worst_param].name + "[" + std::to_string(report.worst_index) + "]";
    }
  }
  const double elapsed = seconds_since(start);
  verdict(1, worst < 1e-4 && elapsed < 60.0, "gradient integrity of the combined loss",
          "max rel error " + fmt(worst) + " at " + where + ", floor " + floors + "(soft, hard), " + fmt(elapsed, 3) +
              " s");
}

void batch_mean_identity() {
  oracle::Gen gen(101);
  double worst = 0.0;
  for (std::size_t k : {2u, 4u, 32u}) {
    for (int b = 0; b < 100; ++b) {
      const std::size_t n = gen.index(1, 64);
      std::vector<double> values;
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = gen.simplex(k);
        values.insert(values.end(), row.begin(), row.end());
      }
      const Tensor probs({n, k}, values);
      GroupState state(k, 1);
      update_expectation(state, probs);
      const Tensor tilde = expectation_normalized_probability(probs, current_expectation(state));
      for (std::size_t c = 0; c < k; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += tilde.at(i, c);
        mean /= static_cast<double>(n);
        worst = std::max(worst, std::abs(mean - 1.0 / static_cast<double>(k)));
      }
    }
  }
  verdict(2, worst <= 1e-12, "per-group mean of normalized probabilities is 1/K",
          "max deviation " + fmt(worst) + " over 300 batches, K in {2,4,32}");
}

void normalized_probability_bound() {
  oracle::Gen gen(202);
  std::size_t violations = 0;
  double lo = 1.0, hi_ratio = 0.0;
  for (int t = 0; t < 100000; ++t) {
    const std::size_t k = gen.index(2, 32);
    const Tensor p({1, k}, gen.simplex(k));
    const Tensor e({k}, gen.simplex(k));
    const Tensor tilde = expectation_normalized_probability(p, e);
    for (double v : tilde.data()) {
      const double upper = 2.0 / static_cast<double>(k);
      violations += v < 0.0 || v > upper;
      lo = std::min(lo, v);
      hi_ratio = std::max(hi_ratio, v / upper);
    }
  }
  verdict(3, violations == 0, "normalized probabilities stay in [0, 2/K]",
          std::to_string(violations) + " violations in 1e5 draws; min " + fmt(lo) + ", max/(2/K) " + fmt(hi_ratio));
}

void metric_oracles() {
  oracle::Gen gen(303);
  std::size_t mismatches = 0;
  const std::vector<double> fixed_levels{1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0};
  for (int t = 0; t < 100; ++t) {
    const bool coarse = t % 2 == 0;
    const std::size_t n_gen = gen.index(1, 80);
    const std::size_t n_imp = gen.index(1, 200 - n_gen);
    const auto genuine = gen.scores(n_gen, coarse);
    const auto impostor = gen.scores(n_imp, coarse);
    auto levels = fixed_levels;
    levels.push_back(gen.uniform(1e-3, 1.0));
    const auto table = tar_at_far(genuine, impostor, levels);
    for (double far : levels) mismatches += table.at(far) != oracle::tar_at_far(genuine, impostor, far);

    std::vector<ScoredPair> pairs;
    std::vector<std::pair<double, bool>> plain;
    for (double s : genuine) pairs.push_back({s, true}), plain.emplace_back(s, true);
    for (double s : impostor) pairs.push_back({s, false}), plain.emplace_back(s, false);
    mismatches += pair_verification_accuracy(pairs) != oracle::pair_accuracy(plain);
  }
  verdict(4, mismatches == 0, "TAR@FAR and pair accuracy match brute force",
          std::to_string(mismatches) + " mismatches over 100 instances of <= 200 scores");
}

// ---------------------------------------------------------------------------
// Default-benchmark runs shared by criteria 5, 6, 7 and 8.

struct Run {
  TrainingResult training;
  Embeddings embeddings;
  EvalDetails cosine;
  EvalDetails group;
  double seconds = 0.0;
};

struct Benchmark {
  std::map<std::uint64_t, Dataset> data;
  std::map<std::pair<std::string, std::uint64_t>, Run> runs;
  std::map<std::uint64_t, GroupFaceModel> s_models;
};

Experiment default_experiment() { return Experiment{}; }

Benchmark run_benchmark(const std::vector<std::uint64_t>& seeds) {
  Benchmark bench;
  const SimilarityConfig sim;
  const EvalOptions eval;
  for (auto seed : seeds) {
    SyntheticDataConfig dcfg;
    dcfg.seed = seed;
    const Dataset& data = bench.data.emplace(seed, generate_synthetic_dataset(dcfg)).first->second;
    check_disjoint_identities(data);
    for (const char* name : {"baseline", "s-groupface", "h-groupface", "naive-labeling"}) {
      const auto start = std::chrono::steady_clock::now();
      const Experiment e = preset(name, default_experiment());
      TrainConfig tcfg = e.train;
      tcfg.seed = seed;
      GroupFaceModel model(fit_model_config(e.model, data), seed);
      Run run{train(model, data.train, e.loss, tcfg), {}, {}, {}, 0.0};
      run.embeddings = embed(model, data.eval.features);
      run.cosine = evaluate_embeddings(run.embeddings, data.eval.identities, sim, false, eval);
      run.group = evaluate_embeddings(run.embeddings, data.eval.identities, sim, true, eval);
      run.seconds = seconds_since(start);
      note(std::string(name) + " seed " + std::to_string(seed) + ": pair acc " + fmt(run.cosine.report.pair_accuracy) +
           ", rank-1 " + fmt(run.cosine.report.rank1) + ", label KL " +
           fmt(final_label_kl(run.training, tcfg.window)) + ", " + fmt(run.seconds, 3) + " s");
      if (std::string(name) == "s-groupface") bench.s_models.emplace(seed, std::move(model));
      bench.runs.emplace(std::pair{std::string(name), seed}, std::move(run));
    }
  }
  return bench;
}

void labeling_uniformity(const Benchmark& bench, const std::vector<std::uint64_t>& seeds) {
  const std::size_t window = default_experiment().train.window;
  bool pass = true;
  std::string detail;
  for (auto seed : seeds) {
    const auto& self = bench.runs.at({"s-groupface", seed});
    const auto& naive = bench.runs.at({"naive-labeling", seed});
    const double kl_self = final_label_kl(self.training, window);
    const double kl_naive = final_label_kl(naive.training, window);
    const double initial = aggregated_label_kl(self.training.label_trace, 2, false, window);
    pass = pass && kl_self < 0.05 && kl_self <= kl_naive && self.seconds < 600.0;
    detail += "seed " + std::to_string(seed) + ": self " + fmt(kl_self, 4) + " naive " + fmt(kl_naive, 4) +
              " (phase-2 start " + fmt(initial, 4) + "); ";
  }
  verdict(5, pass, "self-distributed labels: final KL < 0.05 and <= naive on each seed", detail);
}

void architecture_direction(const Benchmark& bench, const std::vector<std::uint64_t>& seeds) {
  auto mean_acc = [&](const std::string& name) {
    double sum = 0.0;
    for (auto seed : seeds) sum += bench.runs.at({name, seed}).cosine.report.pair_accuracy;
    return sum / static_cast<double>(seeds.size());
  };
  const double base = mean_acc("baseline"), s = mean_acc("s-groupface"), h = mean_acc("h-groupface");
  verdict(6, s >= base && h >= base, "mean pair accuracy: S-GroupFace and H-GroupFace >= baseline",
          "baseline " + fmt(base, 8) + ", S " + fmt(s, 8) + ", H " + fmt(h, 8) + " (S " + (s >= h ? ">=" : "<") +
              " H, not asserted)");
}

void zero_case(Benchmark& bench) {
  const Dataset& data = bench.data.begin()->second;
  GroupFaceModel zeroed = bench.s_models.begin()->second.clone();
  zeroed.zero_group_heads();
  GroupFaceModel baseline = zeroed.instance_only();
  bool identical = true;
  for (bool group_similarity : {false, true}) {
    const auto a = evaluate(zeroed, data.eval, SimilarityConfig{}, group_similarity);
    const auto b = evaluate(baseline, data.eval, SimilarityConfig{}, group_similarity);
    identical = identical && a == b && to_json(a).dump() == to_json(b).dump();
  }
  verdict(7, identical, "zeroed group heads give the instance-only EvalReport",
          identical ? "bit-identical under cosine and group-aware scoring" : "reports differ");
}

void group_similarity_sanity(const Benchmark& bench, const std::vector<std::uint64_t>& seeds) {
  const SimilarityConfig sim;
  const SimilarityConfig off{0.0, sim.gamma};
  std::size_t above = 0, equal_with_distance = 0, unequal_without_distance = 0, beta_zero_diffs = 0, pairs = 0;
  std::string tars;
  for (auto seed : seeds) {
    const auto& emb = bench.runs.at({"s-groupface", seed}).embeddings;
    const std::size_t n = emb.final_rep.rows();
    auto row = [](const Tensor& t, std::size_t i) { return t.data().subspan(i * t.cols(), t.cols()); };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto fi = row(emb.final_rep, i), fj = row(emb.final_rep, j);
        const auto vi = row(emb.intermediate, i), vj = row(emb.intermediate, j);
        const double s = cosine_similarity(fi, fj);
        const double star = group_aware_similarity(fi, fj, vi, vj, sim);
        const double d = normalized_distance(vi, vj);
        above += star > s;
        equal_with_distance += star == s && d > 0.0;
        unequal_without_distance += star != s && d == 0.0;
        beta_zero_diffs += group_aware_similarity(fi, fj, vi, vj, off) != s;
        ++pairs;
      }
    }
    // A duplicated sample: coinciding intermediates leave S untouched.
    const auto f0 = row(emb.final_rep, 0), f1 = row(emb.final_rep, 1), v0 = row(emb.intermediate, 0);
    unequal_without_distance += group_aware_similarity(f0, f1, v0, v0, sim) != cosine_similarity(f0, f1);

    const auto& run = bench.runs.at({"s-groupface", seed});
    const auto strict_s = *run.cosine.report.tar_at_far.begin();
    const auto strict_star = run.group.report.tar_at_far.begin()->second;
    tars += "seed " + std::to_string(seed) + " TAR@FAR=" + fmt(strict_s.first) + ": S " + fmt(strict_s.second, 4) +
            " S* " + fmt(strict_star, 4) + "; ";
  }
  const bool pass = above == 0 && equal_with_distance == 0 && unequal_without_distance == 0 && beta_zero_diffs == 0;
  verdict(8, pass, "group-aware similarity never exceeds cosine; equal iff beta=0 or D=0",
          std::to_string(pairs) + " pairs: " + std::to_string(above) + " above, " +
              std::to_string(equal_with_distance + unequal_without_distance) + " equality mismatches, " +
              std::to_string(beta_zero_diffs) + " beta=0 differences; " + tars);
}

// ---------------------------------------------------------------------------

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void determinism() {
  const auto dir = std::filesystem::temp_directory_path() / ("groupface_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  SyntheticDataConfig dcfg;
  const Dataset data = generate_synthetic_dataset(dcfg);
  Experiment e = preset("s-groupface", default_experiment());
  e.train.phase1_steps = 200;
  e.train.phase2_steps = 300;

  struct Outcome {
    TrainingResult training;
    EvalReport cosine, group;
    std::vector<char> checkpoint;
  };
  auto once = [&](const std::string& tag) {
    GroupFaceModel model(fit_model_config(e.model, data), 1);
    Outcome o{train(model, data.train, e.loss, e.train), {}, {}, {}};
    o.cosine = evaluate(model, data.eval, SimilarityConfig{}, false);
    o.group = evaluate(model, data.eval, SimilarityConfig{}, true);
    const std::string path = (dir / (tag + ".bin")).string();
    save_checkpoint(path, model, &o.training.group_state);
    o.checkpoint = file_bytes(path);
    return o;
  };
  const Outcome a = once("a"), b = once("b");
  std::filesystem::remove_all(dir);

  bool curves = a.training.loss_curve.size() == b.training.loss_curve.size();
  for (std::size_t i = 0; curves && i < a.training.loss_curve.size(); ++i) {
    const auto &x = a.training.loss_curve[i], &y = b.training.loss_curve[i];
    curves = x.loss == y.loss && x.identity_loss == y.identity_loss && x.grouping_loss == y.grouping_loss &&
             x.learning_rate == y.learning_rate;
  }
  for (std::size_t i = 0; curves && i < a.training.label_trace.size(); ++i) {
    curves = a.training.label_trace[i].histogram == b.training.label_trace[i].histogram;
  }
  const bool checkpoints = !a.checkpoint.empty() && a.checkpoint == b.checkpoint;
  const bool reports = a.cosine == b.cosine && a.group == b.group;
  verdict(9, curves && checkpoints && reports, "repeat runs are bit-identical",
          std::string("curves ") + (curves ? "same" : "differ") + ", checkpoint " + (checkpoints ? "same" : "differ") +
              " (" + std::to_string(a.checkpoint.size()) + " bytes), reports " + (reports ? "same" : "differ"));
}

}  // namespace

int main() {
  try {
    gradient_integrity();
    batch_mean_identity();
    normalized_probability_bound();
    metric_oracles();

    const std::vector<std::uint64_t> seeds{1, 2, 3};
    Benchmark bench = run_benchmark(seeds);
    labeling_uniformity(bench, seeds);
    architecture_direction(bench, seeds);
    zero_case(bench);
    group_similarity_sanity(bench, seeds);

    determinism();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
