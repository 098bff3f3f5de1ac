#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "groupface/grouping.hpp"
#include "groupface/metrics.hpp"
#include "groupface/model.hpp"
#include "groupface/objectives.hpp"

namespace {

using namespace groupface;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = dist(rng);
  return Tensor({rows, cols}, std::move(v));
}

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.num_groups = static_cast<std::size_t>(state.range(1));
  GroupFaceModel model(cfg, 1);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_matrix(n, cfg.input_dim, 2);
  Labels y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::uint32_t>(i % cfg.num_identities);
  GroupState groups(cfg.num_groups);
  for (auto _ : state) {
    Graph g;
    const auto out = model.forward(g, x, Mode::train);
    update_expectation(groups, out.group_probs);
    const auto labels = assign_labels_self_distributed(out.group_probs, groups);
    const auto loss = combined_loss(g, margin_softmax_loss(g, out.logits, y, {}), self_grouping_loss(g, out.gdn_logits, labels), 0.1);
    for (auto& p : model.parameters()) p.zero_grad();
    g.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TrainStep)->Args({64, 8})->Args({64, 32})->Args({256, 8});

void BM_EvalForward(benchmark::State& state) {
  ModelConfig cfg;
  GroupFaceModel model(cfg, 1);
  const Tensor x = random_matrix(static_cast<std::size_t>(state.range(0)), cfg.input_dim, 3);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(model.forward(g, x, Mode::eval).final_rep.data().data());
  }
}
BENCHMARK(BM_EvalForward)->Arg(256)->Arg(1024);

void BM_TarAtFar(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> dist;
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> genuine(n / 50), impostor(n);
  for (auto& s : genuine) s = dist(rng) + 2.0;
  for (auto& s : impostor) s = dist(rng);
  const std::vector<double> levels{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  for (auto _ : state) benchmark::DoNotOptimize(tar_at_far(genuine, impostor, levels));
}
BENCHMARK(BM_TarAtFar)->Arg(100'000)->Arg(1'000'000);

void BM_PairAccuracy(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  std::vector<ScoredPair> pairs(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = {dist(rng) + (i % 50 == 0 ? 2.0 : 0.0), i % 50 == 0};
  for (auto _ : state) benchmark::DoNotOptimize(pair_verification_accuracy(pairs));
}
BENCHMARK(BM_PairAccuracy)->Arg(100'000)->Arg(1'000'000);

void BM_GroupAwareSimilarity(benchmark::State& state) {
  const Tensor a = random_matrix(2, 32, 6);
  const Tensor b = random_matrix(2, 32, 7);
  const SimilarityConfig cfg;
  const auto av = a.data(), bv = b.data();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        group_aware_similarity(av.subspan(0, 32), av.subspan(32, 32), bv.subspan(0, 32), bv.subspan(32, 32), cfg));
  }
}
BENCHMARK(BM_GroupAwareSimilarity);

}  // namespace
BENCHMARK_MAIN();
