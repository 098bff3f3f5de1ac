#include "groupface/evaluation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "groupface/grouping.hpp"

namespace groupface {

namespace {

void copy_rows(const Tensor& from, Tensor& to, std::size_t offset) {
  auto src = from.data();
  std::copy(src.begin(), src.end(), to.data().begin() + static_cast<std::ptrdiff_t>(offset * from.cols()));
}

std::span<const double> row(const Tensor& t, std::size_t r) { return t.data().subspan(r * t.cols(), t.cols()); }

struct PairIndex {
  std::uint32_t i;
  std::uint32_t j;
};

std::vector<PairIndex> enumerate_pairs(std::size_t n, std::size_t max_pairs, std::uint64_t seed) {
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::vector<PairIndex> pairs;
  if (total <= max_pairs) {
    pairs.reserve(total);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    return pairs;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::set<std::pair<std::uint32_t, std::uint32_t>> chosen;
  while (chosen.size() < max_pairs) {
    auto a = static_cast<std::uint32_t>(pick(rng));
    auto b = static_cast<std::uint32_t>(pick(rng));
    if (a == b) continue;
    chosen.insert({std::min(a, b), std::max(a, b)});
  }
  for (const auto& [i, j] : chosen) pairs.push_back({i, j});
  return pairs;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t per = (count + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * per, end = std::min(count, begin + per);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace

Embeddings embed(GroupFaceModel& model, const Tensor& features, std::size_t chunk_rows) {
  if (chunk_rows == 0) throw std::invalid_argument("embed: chunk size must be positive");
  const std::size_t n = features.rows();
  const auto& cfg = model.config();
  Embeddings emb{Tensor({n, cfg.embed_dim}), Tensor({n, cfg.final_dim()}), Tensor({n, cfg.gdn_hidden_dim}),
                 Tensor({n, cfg.num_groups})};
  for (std::size_t begin = 0; begin < n; begin += chunk_rows) {
    const std::size_t end = std::min(n, begin + chunk_rows);
    Graph g;
    const auto out = model.forward(g, features.rows_slice(begin, end), Mode::eval);
    copy_rows(out.instance, emb.instance, begin);
    copy_rows(out.final_rep, emb.final_rep, begin);
    copy_rows(out.gdn_intermediate, emb.intermediate, begin);
    copy_rows(out.group_probs, emb.group_probs, begin);
  }
  return emb;
}

EvalDetails evaluate_embeddings(const Embeddings& emb, const Labels& identities, const SimilarityConfig& sim,
                                bool use_group_similarity, const EvalOptions& options) {
  sim.validate();
  const std::size_t n = identities.size();
  if (emb.final_rep.rows() != n) throw std::invalid_argument("evaluate: embeddings and labels disagree in length");
  if (std::set<std::uint32_t>(identities.begin(), identities.end()).size() < 2) {
    throw std::invalid_argument("evaluate: need at least 2 identities");
  }

  auto score = [&](std::size_t i, std::size_t j) {
    if (use_group_similarity) {
      return group_aware_similarity(row(emb.final_rep, i), row(emb.final_rep, j), row(emb.intermediate, i),
                                    row(emb.intermediate, j), sim);
    }
    return cosine_similarity(row(emb.final_rep, i), row(emb.final_rep, j));
  };

  const auto pairs = enumerate_pairs(n, options.max_pairs, options.seed);
  std::vector<double> scores(pairs.size());
  parallel_for(pairs.size(), options.threads, [&](std::size_t p) { scores[p] = score(pairs[p].i, pairs[p].j); });

  EvalDetails details;
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const bool same = identities[pairs[p].i] == identities[pairs[p].j];
    (same ? details.genuine : details.impostor).push_back(scores[p]);
    scored.push_back({scores[p], same});
  }
  if (details.genuine.empty() || details.impostor.empty()) {
    throw std::invalid_argument("evaluate: need both genuine and impostor pairs");
  }

  EvalReport& report = details.report;
  report.tar_at_far = tar_at_far(details.genuine, details.impostor, options.far_levels);
  report.pair_accuracy = pair_verification_accuracy(scored);

  std::vector<std::size_t> gallery, probes;
  std::set<std::uint32_t> seen;
  for (std::size_t i = 0; i < n; ++i) (seen.insert(identities[i]).second ? gallery : probes).push_back(i);
  if (probes.empty()) throw std::invalid_argument("evaluate: every identity has a single sample; no probes");
  Labels gallery_ids, probe_ids;
  for (auto i : gallery) gallery_ids.push_back(identities[i]);
  for (auto i : probes) probe_ids.push_back(identities[i]);
  report.rank1 = rank1_identification(probe_ids, gallery_ids,
                                      [&](std::size_t p, std::size_t g) { return score(probes[p], gallery[g]); });

  const auto stats = label_distribution_stats(assign_labels_naive(emb.group_probs), emb.group_probs.cols());
  report.label_histogram = stats.histogram;
  report.kl_to_uniform = stats.kl_to_uniform;
  return details;
}

EvalReport evaluate(GroupFaceModel& model, const Split& eval_data, const SimilarityConfig& sim,
                    bool use_group_similarity, const EvalOptions& options) {
  const auto emb = embed(model, eval_data.features, options.chunk_rows);
  return evaluate_embeddings(emb, eval_data.identities, sim, use_group_similarity, options).report;
}

void export_embeddings(GroupFaceModel& model, const Split& data, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create export directory " + dir + ": " + ec.message());
  const auto emb = embed(model, data.features);

  const std::vector<std::pair<std::string, const Tensor*>> columns{{"instance", &emb.instance},
                                                                   {"final", &emb.final_rep},
                                                                   {"intermediate", &emb.intermediate},
                                                                   {"group_probs", &emb.group_probs}};
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, tensor] : columns) {
    const std::string file = name + ".bin";
    write_matrix_file(dir + "/" + file, *tensor, ValueType::f64);
    files.push_back({{"path", file}, {"role", name}, {"records", tensor->rows()}, {"dim", tensor->cols()},
                     {"dtype", "f64"}});
  }
  write_label_file(dir + "/identity.u32", data.identities);
  files.push_back({{"path", "identity.u32"}, {"role", "identity_labels"}, {"records", data.size()}, {"dtype", "u32"}});
  const nlohmann::json sidecar = {{"format", "groupface-embeddings"}, {"version", 1}, {"files", files}};
  std::ofstream out(dir + "/export.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/export.json");
  out << sidecar.dump(2) << '\n';
}

}  // namespace groupface
