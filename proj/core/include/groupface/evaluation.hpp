#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groupface/dataset.hpp"
#include "groupface/metrics.hpp"
#include "groupface/model.hpp"

namespace groupface {

struct EvalOptions {
  std::vector<double> far_levels{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  /// Above this many pairs, a seeded uniform subsample of this size is scored.
  std::size_t max_pairs = 2'000'000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t chunk_rows = 256;
};

/// Eval-mode network outputs for a set of samples.
struct Embeddings {
  Tensor instance;      // v_x
  Tensor final_rep;     // v-bar
  Tensor intermediate;  // v-hat
  Tensor group_probs;   // p(G_k|x)
};

Embeddings embed(GroupFaceModel& model, const Tensor& features, std::size_t chunk_rows = 256);

struct EvalDetails {
  EvalReport report;
  std::vector<double> genuine;
  std::vector<double> impostor;
};

/// Scores all sample pairs (or a seeded subsample) with the cosine or the
/// group-aware similarity, and runs rank-1 identification with the first
/// sample of each identity as the gallery and the rest as probes.
EvalDetails evaluate_embeddings(const Embeddings& emb, const Labels& identities, const SimilarityConfig& sim,
                                bool use_group_similarity, const EvalOptions& options = {});

EvalReport evaluate(GroupFaceModel& model, const Split& eval_data, const SimilarityConfig& sim,
                    bool use_group_similarity, const EvalOptions& options = {});

/// Writes instance/final/intermediate/probabilities as f64 matrix files, the
/// identity labels, and an export.json sidecar describing them.
void export_embeddings(GroupFaceModel& model, const Split& data, const std::string& dir);

}  // namespace groupface
