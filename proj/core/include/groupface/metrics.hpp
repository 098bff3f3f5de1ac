#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace groupface {

struct SimilarityConfig {
  double beta = 0.1;
  double gamma = 1.0 / 3.0;

  void validate() const;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Euclidean distance between the unit-normalized vectors.
double normalized_distance(std::span<const double> a, std::span<const double> b);

/// S(vbar_i, vbar_j) - beta * D(vhat_i, vhat_j)^gamma.
double group_aware_similarity(std::span<const double> final_i, std::span<const double> final_j,
                              std::span<const double> intermediate_i, std::span<const double> intermediate_j,
                              const SimilarityConfig& cfg);

struct TarAtFar {
  double far;
  double threshold;
  double tar;
};

/// A pair is accepted when its score is >= t. For each FAR level, t is the
/// lowest impostor score that accepts at most FAR of the impostors; when no
/// impostor score qualifies, t sits just above the largest impostor.
/// TAR = #{genuine >= t} / #genuine.
std::vector<TarAtFar> tar_at_far_points(std::span<const double> genuine, std::span<const double> impostor,
                                        std::span<const double> far_levels);
std::map<double, double> tar_at_far(std::span<const double> genuine, std::span<const double> impostor,
                                    std::span<const double> far_levels);

struct RocPoint {
  double threshold;
  double far;
  double tar;
};

/// One point per distinct observed score, thresholds descending, using the
/// same "score >= threshold" acceptance rule as tar_at_far.
std::vector<RocPoint> roc_curve(std::span<const double> genuine, std::span<const double> impostor);
void write_roc_csv(const std::string& path, const std::vector<RocPoint>& curve);

struct ScoredPair {
  double score;
  bool same_identity;
};

/// Best accuracy over all thresholds (pairs with score > t predicted same).
double pair_verification_accuracy(std::span<const ScoredPair> pairs);

/// Scores probe i against gallery entry j.
using PairScore = std::function<double(std::size_t probe, std::size_t gallery)>;

/// Fraction of probes whose best-scoring gallery entry (lowest index on ties)
/// has the probe's identity. Every probe identity must appear exactly once in
/// the gallery; extra gallery identities act as distractors.
double rank1_identification(std::span<const std::uint32_t> probe_ids, std::span<const std::uint32_t> gallery_ids,
                            const PairScore& score);

struct LabelDistribution {
  std::vector<std::size_t> histogram;
  double kl_to_uniform = 0.0;
};

/// KL(q || uniform) = sum_k q_k ln(q_k K), with 0 ln 0 = 0.
LabelDistribution label_distribution_stats(std::span<const std::uint32_t> labels, std::size_t num_groups);
LabelDistribution label_distribution_stats(std::span<const std::size_t> histogram);

struct EvalReport {
  std::map<double, double> tar_at_far;
  double rank1 = 0.0;
  double pair_accuracy = 0.0;
  std::vector<std::size_t> label_histogram;
  double kl_to_uniform = 0.0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& doc);
std::string far_key(double far);

}  // namespace groupface
