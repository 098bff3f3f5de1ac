#include "groupface/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace groupface {

void SimilarityConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("similarity beta must be non-negative");
  if (!(gamma > 0.0)) throw std::invalid_argument("similarity gamma must be positive");
}

namespace {

double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

void require_same_length(std::span<const double> a, std::span<const double> b, const char* where) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument(std::string(where) + ": vectors of length " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()));
  }
}

std::size_t allowed_false_accepts(double far, std::size_t impostors) {
  const double n = static_cast<double>(impostors);
  auto ok = [&](std::size_t c) { return static_cast<double>(c) / n <= far; };
  std::size_t c = static_cast<std::size_t>(std::clamp(std::floor(far * n), 0.0, n));
  while (c < impostors && ok(c + 1)) ++c;
  while (c > 0 && !ok(c)) --c;
  return c;
}

std::size_t count_at_least(const std::vector<double>& ascending, double threshold) {
  return static_cast<std::size_t>(ascending.end() -
                                  std::lower_bound(ascending.begin(), ascending.end(), threshold));
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "cosine_similarity");
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw std::domain_error("cosine_similarity: zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double normalized_distance(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, "normalized_distance");
  const double na = norm(a), nb = norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw std::domain_error("normalized_distance: zero vector");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] / na - b[i] / nb;
    sq += d * d;
  }
  return std::sqrt(sq);
}

double group_aware_similarity(std::span<const double> final_i, std::span<const double> final_j,
                              std::span<const double> intermediate_i, std::span<const double> intermediate_j,
                              const SimilarityConfig& cfg) {
  cfg.validate();
  const double s = cosine_similarity(final_i, final_j);
  const double d = normalized_distance(intermediate_i, intermediate_j);
  if (cfg.beta == 0.0 || d == 0.0) return s;
  return s - cfg.beta * std::pow(d, cfg.gamma);
}

std::vector<TarAtFar> tar_at_far_points(std::span<const double> genuine, std::span<const double> impostor,
                                        std::span<const double> far_levels) {
  if (genuine.empty() || impostor.empty()) throw std::invalid_argument("tar_at_far: empty score list");
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<TarAtFar> points;
  for (double far : far_levels) {
    if (!(far > 0.0 && far <= 1.0)) throw std::invalid_argument("tar_at_far: FAR level outside (0, 1]");
    const std::size_t allowed = allowed_false_accepts(far, imp.size());
    // Start from the allowed-th largest impostor; ties with the next one down
    // would admit too many, so step up to the next distinct value.
    double threshold = std::nextafter(imp.back(), std::numeric_limits<double>::infinity());
    if (allowed > 0) {
      auto it = imp.end() - static_cast<std::ptrdiff_t>(allowed);
      if (it != imp.begin() && *(it - 1) == *it) it = std::upper_bound(imp.begin(), imp.end(), *it);
      if (it != imp.end()) threshold = *it;
    }
    const double tar = static_cast<double>(count_at_least(gen, threshold)) / static_cast<double>(gen.size());
    points.push_back({far, threshold, tar});
  }
  return points;
}

std::map<double, double> tar_at_far(std::span<const double> genuine, std::span<const double> impostor,
                                    std::span<const double> far_levels) {
  std::map<double, double> table;
  for (const auto& p : tar_at_far_points(genuine, impostor, far_levels)) table[p.far] = p.tar;
  return table;
}

std::vector<RocPoint> roc_curve(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) throw std::invalid_argument("roc_curve: empty score list");
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> thresholds(gen);
  thresholds.insert(thresholds.end(), imp.begin(), imp.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    curve.push_back({t, static_cast<double>(count_at_least(imp, t)) / static_cast<double>(imp.size()),
                     static_cast<double>(count_at_least(gen, t)) / static_cast<double>(gen.size())});
  }
  return curve;
}

void write_roc_csv(const std::string& path, const std::vector<RocPoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ROC curve to " + path);
  out << "threshold,far,tar\n" << std::setprecision(17);
  for (const auto& p : curve) out << p.threshold << ',' << p.far << ',' << p.tar << '\n';
  if (!out) throw std::runtime_error("failed writing ROC curve to " + path);
}

double pair_verification_accuracy(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("pair_verification_accuracy: no pairs");
  std::vector<ScoredPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredPair& a, const ScoredPair& b) { return a.score < b.score; });
  const auto same_total = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [](const ScoredPair& p) { return p.same_identity; }));
  if (same_total == 0 || same_total == sorted.size()) {
    throw std::invalid_argument("pair_verification_accuracy: need both same- and different-identity pairs");
  }

  // Threshold below every score: everything predicted "same".
  std::size_t correct = same_total;
  std::size_t best = correct;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      // Moving the threshold past this score flips the prediction to "different".
      if (sorted[j].same_identity) --correct;
      else ++correct;
      ++j;
    }
    best = std::max(best, correct);
    i = j;
  }
  return static_cast<double>(best) / static_cast<double>(sorted.size());
}

double rank1_identification(std::span<const std::uint32_t> probe_ids, std::span<const std::uint32_t> gallery_ids,
                            const PairScore& score) {
  if (probe_ids.empty()) throw std::invalid_argument("rank1_identification: no probes");
  std::unordered_map<std::uint32_t, std::size_t> occurrences;
  for (auto id : gallery_ids) ++occurrences[id];
  for (auto id : probe_ids) {
    auto it = occurrences.find(id);
    if (it == occurrences.end()) {
      throw std::invalid_argument("rank1_identification: probe identity " + std::to_string(id) + " missing from gallery");
    }
    if (it->second != 1) {
      throw std::invalid_argument("rank1_identification: identity " + std::to_string(id) +
                                  " appears more than once in the gallery");
    }
  }

  std::size_t hits = 0;
  for (std::size_t p = 0; p < probe_ids.size(); ++p) {
    std::size_t best = 0;
    double best_score = score(p, 0);
    for (std::size_t g = 1; g < gallery_ids.size(); ++g) {
      const double s = score(p, g);
      if (s > best_score) {
        best_score = s;
        best = g;
      }
    }
    if (gallery_ids[best] == probe_ids[p]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probe_ids.size());
}

LabelDistribution label_distribution_stats(std::span<const std::size_t> histogram) {
  LabelDistribution stats{std::vector<std::size_t>(histogram.begin(), histogram.end()), 0.0};
  std::size_t total = 0;
  for (auto c : histogram) total += c;
  if (total == 0 || histogram.empty()) return stats;
  const double k = static_cast<double>(histogram.size());
  for (auto c : histogram) {
    if (c == 0) continue;
    const double q = static_cast<double>(c) / static_cast<double>(total);
    stats.kl_to_uniform += q * std::log(q * k);
  }
  return stats;
}

LabelDistribution label_distribution_stats(std::span<const std::uint32_t> labels, std::size_t num_groups) {
  std::vector<std::size_t> histogram(num_groups, 0);
  for (auto label : labels) {
    if (label >= num_groups) {
      throw std::invalid_argument("label_distribution_stats: label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(num_groups) + ")");
    }
    ++histogram[label];
  }
  return label_distribution_stats(std::span<const std::size_t>(histogram));
}

std::string far_key(double far) {
  std::ostringstream out;
  out << far;
  if (std::stod(out.str()) != far) {
    out.str("");
    out << std::setprecision(17) << far;
  }
  return out.str();
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json tar = nlohmann::json::object();
  for (const auto& [far, value] : report.tar_at_far) tar[far_key(far)] = value;
  return {{"tar_at_far", tar},
          {"rank1", report.rank1},
          {"pair_accuracy", report.pair_accuracy},
          {"label_histogram", report.label_histogram},
          {"kl_to_uniform", report.kl_to_uniform}};
}

EvalReport eval_report_from_json(const nlohmann::json& doc) {
  EvalReport report;
  for (const auto& [key, value] : doc.at("tar_at_far").items()) report.tar_at_far[std::stod(key)] = value.get<double>();
  report.rank1 = doc.at("rank1").get<double>();
  report.pair_accuracy = doc.at("pair_accuracy").get<double>();
  report.label_histogram = doc.at("label_histogram").get<std::vector<std::size_t>>();
  report.kl_to_uniform = doc.at("kl_to_uniform").get<double>();
  return report;
}

}  // namespace groupface
