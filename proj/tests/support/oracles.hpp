#pragma once

// Independent reference implementations for the tests. Nothing here calls
// into the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

// Lowest impostor score t with #{impostor >= t} / n_imp <= far; TAR counts
// genuine scores >= t.
inline double tar_at_far(const std::vector<double>& genuine, const std::vector<double>& impostor, double far) {
  // Candidates: every impostor score, plus a point just above the largest.
  double best = std::nextafter(*std::max_element(impostor.begin(), impostor.end()),
                               std::numeric_limits<double>::infinity());
  for (double t : impostor) {
    std::size_t accepted = 0;
    for (double s : impostor) accepted += s >= t;
    if (static_cast<double>(accepted) / static_cast<double>(impostor.size()) <= far && t < best) best = t;
  }
  std::size_t accepted = 0;
  for (double s : genuine) accepted += s >= best;
  return static_cast<double>(accepted) / static_cast<double>(genuine.size());
}

// Tries every observed score as a threshold plus "everything accepted".
inline double pair_accuracy(const std::vector<std::pair<double, bool>>& pairs) {
  std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
  for (const auto& p : pairs) candidates.push_back(p.first);
  std::size_t best = 0;
  for (double t : candidates) {
    std::size_t correct = 0;
    for (const auto& [score, same] : pairs) correct += (score > t) == same;
    if (correct > best) best = correct;
  }
  return static_cast<double>(best) / static_cast<double>(pairs.size());
}

// a [n x k] times b [k x m], both row-major.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                                  std::size_t k, std::size_t m) {
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i * m + j] += a[i * k + t] * b[t * m + j];
  return c;
}

// Central difference of f along every coordinate of x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

inline double kl_to_uniform(const std::vector<std::size_t>& histogram) {
  double total = 0.0;
  for (auto c : histogram) total += static_cast<double>(c);
  double kl = 0.0;
  const double k = static_cast<double>(histogram.size());
  for (auto c : histogram) {
    if (c == 0) continue;
    const double q = static_cast<double>(c) / total;
    kl += q * std::log(q * k);
  }
  return kl;
}

// Hand-rolled generators.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }
  bool coin() { return index(0, 1) == 1; }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal();
    return v;
  }

  // A point on the probability simplex. Sharp rows (large exponent spread)
  // and flat rows both occur.
  std::vector<double> simplex(std::size_t k) {
    const double spread = uniform(0.0, 6.0);
    std::vector<double> p(k);
    double total = 0.0;
    for (auto& x : p) total += x = std::exp(spread * normal());
    for (auto& x : p) x /= total;
    return p;
  }

  // Scores drawn from a few discrete levels so ties are common.
  std::vector<double> scores(std::size_t n, bool coarse) {
    std::vector<double> v(n);
    for (auto& x : v) x = coarse ? static_cast<double>(index(0, 10)) / 10.0 : uniform(-1.0, 1.0);
    return v;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace oracle
