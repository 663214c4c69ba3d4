#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "linkgae/errors.hpp"

namespace linkgae {

/// Which ranking metric to report.
struct MetricSpec {
  enum class Kind { HitsAtK, Mrr };
  Kind kind = Kind::HitsAtK;
  int k = 100;

  static MetricSpec hits(int k) { return {Kind::HitsAtK, k}; }
  static MetricSpec mrr() { return {Kind::Mrr, 0}; }

  std::string name() const { return kind == Kind::Mrr ? "mrr" : "hits@" + std::to_string(k); }

  /// Accepts "hits@K" or "mrr".
  static MetricSpec parse(const std::string& s) {
    if (s == "mrr" || s == "MRR") return mrr();
    if (s.rfind("hits@", 0) == 0 || s.rfind("Hits@", 0) == 0) {
      try {
        std::size_t used = 0;
        int k = std::stoi(s.substr(5), &used);
        if (used == s.size() - 5 && k >= 1) return hits(k);
      } catch (const std::exception&) {
      }
    }
    throw ConfigError("unknown metric '" + s + "' (expected hits@K or mrr)");
  }

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

/// Fraction of positives scoring strictly above the K-th largest negative.
/// A positive tied with that threshold counts as a miss.
inline double hits_at_k(std::span<const double> pos, std::span<const double> neg, int k) {
  if (k < 1) throw ConfigError("hits@K needs K >= 1");
  if (neg.size() < static_cast<std::size_t>(k)) {
    throw DimensionError("hits@" + std::to_string(k) + " needs at least K negatives, got " +
                         std::to_string(neg.size()));
  }
  if (pos.empty()) return 0.0;
  std::vector<double> sorted(neg.begin(), neg.end());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(), std::greater<>());
  const double threshold = sorted[k - 1];
  std::size_t hits = 0;
  for (double p : pos) hits += p > threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pos.size());
}

/// 1 / (1 + #negatives scoring >= pos). Ties are pessimistic.
inline double reciprocal_rank(double pos, std::span<const double> negs) {
  if (negs.empty()) throw DimensionError("reciprocal rank needs a non-empty negative set");
  std::size_t above = 0;
  for (double s : negs) above += s >= pos ? 1 : 0;
  return 1.0 / (1.0 + static_cast<double>(above));
}

inline double mrr(std::span<const double> pos, std::span<const std::vector<double>> per_source_neg) {
  if (pos.size() != per_source_neg.size()) {
    throw DimensionError("mrr: " + std::to_string(pos.size()) + " positives but " +
                         std::to_string(per_source_neg.size()) + " negative sets");
  }
  if (pos.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) total += reciprocal_rank(pos[i], per_source_neg[i]);
  return total / static_cast<double>(pos.size());
}

}  // namespace linkgae
