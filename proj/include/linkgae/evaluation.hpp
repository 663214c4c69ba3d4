#pragma once

#include <functional>
#include <span>
#include <vector>

#include "linkgae/metrics.hpp"
#include "linkgae/split.hpp"

namespace linkgae {

/// Scores a batch of node pairs; larger means more likely to be an edge.
using PairScorer = std::function<std::vector<double>(std::span<const Edge>)>;

enum class SplitPart { Valid, Test };

/// Applies `spec` to one evaluation part of a split.
///
/// Global-pool splits rank each positive against the shared negatives
/// (MRR then uses the whole pool as every positive's candidate set).
/// Per-source splits score (pos.u, candidate) for each positive's own list.
inline double evaluate_split(const MetricSpec& spec, const EdgeSplit& split, SplitPart part,
                             const PairScorer& score) {
  const auto& pos = part == SplitPart::Valid ? split.valid_pos : split.test_pos;
  std::vector<double> pos_scores = score(pos);

  const auto& per_source = part == SplitPart::Valid ? split.valid_neg_per_source
                                                    : split.test_neg_per_source;
  if (!per_source.empty()) {
    if (per_source.size() != pos.size()) {
      throw DimensionError("per-source negatives not aligned with positives");
    }
    std::vector<Edge> pairs;
    std::vector<std::vector<double>> neg_scores(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
      pairs.clear();
      for (NodeId c : per_source[i]) pairs.push_back({pos[i].u, c});
      neg_scores[i] = score(pairs);
    }
    if (spec.kind == MetricSpec::Kind::Mrr) return mrr(pos_scores, neg_scores);
    // Hits@K per source: a positive hits when fewer than K of its own
    // candidates score at or above it.
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      std::size_t above = 0;
      for (double s : neg_scores[i]) above += s >= pos_scores[i] ? 1 : 0;
      hits += above < static_cast<std::size_t>(spec.k) ? 1 : 0;
    }
    return pos.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pos.size());
  }

  const auto& neg = part == SplitPart::Valid ? split.valid_neg : split.test_neg;
  std::vector<double> neg_scores = score(neg);
  if (spec.kind == MetricSpec::Kind::HitsAtK) return hits_at_k(pos_scores, neg_scores, spec.k);
  if (neg_scores.empty()) throw DimensionError("mrr needs a non-empty negative pool");
  if (pos_scores.empty()) return 0.0;
  std::sort(neg_scores.begin(), neg_scores.end());
  double total = 0.0;
  for (double p : pos_scores) {
    auto at_or_above = neg_scores.end() - std::lower_bound(neg_scores.begin(), neg_scores.end(), p);
    total += 1.0 / (1.0 + static_cast<double>(at_or_above));
  }
  return total / static_cast<double>(pos_scores.size());
}

}  // namespace linkgae
