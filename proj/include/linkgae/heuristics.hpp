#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "linkgae/evaluation.hpp"
#include "linkgae/graph.hpp"
#include "linkgae/split.hpp"

namespace linkgae {

enum class Heuristic { CommonNeighbors, AdamicAdar, ResourceAllocation, Cosine };

inline Heuristic parse_heuristic(const std::string& s) {
  if (s == "cn") return Heuristic::CommonNeighbors;
  if (s == "aa") return Heuristic::AdamicAdar;
  if (s == "ra") return Heuristic::ResourceAllocation;
  if (s == "cos") return Heuristic::Cosine;
  throw ConfigError("unknown heuristic '" + s + "' (expected cn|aa|ra|cos)");
}

inline std::string to_string(Heuristic h) {
  switch (h) {
    case Heuristic::CommonNeighbors: return "cn";
    case Heuristic::AdamicAdar: return "aa";
    case Heuristic::ResourceAllocation: return "ra";
    case Heuristic::Cosine: return "cos";
  }
  return "?";
}

namespace detail {

// Sorted-merge over two CSR rows; calls fn(r) for every shared neighbor.
template <typename Fn>
void for_each_common_neighbor(const Graph& g, NodeId u, NodeId v, Fn&& fn) {
  auto a = g.neighbors(u);
  auto b = g.neighbors(v);
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      fn(a[i]);
      ++i;
      ++j;
    }
  }
}

inline void check_node(const Graph& g, NodeId u) {
  if (u < 0 || u >= g.num_nodes()) {
    throw DimensionError("node " + std::to_string(u) + " outside graph of " +
                         std::to_string(g.num_nodes()) + " nodes");
  }
}

}  // namespace detail

/// |N(u) ∩ N(v)|. For u == v this is |N(u)| (a node is not its own neighbor).
inline double common_neighbors(const Graph& g, NodeId u, NodeId v) {
  detail::check_node(g, u);
  detail::check_node(g, v);
  double count = 0.0;
  detail::for_each_common_neighbor(g, u, v, [&](NodeId) { count += 1.0; });
  return count;
}

/// Σ_r 1 / ln deg(r) over shared neighbors r.
inline double adamic_adar(const Graph& g, NodeId u, NodeId v) {
  detail::check_node(g, u);
  detail::check_node(g, v);
  double score = 0.0;
  detail::for_each_common_neighbor(g, u, v, [&](NodeId r) {
    const auto deg = g.degree(r);
    // Unreachable for u != v: r neighbors both endpoints.
    if (deg < 2) throw Error("adamic_adar: common neighbor with degree < 2");
    score += 1.0 / std::log(static_cast<double>(deg));
  });
  return score;
}

/// Σ_r 1 / deg(r) over shared neighbors r.
inline double resource_allocation(const Graph& g, NodeId u, NodeId v) {
  detail::check_node(g, u);
  detail::check_node(g, v);
  double score = 0.0;
  detail::for_each_common_neighbor(
      g, u, v, [&](NodeId r) { score += 1.0 / static_cast<double>(g.degree(r)); });
  return score;
}

/// cos(x_u, x_v); a zero-vector row scores 0.
inline double feature_cosine(const Graph& g, NodeId u, NodeId v) {
  if (!g.has_features()) {
    throw ConfigError(
        "cosine heuristic needs node features; for featureless graphs use all-ones features "
        "(structure_feature_index does this automatically)");
  }
  detail::check_node(g, u);
  detail::check_node(g, v);
  const auto& x = g.features();
  const double nu = x.row(u).norm();
  const double nv = x.row(v).norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return x.row(u).dot(x.row(v)) / (nu * nv);
}

inline double heuristic_score(const Graph& g, Heuristic h, NodeId u, NodeId v) {
  switch (h) {
    case Heuristic::CommonNeighbors: return common_neighbors(g, u, v);
    case Heuristic::AdamicAdar: return adamic_adar(g, u, v);
    case Heuristic::ResourceAllocation: return resource_allocation(g, u, v);
    case Heuristic::Cosine: return feature_cosine(g, u, v);
  }
  return 0.0;
}

/// Scores the test part of `split` with a heuristic and reduces it with
/// `metric`. Structural heuristics see only the training edges.
inline double heuristic_eval(const Graph& g, const EdgeSplit& split, Heuristic h,
                             const MetricSpec& metric, SplitPart part = SplitPart::Test) {
  if (h == Heuristic::Cosine && !g.has_features()) {
    throw ConfigError("heuristic cos: graph has no features (use all-ones features instead)");
  }
  const Graph train = g.with_edges(split.train_pos);
  PairScorer score = [&](std::span<const Edge> pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const Edge& e : pairs) out.push_back(heuristic_score(train, h, e.u, e.v));
    return out;
  };
  return evaluate_split(metric, split, part, score);
}

struct StructureFeatureReport {
  double structure_perf = 0.0;  // P_S: common neighbors
  double feature_perf = 0.0;    // P_F: feature cosine
  double index = 0.0;
};

inline constexpr double kIndexEpsilon = 1e-9;

/// P_S / (P_S + P_F + eps) with P_S from common neighbors and P_F from
/// feature cosine. Featureless graphs use all-ones features, which tie every
/// pair and so score at chance.
inline StructureFeatureReport structure_feature_index(const Graph& g, const EdgeSplit& split,
                                                      const MetricSpec& metric) {
  StructureFeatureReport r;
  r.structure_perf = heuristic_eval(g, split, Heuristic::CommonNeighbors, metric);
  if (g.has_features()) {
    r.feature_perf = heuristic_eval(g, split, Heuristic::Cosine, metric);
  } else {
    Graph ones(g.num_nodes(), g.edges(), Matrix<double>::Ones(g.num_nodes(), 1));
    r.feature_perf = heuristic_eval(ones, split, Heuristic::Cosine, metric);
  }
  r.index = r.structure_perf / (r.structure_perf + r.feature_perf + kIndexEpsilon);
  return r;
}

inline double structure_feature_index(double structure_perf, double feature_perf) {
  return structure_perf / (structure_perf + feature_perf + kIndexEpsilon);
}

}  // namespace linkgae
