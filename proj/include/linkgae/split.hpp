#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "linkgae/errors.hpp"
#include "linkgae/graph.hpp"

namespace linkgae {

/// Hash set of undirected pairs.
class EdgeSet {
 public:
  EdgeSet() = default;
  explicit EdgeSet(std::span<const Edge> edges) {
    set_.reserve(edges.size() * 2);
    for (const Edge& e : edges) insert(e);
  }

  bool insert(Edge e) { return set_.insert(key(e)).second; }
  bool contains(Edge e) const { return set_.count(key(e)) != 0; }
  std::size_t size() const noexcept { return set_.size(); }

 private:
  static std::uint64_t key(Edge e) {
    e = canonical(e);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.u)) << 32) |
           static_cast<std::uint32_t>(e.v);
  }
  std::unordered_set<std::uint64_t> set_;
};

/// Positive train/valid/test edges plus evaluation negatives.
///
/// Negatives come in one of two shapes: a global pool (valid_neg / test_neg)
/// ranked against every positive, or per-source candidate lists aligned with
/// the positives (pos[i].u scored against each node in *_neg_per_source[i]).
struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> valid_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> valid_neg;
  std::vector<Edge> test_neg;
  std::vector<std::vector<NodeId>> valid_neg_per_source;
  std::vector<std::vector<NodeId>> test_neg_per_source;
  std::uint64_t seed = 0;

  bool per_source() const noexcept { return !test_neg_per_source.empty(); }
};

namespace detail {

inline std::vector<Edge> draw_from_non_edges(const Graph& g, std::size_t count,
                                             std::mt19937_64& rng, const EdgeSet& exclude) {
  std::vector<Edge> pool;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
      if (!g.has_edge(u, v) && !exclude.contains({u, v})) pool.push_back({u, v});
    }
  }
  if (pool.size() < count) {
    throw Error("sample_negatives: requested " + std::to_string(count) + " negatives but only " +
                std::to_string(pool.size()) + " non-edges are available");
  }
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace detail

/// Draws `count` distinct uniform node pairs that are neither edges of g nor
/// members of `exclude`.
inline std::vector<Edge> sample_negatives(const Graph& g, std::size_t count, std::uint64_t seed,
                                          const EdgeSet& exclude = {}) {
  std::vector<Edge> out;
  if (count == 0) return out;
  const std::int64_t n = g.num_nodes();
  const std::int64_t free_pairs = n * (n - 1) / 2 - static_cast<std::int64_t>(g.num_edges());
  std::mt19937_64 rng(seed);

  // Dense regime: rejection sampling would mostly reject.
  if (static_cast<std::int64_t>(count + exclude.size()) * 2 > free_pairs) {
    return detail::draw_from_non_edges(g, count, rng, exclude);
  }

  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  EdgeSet seen;
  out.reserve(count);
  while (out.size() < count) {
    NodeId u = node(rng);
    NodeId v = node(rng);
    Edge e = canonical({u, v});
    if (u == v || g.has_edge(e.u, e.v) || exclude.contains(e) || !seen.insert(e)) continue;
    out.push_back(e);
  }
  return out;
}

/// Bucket sizes for m items: floor each share, then hand the leftovers to the
/// buckets with the largest fractional remainders (earlier bucket on ties).
inline std::array<std::size_t, 3> split_sizes(std::size_t m, std::array<double, 3> ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double share = ratios[i] * static_cast<double>(m);
    // Nudge so 0.7 * 10 lands on 7 rather than 6.999...
    sizes[i] = static_cast<std::size_t>(std::floor(share + 1e-9));
    frac[i] = share - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; assigned < m; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  return sizes;
}

/// Random train/valid/test split of g's edges, plus per-split global
/// negative pools (|valid_pos| and |test_pos| non-edges of g).
inline EdgeSplit random_split(const Graph& g, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9 || *std::min_element(ratios.begin(), ratios.end()) < 0.0) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const std::size_t m = g.num_edges();
  if (m < 3) {
    throw Error("random_split: graph has " + std::to_string(m) + " edges, need at least 3");
  }
  auto sizes = split_sizes(m, ratios);
  for (int i : {1, 2}) {
    if (sizes[i] == 0 && ratios[i] > 0.0) {
      ++sizes[i];
      --sizes[0];
    }
  }

  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  std::mt19937_64 rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng);

  EdgeSplit split;
  split.seed = seed;
  auto it = edges.begin();
  split.train_pos.assign(it, it + sizes[0]);
  it += sizes[0];
  split.valid_pos.assign(it, it + sizes[1]);
  it += sizes[1];
  split.test_pos.assign(it, edges.end());

  split.valid_neg = sample_negatives(g, split.valid_pos.size(), rng());
  EdgeSet taken(split.valid_neg);
  split.test_neg = sample_negatives(g, split.test_pos.size(), rng(), taken);
  return split;
}

// ---------------------------------------------------------------------------
// Split cache (JSON)

namespace detail {

inline nlohmann::json edges_to_json(std::span<const Edge> edges) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Edge& e : edges) arr.push_back({e.u, e.v});
  return arr;
}

inline std::vector<Edge> edges_from_json(const nlohmann::json& arr) {
  std::vector<Edge> out;
  out.reserve(arr.size());
  for (const auto& p : arr) out.push_back({p.at(0).get<NodeId>(), p.at(1).get<NodeId>()});
  return out;
}

}  // namespace detail

inline nlohmann::json split_to_json(const EdgeSplit& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["train"] = detail::edges_to_json(s.train_pos);
  j["valid"] = detail::edges_to_json(s.valid_pos);
  j["test"] = detail::edges_to_json(s.test_pos);
  j["valid_neg"] = detail::edges_to_json(s.valid_neg);
  j["neg"] = detail::edges_to_json(s.test_neg);
  if (s.per_source()) {
    j["valid_neg_per_source"] = s.valid_neg_per_source;
    j["neg_per_source"] = s.test_neg_per_source;
  }
  return j;
}

inline EdgeSplit split_from_json(const nlohmann::json& j) {
  EdgeSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_pos = detail::edges_from_json(j.at("train"));
  s.valid_pos = detail::edges_from_json(j.at("valid"));
  s.test_pos = detail::edges_from_json(j.at("test"));
  s.test_neg = detail::edges_from_json(j.at("neg"));
  if (j.contains("valid_neg")) s.valid_neg = detail::edges_from_json(j.at("valid_neg"));
  if (j.contains("neg_per_source")) {
    s.test_neg_per_source = j.at("neg_per_source").get<std::vector<std::vector<NodeId>>>();
    s.valid_neg_per_source = j.value("valid_neg_per_source", std::vector<std::vector<NodeId>>{});
  }
  return s;
}

inline void save_split(const EdgeSplit& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << split_to_json(s).dump() << '\n';
}

inline EdgeSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return split_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace linkgae
