#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "linkgae/errors.hpp"
#include "linkgae/graph.hpp"

namespace linkgae {

/// Random geometric graph on the unit torus: nodes connect when their
/// distance is below the radius giving the requested expected degree.
/// Featureless, and link structure is almost entirely explained by common
/// neighbors, so it is strongly structure-dominant.
inline Graph random_geometric_graph(int n, double avg_degree, std::uint64_t seed) {
  if (n < 2) throw ConfigError("random_geometric_graph: need n >= 2");
  if (!(avg_degree > 0.0) || avg_degree >= n - 1) {
    throw ConfigError("random_geometric_graph: avg_degree must be in (0, n-1)");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = unit(rng);
    y[i] = unit(rng);
  }
  const double r = std::sqrt(avg_degree / (std::numbers::pi * n));
  // Bucket grid with cells at least r wide; neighbours live in the 3x3 block.
  const int cells = std::max(1, static_cast<int>(1.0 / r));
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(cells) * cells);
  auto cell_of = [&](double c) { return std::min(cells - 1, static_cast<int>(c * cells)); };
  for (int i = 0; i < n; ++i) grid[cell_of(x[i]) * cells + cell_of(y[i])].push_back(i);

  auto wrap = [](double d) {
    d = std::abs(d);
    return std::min(d, 1.0 - d);
  };
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    const int cx = cell_of(x[i]), cy = cell_of(y[i]);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        const int gx = ((cx + dx) % cells + cells) % cells;
        const int gy = ((cy + dy) % cells + cells) % cells;
        for (int j : grid[gx * cells + gy]) {
          if (j <= i) continue;
          const double ddx = wrap(x[i] - x[j]), ddy = wrap(y[i] - y[j]);
          if (ddx * ddx + ddy * ddy < r * r) edges.push_back({i, j});
        }
      }
    }
  }
  // With few cells the 3x3 block revisits the same cell; Graph drops duplicates.
  Graph g(n, edges);
  return g;
}

/// Planted-partition graph whose features carry the community signal while
/// edges are sparse and rarely share neighbours: a feature-dominant graph.
inline Graph feature_partition_graph(int n, int communities, int feature_dim, double avg_degree,
                                     double noise, std::uint64_t seed) {
  if (n < 2 || communities < 1 || feature_dim < communities) {
    throw ConfigError("feature_partition_graph: need n >= 2 and feature_dim >= communities >= 1");
  }
  std::mt19937_64 rng(seed);
  std::vector<int> label(n);
  for (int i = 0; i < n; ++i) label[i] = i % communities;
  Matrix<double> feats(n, feature_dim);
  std::normal_distribution<double> gauss(0.0, noise);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < feature_dim; ++j) feats(i, j) = gauss(rng);
    feats(i, label[i]) += 1.0;
  }
  std::vector<std::vector<int>> members(communities);
  for (int i = 0; i < n; ++i) members[label[i]].push_back(i);
  const auto target = static_cast<std::size_t>(avg_degree * n / 2.0);
  std::vector<Edge> edges;
  std::uniform_int_distribution<int> pick_node(0, n - 1);
  while (edges.size() < target) {
    const int u = pick_node(rng);
    const auto& pool = members[label[u]];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const int v = pool[pick(rng)];
    if (u != v) edges.push_back({u, v});
  }
  return Graph(n, edges, std::move(feats));
}

}  // namespace linkgae
