#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "linkgae/errors.hpp"
#include "linkgae/graph.hpp"
#include "linkgae/split.hpp"
#include "linkgae/synthetic.hpp"

namespace linkgae {

/// The named dataset directory does not exist.
class DatasetUnavailable : public Error {
 public:
  using Error::Error;
};

/// A graph plus, when the source ships one, its fixed evaluation split.
struct Dataset {
  std::string name;
  Graph graph;
  std::optional<EdgeSplit> official_split;
};

inline constexpr std::array<double, 3> kDefaultSplitRatios{0.7, 0.1, 0.2};

namespace detail {

/// Reads lines of whitespace-separated node ids, any number per line.
inline std::vector<std::vector<NodeId>> read_id_rows(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::vector<NodeId>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::vector<NodeId> row;
    for (auto tok : split_ws(s)) {
      NodeId id = 0;
      if (!parse_number(tok, id) || id < 0) {
        throw ParseError(path.string(), lineno, "bad node id '" + std::string(tok) + "'");
      }
      row.push_back(id);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void check_ids(const std::vector<Edge>& edges, NodeId n, const std::filesystem::path& path) {
  for (const Edge& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw DimensionError(path.string() + ": node id out of range for a " + std::to_string(n) +
                           "-node graph");
    }
  }
}

/// Layout of dir/split/: train.txt valid.txt test.txt hold "u v" positives,
/// valid_neg.txt / test_neg.txt hold global "u v" negatives, and
/// valid_neg_per_source.txt / test_neg_per_source.txt hold one line of
/// candidate ids per positive of the matching file.
inline EdgeSplit read_split_dir(const std::filesystem::path& dir, NodeId n) {
  namespace fs = std::filesystem;
  EdgeSplit s;
  s.train_pos = read_edge_list(dir / "train.txt");
  s.valid_pos = read_edge_list(dir / "valid.txt");
  s.test_pos = read_edge_list(dir / "test.txt");
  for (auto* v : {&s.train_pos, &s.valid_pos, &s.test_pos}) check_ids(*v, n, dir);

  auto per_source = [&](const char* file, std::size_t expected) {
    auto rows = read_id_rows(dir / file);
    if (rows.size() != expected) {
      throw DimensionError(std::string(file) + ": expected " + std::to_string(expected) +
                           " candidate rows, got " + std::to_string(rows.size()));
    }
    for (const auto& r : rows) {
      if (r.empty()) throw DimensionError(std::string(file) + ": empty candidate row");
      for (NodeId id : r) {
        if (id >= n) throw DimensionError(std::string(file) + ": node id out of range");
      }
    }
    return rows;
  };
  if (fs::exists(dir / "test_neg_per_source.txt")) {
    s.test_neg_per_source = per_source("test_neg_per_source.txt", s.test_pos.size());
    s.valid_neg_per_source = per_source("valid_neg_per_source.txt", s.valid_pos.size());
  } else {
    s.valid_neg = read_edge_list(dir / "valid_neg.txt");
    s.test_neg = read_edge_list(dir / "test_neg.txt");
    check_ids(s.valid_neg, n, dir);
    check_ids(s.test_neg, n, dir);
  }
  return s;
}

inline std::filesystem::path data_root() {
  if (const char* env = std::getenv("LINKGAE_DATA_DIR"); env && *env) return env;
  return "data";
}

}  // namespace detail

/// Loads a dataset directory: edges.txt, optional features.csv, optional
/// split/ (see read_split_dir). When only split/ is present the graph is the
/// union of its positive edges.
inline Dataset load_dataset_dir(const std::filesystem::path& dir, std::string name = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DatasetUnavailable("dataset directory not found: " + dir.string());
  Dataset ds{name.empty() ? dir.filename().string() : name, Graph(0, {}), std::nullopt};
  const auto feats = dir / "features.csv";
  const bool has_feats = fs::exists(feats);
  const bool has_split = fs::is_directory(dir / "split");
  if (fs::exists(dir / "edges.txt")) {
    ds.graph = load_graph(dir / "edges.txt", has_feats ? std::optional(feats) : std::nullopt);
  } else if (has_split) {
    std::vector<Edge> all;
    for (const char* f : {"train.txt", "valid.txt", "test.txt"}) {
      auto part = read_edge_list(dir / "split" / f);
      all.insert(all.end(), part.begin(), part.end());
    }
    NodeId n = 0;
    for (const Edge& e : all) n = std::max({n, e.u + 1, e.v + 1});
    std::optional<Matrix<double>> f;
    if (has_feats) {
      f = read_feature_csv(feats);
      if (n > f->rows()) throw DimensionError("split edges reference nodes beyond features.csv rows");
      n = static_cast<NodeId>(f->rows());
    }
    ds.graph = Graph(n, all, std::move(f));
  } else {
    throw DatasetUnavailable(dir.string() + " has neither edges.txt nor split/");
  }
  if (has_split) ds.official_split = detail::read_split_dir(dir / "split", ds.graph.num_nodes());
  return ds;
}

/// Resolves a dataset spec:
///   synthetic:geometric[:n[:avg_degree]]   featureless, structure-dominant
///   synthetic:features[:n]                 feature-dominant planted partition
///   an existing directory path
///   a bare name, looked up under $LINKGAE_DATA_DIR (default ./data)
inline Dataset load_dataset(const std::string& spec, std::uint64_t graph_seed = 0) {
  namespace fs = std::filesystem;
  if (spec.rfind("synthetic:", 0) == 0) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      auto colon = spec.find(':', start);
      parts.push_back(spec.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    auto num = [&](std::size_t i, double fallback) {
      if (parts.size() <= i) return fallback;
      double x = 0;
      if (!detail::parse_number(parts[i], x)) throw ConfigError("bad number in dataset spec '" + spec + "'");
      return x;
    };
    if (parts[1] == "geometric") {
      return {spec, random_geometric_graph(static_cast<int>(num(2, 2000)), num(3, 10.0), graph_seed),
              std::nullopt};
    }
    if (parts[1] == "features") {
      return {spec,
              feature_partition_graph(static_cast<int>(num(2, 1000)), 8, 16, num(3, 4.0), 0.3, graph_seed),
              std::nullopt};
    }
    throw ConfigError("unknown synthetic kind '" + parts[1] + "' (geometric|features)");
  }
  if (fs::is_directory(spec)) return load_dataset_dir(spec);
  return load_dataset_dir(detail::data_root() / spec, spec);
}

/// The dataset's fixed split when it has one (seed recorded only), otherwise
/// a seeded 70/10/20 random split.
inline EdgeSplit dataset_split(const Dataset& ds, std::uint64_t seed) {
  if (ds.official_split) {
    EdgeSplit s = *ds.official_split;
    s.seed = seed;
    return s;
  }
  return random_split(ds.graph, kDefaultSplitRatios, seed);
}

}  // namespace linkgae
