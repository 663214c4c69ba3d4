#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "linkgae/errors.hpp"

namespace linkgae {

using NodeId = std::int32_t;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Undirected node pair. Stored canonically with u < v by the graph and
/// split code; the struct itself does not enforce it.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge canonical(Edge e) {
  if (e.u > e.v) std::swap(e.u, e.v);
  return e;
}

/// Immutable undirected graph in CSR form with both directions stored.
///
/// Construction drops self-loops and duplicate edges (either direction) and
/// records how many of each were dropped. Column indices are sorted within
/// each row, so neighbor scans and membership tests are O(deg) / O(log deg).
class Graph {
 public:
  Graph() = default;

  Graph(NodeId num_nodes, std::span<const Edge> edges,
        std::optional<Matrix<double>> features = std::nullopt)
      : num_nodes_(num_nodes), features_(std::move(features)) {
    if (num_nodes < 0) throw DimensionError("negative node count");
    if (features_ && features_->rows() != num_nodes) {
      throw DimensionError("feature rows (" + std::to_string(features_->rows()) +
                           ") != num_nodes (" + std::to_string(num_nodes) + ")");
    }
    std::vector<Edge> canon;
    canon.reserve(edges.size());
    for (const Edge& e : edges) {
      if (e.u < 0 || e.v < 0 || e.u >= num_nodes || e.v >= num_nodes) {
        throw DimensionError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                             ") outside [0," + std::to_string(num_nodes) + ")");
      }
      if (e.u == e.v) {
        ++dropped_self_loops_;
        continue;
      }
      canon.push_back(canonical(e));
    }
    std::sort(canon.begin(), canon.end());
    auto last = std::unique(canon.begin(), canon.end());
    dropped_duplicates_ = static_cast<std::size_t>(canon.end() - last);
    canon.erase(last, canon.end());
    edges_ = std::move(canon);

    offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
    for (const Edge& e : edges_) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
    columns_.resize(offsets_.back());
    std::vector<std::int64_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const Edge& e : edges_) {
      columns_[cursor[e.u]++] = e.v;
      columns_[cursor[e.v]++] = e.u;
    }
    for (NodeId u = 0; u < num_nodes; ++u) {
      std::sort(columns_.begin() + offsets_[u], columns_.begin() + offsets_[u + 1]);
    }
  }

  NodeId num_nodes() const noexcept { return num_nodes_; }
  /// Number of undirected edges.
  std::size_t num_edges() const noexcept { return edges_.size(); }
  /// Canonical (u < v) edge list, sorted.
  std::span<const Edge> edges() const noexcept { return edges_; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {columns_.data() + offsets_[u], columns_.data() + offsets_[u + 1]};
  }
  std::int64_t degree(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }
  double average_degree() const {
    return num_nodes_ == 0 ? 0.0 : 2.0 * static_cast<double>(edges_.size()) / num_nodes_;
  }

  bool has_edge(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  bool has_features() const noexcept { return features_.has_value(); }
  const Matrix<double>& features() const {
    if (!features_) throw ConfigError("graph has no node features");
    return *features_;
  }
  const std::optional<Matrix<double>>& maybe_features() const noexcept { return features_; }

  std::span<const std::int64_t> row_offsets() const noexcept { return offsets_; }
  std::span<const NodeId> column_indices() const noexcept { return columns_; }

  std::size_t dropped_self_loops() const noexcept { return dropped_self_loops_; }
  std::size_t dropped_duplicates() const noexcept { return dropped_duplicates_; }
  std::size_t warning_count() const noexcept { return dropped_self_loops_ + dropped_duplicates_; }

  /// Same node set and features, different edges.
  Graph with_edges(std::span<const Edge> edges) const { return Graph(num_nodes_, edges, features_); }

 private:
  NodeId num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> columns_;
  std::optional<Matrix<double>> features_;
  std::size_t dropped_self_loops_ = 0;
  std::size_t dropped_duplicates_ = 0;
};

/// Square CSR matrix over node indices.
template <typename T>
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(NodeId n, std::vector<std::int64_t> offsets, std::vector<NodeId> columns,
               std::vector<T> values, bool symmetric)
      : n_(n),
        offsets_(std::move(offsets)),
        columns_(std::move(columns)),
        values_(std::move(values)),
        symmetric_(symmetric) {}

  NodeId size() const noexcept { return n_; }
  std::size_t nnz() const noexcept { return columns_.size(); }
  bool symmetric() const noexcept { return symmetric_; }

  std::span<const std::int64_t> row_offsets() const noexcept { return offsets_; }
  std::span<const NodeId> column_indices() const noexcept { return columns_; }
  std::span<const T> values() const noexcept { return values_; }
  std::span<T> mutable_values() noexcept { return values_; }

  /// Position of entry (u, v) in the value array, or -1.
  std::int64_t find(NodeId u, NodeId v) const {
    auto first = columns_.begin() + offsets_[u];
    auto last = columns_.begin() + offsets_[u + 1];
    auto it = std::lower_bound(first, last, v);
    if (it == last || *it != v) return -1;
    return it - columns_.begin();
  }

  T at(NodeId u, NodeId v) const {
    std::int64_t p = find(u, v);
    return p < 0 ? T(0) : values_[p];
  }

  Matrix<T> to_dense() const {
    Matrix<T> out = Matrix<T>::Zero(n_, n_);
    for (NodeId u = 0; u < n_; ++u) {
      for (std::int64_t p = offsets_[u]; p < offsets_[u + 1]; ++p) out(u, columns_[p]) = values_[p];
    }
    return out;
  }

  SparseMatrix transpose() const {
    if (symmetric_) return *this;
    std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_) + 1, 0);
    for (NodeId c : columns_) ++offsets[c + 1];
    for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
    std::vector<NodeId> columns(columns_.size());
    std::vector<T> values(values_.size());
    std::vector<std::int64_t> cursor(offsets.begin(), offsets.end() - 1);
    // Rows visited in ascending order, so each transposed row comes out sorted.
    for (NodeId u = 0; u < n_; ++u) {
      for (std::int64_t p = offsets_[u]; p < offsets_[u + 1]; ++p) {
        std::int64_t q = cursor[columns_[p]]++;
        columns[q] = u;
        values[q] = values_[p];
      }
    }
    return SparseMatrix(n_, std::move(offsets), std::move(columns), std::move(values), false);
  }

  template <typename U>
  SparseMatrix<U> cast() const {
    std::vector<U> values(values_.begin(), values_.end());
    return SparseMatrix<U>(n_, offsets_, columns_, std::move(values), symmetric_);
  }

 private:
  NodeId n_ = 0;
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> columns_;
  std::vector<T> values_;
  bool symmetric_ = true;
};

/// Symmetrically normalized adjacency with self-loops,
/// D̃^{-1/2} (A + I) D̃^{-1/2}, deg̃ = deg + 1.
using NormalizedAdjacency = SparseMatrix<double>;

namespace detail {

// Builds CSR rows of A (+ I if self_loops) with value(u, v) given by fn.
template <typename T, typename Fn>
SparseMatrix<T> build_operator(const Graph& g, bool self_loops, bool symmetric, Fn&& fn) {
  const NodeId n = g.num_nodes();
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n) + 1, 0);
  for (NodeId u = 0; u < n; ++u) offsets[u + 1] = offsets[u] + g.degree(u) + (self_loops ? 1 : 0);
  std::vector<NodeId> columns(offsets.back());
  std::vector<T> values(offsets.back());
  for (NodeId u = 0; u < n; ++u) {
    std::int64_t p = offsets[u];
    bool placed_self = !self_loops;
    for (NodeId v : g.neighbors(u)) {
      if (!placed_self && u < v) {
        columns[p] = u;
        values[p++] = fn(u, u);
        placed_self = true;
      }
      columns[p] = v;
      values[p++] = fn(u, v);
    }
    if (!placed_self) {
      columns[p] = u;
      values[p++] = fn(u, u);
    }
  }
  return SparseMatrix<T>(n, std::move(offsets), std::move(columns), std::move(values), symmetric);
}

}  // namespace detail

inline NormalizedAdjacency normalize(const Graph& g) {
  std::vector<double> inv_sqrt(static_cast<std::size_t>(g.num_nodes()));
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    inv_sqrt[u] = 1.0 / std::sqrt(static_cast<double>(g.degree(u) + 1));
  }
  return detail::build_operator<double>(
      g, true, true, [&](NodeId u, NodeId v) { return inv_sqrt[u] * inv_sqrt[v]; });
}

/// Row-normalized neighbor mean, no self-loops. Isolated rows are empty.
inline SparseMatrix<double> mean_aggregation(const Graph& g) {
  return detail::build_operator<double>(g, false, false, [&](NodeId u, NodeId) {
    return 1.0 / static_cast<double>(g.degree(u));
  });
}

/// Plain adjacency A (neighbor sum), no self-loops.
inline SparseMatrix<double> sum_aggregation(const Graph& g) {
  return detail::build_operator<double>(g, false, true, [](NodeId, NodeId) { return 1.0; });
}

/// out = adj * x. Rows are accumulated sequentially in CSR order so repeated
/// calls are bit-identical.
template <typename T, typename Derived>
Matrix<T> spmm(const SparseMatrix<T>& adj, const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() != adj.size()) {
    throw DimensionError("spmm: x has " + std::to_string(x.rows()) + " rows, operator is " +
                         std::to_string(adj.size()));
  }
  const Matrix<T> dense = x;
  const Eigen::Index d = dense.cols();
  Matrix<T> out = Matrix<T>::Zero(adj.size(), d);
  auto offsets = adj.row_offsets();
  auto columns = adj.column_indices();
  auto values = adj.values();
  for (NodeId u = 0; u < adj.size(); ++u) {
    T* dst = out.data() + static_cast<Eigen::Index>(u) * d;
    for (std::int64_t p = offsets[u]; p < offsets[u + 1]; ++p) {
      const T w = values[p];
      if (w == T(0)) continue;
      const T* src = dense.data() + static_cast<Eigen::Index>(columns[p]) * d;
      for (Eigen::Index j = 0; j < d; ++j) dst[j] += w * src[j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File loading

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename Num>
bool parse_number(std::string_view tok, Num& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

inline std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace detail

/// Reads "u v" lines (0-based ids, whitespace-separated). Blank lines and
/// lines starting with '#' are skipped. Does not deduplicate.
inline std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  auto in = detail::open_or_throw(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto toks = detail::split_ws(s);
    Edge e;
    if (toks.size() != 2 || !detail::parse_number(toks[0], e.u) ||
        !detail::parse_number(toks[1], e.v)) {
      throw ParseError(path.string(), lineno, "expected two node ids, got '" + std::string(s) + "'");
    }
    if (e.u < 0 || e.v < 0) throw ParseError(path.string(), lineno, "negative node id");
    edges.push_back(e);
  }
  return edges;
}

/// CSV with one row of d_f reals per node; row index is the node id.
inline Matrix<double> read_feature_csv(const std::filesystem::path& path) {
  auto in = detail::open_or_throw(path);
  std::vector<double> flat;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    Eigen::Index count = 0;
    std::size_t start = 0;
    while (true) {
      auto comma = s.find(',', start);
      auto tok = detail::trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
      double x = 0.0;
      if (!detail::parse_number(tok, x)) {
        throw ParseError(path.string(), lineno, "bad real '" + std::string(tok) + "'");
      }
      flat.push_back(x);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(cols) + " columns, got " + std::to_string(count));
    }
    ++rows;
  }
  Matrix<double> out(rows, std::max<Eigen::Index>(cols, 0));
  std::copy(flat.begin(), flat.end(), out.data());
  return out;
}

/// Loads an edge list plus optional features into a symmetric, deduplicated
/// Graph. num_nodes is max(largest id + 1, feature rows); an edge naming a
/// node beyond the feature rows is a DimensionError.
inline Graph load_graph(const std::filesystem::path& edge_file,
                        const std::optional<std::filesystem::path>& feature_file = std::nullopt) {
  std::vector<Edge> edges = read_edge_list(edge_file);
  NodeId n = 0;
  for (const Edge& e : edges) n = std::max({n, e.u + 1, e.v + 1});
  std::optional<Matrix<double>> features;
  if (feature_file) {
    features = read_feature_csv(*feature_file);
    if (n > features->rows()) {
      throw DimensionError("edge file references node " + std::to_string(n - 1) + " but " +
                           feature_file->string() + " has only " +
                           std::to_string(features->rows()) + " rows");
    }
    n = static_cast<NodeId>(features->rows());
  }
  return Graph(n, edges, std::move(features));
}

}  // namespace linkgae
