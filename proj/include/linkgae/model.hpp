#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "linkgae/autograd.hpp"
#include "linkgae/graph.hpp"

namespace linkgae {

enum class InputMode { RawFeatures, LearnableOrthogonal, FixedOrthogonal, AllOnes, RandomUniform, RawPlusLearnable };
enum class ConvKind { Gcn, Sage, Gin };
enum class DecoderKind { Dot, Mlp };

struct EncoderConfig {
  ConvKind conv = ConvKind::Gcn;
  int num_layers = 2;
  int hidden_dim = 256;
  bool linear = true;
  bool initial_residual = true;
  /// L2-normalize each node embedding after the last layer.
  bool normalize_output = false;
};

struct DecoderConfig {
  DecoderKind kind = DecoderKind::Mlp;
  int mlp_layers = 2;
  bool initial_residual = true;
  double dropout = 0.0;
};

struct ModelConfig {
  InputMode input = InputMode::LearnableOrthogonal;
  EncoderConfig encoder;
  DecoderConfig decoder;
};

/// Same encoder with ReLU between message-passing layers.
inline EncoderConfig nonlinear_variant(EncoderConfig cfg) {
  cfg.linear = false;
  return cfg;
}

inline bool learnable_table(InputMode m) {
  return m == InputMode::LearnableOrthogonal || m == InputMode::AllOnes ||
         m == InputMode::RandomUniform || m == InputMode::RawPlusLearnable;
}
inline bool uses_raw_features(InputMode m) {
  return m == InputMode::RawFeatures || m == InputMode::RawPlusLearnable;
}

// ---------------------------------------------------------------------------
// Initializers

/// n x d table with orthonormal rows when n <= d. For n > d the columns of
/// the thin QR factor are orthonormal and the rows are rescaled to unit
/// norm, which keeps them nearly orthogonal (mean |cos| about sqrt(2/(πd))).
inline Matrix<double> orthogonal_table(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (n <= d) {
    Eigen::MatrixXd g(d, n);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = gauss(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, n);
    return q.transpose();
  }
  Eigen::MatrixXd g(n, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Matrix<double> q = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = q.row(i).norm();
    if (norm > 0.0) q.row(i) /= norm;
  }
  return q;
}

template <typename T, typename Rng>
Matrix<T> uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
  return m;
}

template <typename T, typename Rng>
Matrix<T> glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  return uniform_matrix<T>(fan_in, fan_out, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)),
                           rng);
}

// ---------------------------------------------------------------------------
// Graph operators consumed by the encoder

/// The sparse operator(s) one convolution kind propagates with, plus the
/// per-batch edge masking used by the mask-input training mode.
template <typename T>
class GraphOperators {
 public:
  GraphOperators() = default;
  GraphOperators(const Graph& g, ConvKind kind) : kind_(kind) {
    switch (kind) {
      case ConvKind::Gcn: primary_ = normalize(g).cast<T>(); break;
      case ConvKind::Sage:
        primary_ = mean_aggregation(g).cast<T>();
        transpose_ = primary_.transpose();
        break;
      case ConvKind::Gin: primary_ = sum_aggregation(g).cast<T>(); break;
    }
  }

  ConvKind kind() const noexcept { return kind_; }
  const SparseMatrix<T>& op() const noexcept { return primary_; }
  const SparseMatrix<T>* op_transpose() const noexcept {
    return primary_.symmetric() ? nullptr : &transpose_;
  }
  NodeId num_nodes() const noexcept { return primary_.size(); }

  /// Zeroes both directions of every listed edge until unmask(). Values
  /// elsewhere are left as they are (no renormalization).
  void mask(std::span<const Edge> edges) {
    unmask();
    for (const Edge& e : edges) {
      zero(primary_, e.u, e.v);
      zero(primary_, e.v, e.u);
      if (!primary_.symmetric()) {
        zero(transpose_, e.u, e.v);
        zero(transpose_, e.v, e.u);
      }
    }
  }

  void unmask() {
    for (auto it = saved_.rbegin(); it != saved_.rend(); ++it) {
      it->target->mutable_values()[it->pos] = it->value;
    }
    saved_.clear();
  }

  bool masked() const noexcept { return !saved_.empty(); }

 private:
  struct Saved {
    SparseMatrix<T>* target;
    std::int64_t pos;
    T value;
  };

  void zero(SparseMatrix<T>& m, NodeId u, NodeId v) {
    std::int64_t p = m.find(u, v);
    if (p < 0) return;
    saved_.push_back({&m, p, m.values()[p]});
    m.mutable_values()[p] = T(0);
  }

  ConvKind kind_ = ConvKind::Gcn;
  SparseMatrix<T> primary_;
  SparseMatrix<T> transpose_;
  std::vector<Saved> saved_;
};

// ---------------------------------------------------------------------------
// Input representation

/// Layer-0 node representation Z⁰ (n x d).
template <typename T>
class InputRepresentation {
 public:
  InputRepresentation() = default;

  InputMode mode() const noexcept { return mode_; }
  int dim() const noexcept { return dim_; }
  /// The n x d embedding table (empty for RawFeatures).
  const ad::Parameter<T>& table() const noexcept { return table_; }
  ad::Parameter<T>& table() noexcept { return table_; }

  ad::Var<T> forward(ad::Tape<T>& tape) {
    switch (mode_) {
      case InputMode::RawFeatures:
        return ad::matmul(tape.parameter(raw_), tape.parameter(raw_proj_));
      case InputMode::RawPlusLearnable: {
        auto projected = ad::matmul(tape.parameter(raw_), tape.parameter(raw_proj_));
        auto joined = ad::concat_cols(projected, tape.parameter(table_));
        return ad::matmul(joined, tape.parameter(mix_));
      }
      default:
        return tape.parameter(table_);
    }
  }

  std::vector<ad::Parameter<T>*> parameters() {
    std::vector<ad::Parameter<T>*> out;
    if (uses_raw_features(mode_)) out.push_back(&raw_proj_);
    if (mode_ != InputMode::RawFeatures) out.push_back(&table_);
    if (mode_ == InputMode::RawPlusLearnable) out.push_back(&mix_);
    return out;
  }

  template <typename U>
  friend InputRepresentation<U> build_input(const Graph& g, InputMode mode, int d,
                                            std::uint64_t seed);

 private:
  InputMode mode_ = InputMode::LearnableOrthogonal;
  int dim_ = 0;
  ad::Parameter<T> table_;
  ad::Parameter<T> raw_;  // frozen copy of the node features
  ad::Parameter<T> raw_proj_;
  ad::Parameter<T> mix_;
};

/// Builds Z⁰ for `mode`. Raw modes project the d_f-dim features to d with a
/// learnable matrix. FixedOrthogonal's table is frozen.
template <typename T>
InputRepresentation<T> build_input(const Graph& g, InputMode mode, int d, std::uint64_t seed) {
  if (d <= 0) throw ConfigError("input dimension must be positive");
  if (uses_raw_features(mode) && !g.has_features()) {
    throw ConfigError("raw-feature input needs node features; featureless graphs should use "
                      "input=ones (all-ones embeddings) or a learnable table");
  }
  InputRepresentation<T> in;
  in.mode_ = mode;
  in.dim_ = d;
  const Eigen::Index n = g.num_nodes();
  std::mt19937_64 rng(seed);
  switch (mode) {
    case InputMode::LearnableOrthogonal:
      in.table_ = {"input.table", orthogonal_table(n, d, rng()).cast<T>(), true};
      break;
    case InputMode::FixedOrthogonal:
      in.table_ = {"input.table", orthogonal_table(n, d, rng()).cast<T>(), false};
      break;
    case InputMode::AllOnes:
      in.table_ = {"input.table", Matrix<T>::Ones(n, d), true};
      break;
    case InputMode::RandomUniform:
      in.table_ = {"input.table", uniform_matrix<T>(n, d, 1.0, rng), true};
      break;
    case InputMode::RawPlusLearnable:
      in.table_ = {"input.table", orthogonal_table(n, d, rng()).cast<T>(), true};
      [[fallthrough]];
    case InputMode::RawFeatures: {
      const auto& x = g.features();
      in.raw_ = {"input.raw", x.cast<T>(), false};
      in.raw_proj_ = {"input.proj", glorot<T>(x.cols(), d, rng), true};
      if (mode == InputMode::RawPlusLearnable) in.mix_ = {"input.mix", glorot<T>(2 * d, d, rng), true};
      break;
    }
  }
  return in;
}

// ---------------------------------------------------------------------------
// Encoder

/// Stack of message-passing layers with optional initial residual:
/// Z^l = Conv_l(Z^{l-1}) + Z⁰.
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.num_layers < 1) throw ConfigError("encoder needs at least one layer");
    if (cfg.hidden_dim < 1) throw ConfigError("hidden dimension must be positive");
    std::mt19937_64 rng(seed);
    const int d = cfg.hidden_dim;
    for (int l = 0; l < cfg.num_layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      Layer layer;
      switch (cfg.conv) {
        case ConvKind::Gcn:
          layer.w = {p + "w", glorot<T>(d, d, rng)};
          break;
        case ConvKind::Sage:
          layer.w = {p + "w_neigh", glorot<T>(d, d, rng)};
          layer.w_self = {p + "w_self", glorot<T>(d, d, rng)};
          break;
        case ConvKind::Gin:
          layer.eps = {p + "eps", Matrix<T>::Zero(1, 1)};
          layer.w = {p + "mlp0.w", glorot<T>(d, d, rng)};
          layer.b = {p + "mlp0.b", Matrix<T>::Zero(1, d)};
          layer.w2 = {p + "mlp1.w", glorot<T>(d, d, rng)};
          layer.b2 = {p + "mlp1.b", Matrix<T>::Zero(1, d)};
          break;
      }
      layers_.push_back(std::move(layer));
    }
  }

  const EncoderConfig& config() const noexcept { return cfg_; }

  /// Sets every GCN weight to the identity (theory checks).
  void set_identity_weights() {
    for (auto& l : layers_) l.w.value = Matrix<T>::Identity(cfg_.hidden_dim, cfg_.hidden_dim);
  }
  void zero_weights() {
    for (auto* p : parameters()) p->value.setZero();
  }

  ad::Var<T> forward(ad::Tape<T>& tape, const GraphOperators<T>& ops, ad::Var<T> z0) {
    if (z0.rows() != ops.num_nodes() || z0.cols() != cfg_.hidden_dim) {
      throw DimensionError("encoder input must be " + std::to_string(ops.num_nodes()) + "x" +
                           std::to_string(cfg_.hidden_dim) + ", got " + std::to_string(z0.rows()) +
                           "x" + std::to_string(z0.cols()));
    }
    if (ops.kind() != cfg_.conv) throw ConfigError("graph operators built for a different conv");
    ad::Var<T> z = z0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      ad::Var<T> h = conv(tape, ops, layers_[l], z);
      if (!cfg_.linear && l + 1 < layers_.size()) h = ad::relu(h);
      z = cfg_.initial_residual ? ad::add(h, z0) : h;
    }
    if (cfg_.normalize_output) z = ad::l2_normalize_rows(z);
    return z;
  }

  std::vector<ad::Parameter<T>*> parameters() {
    std::vector<ad::Parameter<T>*> out;
    for (auto& l : layers_) {
      switch (cfg_.conv) {
        case ConvKind::Gcn: out.push_back(&l.w); break;
        case ConvKind::Sage: out.insert(out.end(), {&l.w, &l.w_self}); break;
        case ConvKind::Gin: out.insert(out.end(), {&l.eps, &l.w, &l.b, &l.w2, &l.b2}); break;
      }
    }
    return out;
  }

 private:
  struct Layer {
    ad::Parameter<T> w, w_self, eps, b, w2, b2;
  };

  ad::Var<T> conv(ad::Tape<T>& tape, const GraphOperators<T>& ops, Layer& layer, ad::Var<T> z) {
    switch (cfg_.conv) {
      case ConvKind::Gcn:
        return ad::matmul(ad::spmm(ops.op(), z), tape.parameter(layer.w));
      case ConvKind::Sage: {
        auto neigh = ad::matmul(ad::spmm(ops.op(), z, ops.op_transpose()), tape.parameter(layer.w));
        return ad::add(neigh, ad::matmul(z, tape.parameter(layer.w_self)));
      }
      case ConvKind::Gin: {
        // MLP((1 + ε) z + Σ_neighbors z)
        auto self = ad::add(z, ad::scale(z, tape.parameter(layer.eps)));
        auto h = ad::add(self, ad::spmm(ops.op(), z));
        h = ad::relu(ad::add_bias(ad::matmul(h, tape.parameter(layer.w)), tape.parameter(layer.b)));
        return ad::add_bias(ad::matmul(h, tape.parameter(layer.w2)), tape.parameter(layer.b2));
      }
    }
    throw ConfigError("unknown conv kind");
  }

  EncoderConfig cfg_;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Decoder

/// Scores node pairs from embeddings: a dot product, or an MLP over the
/// Hadamard product z_u ⊙ z_v with initial residuals and a scalar head.
/// Returns raw logits.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const DecoderConfig& cfg, int dim, std::uint64_t seed) : cfg_(cfg), dim_(dim) {
    if (cfg.kind == DecoderKind::Mlp && cfg.mlp_layers < 1) {
      throw ConfigError("MLP decoder needs at least one layer");
    }
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("dropout p must be in [0, 1)");
    if (cfg.kind == DecoderKind::Dot) return;
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int l = 0; l < cfg.mlp_layers; ++l) {
      const std::string p = "dec." + std::to_string(l) + ".";
      weights_.emplace_back(p + "w", uniform_matrix<T>(dim, dim, bound, rng));
      biases_.emplace_back(p + "b", uniform_matrix<T>(1, dim, bound, rng));
    }
    head_w_ = {"dec.head.w", uniform_matrix<T>(dim, 1, bound, rng)};
    head_b_ = {"dec.head.b", uniform_matrix<T>(1, 1, bound, rng)};
  }

  const DecoderConfig& config() const noexcept { return cfg_; }

  void zero_head() {
    head_w_.value.setZero();
    head_b_.value.setZero();
  }

  template <typename Rng>
  ad::Var<T> forward(ad::Tape<T>& tape, ad::Var<T> z, std::span<const Edge> edges, bool train,
                     Rng& rng) {
    std::vector<NodeId> src, dst;
    src.reserve(edges.size());
    dst.reserve(edges.size());
    for (const Edge& e : edges) {
      if (e.u < 0 || e.v < 0 || e.u >= z.rows() || e.v >= z.rows()) {
        throw DimensionError("decode: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                             ") out of range for " + std::to_string(z.rows()) + " nodes");
      }
      src.push_back(e.u);
      dst.push_back(e.v);
    }
    auto zu = ad::gather_rows(z, std::move(src));
    auto zv = ad::gather_rows(z, std::move(dst));
    if (cfg_.kind == DecoderKind::Dot) return ad::row_dot(zu, zv);

    if (z.cols() != dim_) throw DimensionError("decode: embedding width does not match decoder");
    auto h0 = ad::hadamard(zu, zv);
    auto h = h0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = ad::add_bias(ad::matmul(h, tape.parameter(weights_[l])), tape.parameter(biases_[l]));
      h = ad::dropout(ad::relu(h), cfg_.dropout, train, rng);
      if (cfg_.initial_residual) h = ad::add(h, h0);
    }
    return ad::add_bias(ad::matmul(h, tape.parameter(head_w_)), tape.parameter(head_b_));
  }

  std::vector<ad::Parameter<T>*> parameters() {
    std::vector<ad::Parameter<T>*> out;
    if (cfg_.kind == DecoderKind::Dot) return out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back(&weights_[l]);
      out.push_back(&biases_[l]);
    }
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
  }

 private:
  DecoderConfig cfg_;
  int dim_ = 0;
  std::vector<ad::Parameter<T>> weights_;
  std::vector<ad::Parameter<T>> biases_;
  ad::Parameter<T> head_w_;
  ad::Parameter<T> head_b_;
};

// ---------------------------------------------------------------------------
// Full model

/// Input representation + encoder + decoder.
template <typename T>
class GaeModel {
 public:
  GaeModel(const Graph& g, const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    std::mt19937_64 rng(seed);
    input_ = build_input<T>(g, cfg.input, cfg.encoder.hidden_dim, rng());
    encoder_ = Encoder<T>(cfg.encoder, rng());
    decoder_ = Decoder<T>(cfg.decoder, cfg.encoder.hidden_dim, rng());
  }

  GaeModel(const GaeModel&) = delete;
  GaeModel& operator=(const GaeModel&) = delete;
  GaeModel(GaeModel&&) = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  InputRepresentation<T>& input() noexcept { return input_; }
  Encoder<T>& encoder() noexcept { return encoder_; }
  Decoder<T>& decoder() noexcept { return decoder_; }

  ad::Var<T> encode(ad::Tape<T>& tape, const GraphOperators<T>& ops) {
    return encoder_.forward(tape, ops, input_.forward(tape));
  }

  template <typename Rng>
  ad::Var<T> decode(ad::Tape<T>& tape, ad::Var<T> z, std::span<const Edge> edges, bool train,
                    Rng& rng) {
    return decoder_.forward(tape, z, edges, train, rng);
  }

  /// Trainable parameters in a fixed order (frozen tables excluded).
  std::vector<ad::Parameter<T>*> parameters() {
    std::vector<ad::Parameter<T>*> out;
    for (auto* p : all_parameters()) {
      if (p->trainable) out.push_back(p);
    }
    return out;
  }

  std::vector<ad::Parameter<T>*> all_parameters() {
    std::vector<ad::Parameter<T>*> out = input_.parameters();
    for (auto* p : encoder_.parameters()) out.push_back(p);
    for (auto* p : decoder_.parameters()) out.push_back(p);
    return out;
  }

  /// Eval-mode node embeddings (no dropout anywhere in the encoder).
  Matrix<T> embed(const GraphOperators<T>& ops) {
    ad::Tape<T> tape;
    Matrix<T> z = encode(tape, ops).value();
    return z;
  }

  /// Eval-mode logits for `edges`, decoded in chunks from fixed embeddings.
  std::vector<double> score(const Matrix<T>& z, std::span<const Edge> edges,
                            std::size_t chunk = 65536) {
    std::vector<double> out;
    out.reserve(edges.size());
    ad::Tape<T> tape;
    std::mt19937_64 unused(0);
    for (std::size_t start = 0; start < edges.size(); start += chunk) {
      auto part = edges.subspan(start, std::min(chunk, edges.size() - start));
      auto zc = tape.constant(z);
      auto logits = decode(tape, zc, part, false, unused);
      const auto& v = logits.value();
      for (Eigen::Index i = 0; i < v.rows(); ++i) out.push_back(static_cast<double>(v(i, 0)));
      tape.clear();
    }
    return out;
  }

  std::vector<Matrix<T>> snapshot() {
    std::vector<Matrix<T>> out;
    for (auto* p : all_parameters()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Matrix<T>>& values) {
    auto params = all_parameters();
    if (params.size() != values.size()) throw UsageError("restore: snapshot does not match model");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  }

  /// {"format": 1, "config_hash": ..., "parameters": {name: {rows, cols, data}}}.
  /// The frozen raw feature copy is not stored.
  nlohmann::json checkpoint(const std::string& config_hash) {
    nlohmann::json j;
    j["format"] = 1;
    j["config_hash"] = config_hash;
    nlohmann::json params = nlohmann::json::object();
    for (auto* p : all_parameters()) {
      std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
      params[p->name] = {{"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", data}};
    }
    j["parameters"] = std::move(params);
    return j;
  }

  void load_checkpoint(const nlohmann::json& j, const std::string& config_hash) {
    if (j.at("format").get<int>() != 1) throw ConfigError("unsupported checkpoint format");
    if (j.at("config_hash").get<std::string>() != config_hash) {
      throw ConfigError("checkpoint was written for a different config");
    }
    const auto& params = j.at("parameters");
    for (auto* p : all_parameters()) {
      const auto& e = params.at(p->name);
      const auto rows = e.at("rows").template get<Eigen::Index>();
      const auto cols = e.at("cols").template get<Eigen::Index>();
      if (rows != p->value.rows() || cols != p->value.cols()) {
        throw DimensionError("checkpoint shape mismatch for " + p->name);
      }
      const auto data = e.at("data").template get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw DimensionError("checkpoint data length mismatch for " + p->name);
      }
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<T>(data[i]);
    }
  }

 private:
  ModelConfig cfg_;
  InputRepresentation<T> input_;
  Encoder<T> encoder_;
  Decoder<T> decoder_;
};

}  // namespace linkgae
