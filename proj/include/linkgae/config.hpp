#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkgae/errors.hpp"
#include "linkgae/metrics.hpp"
#include "linkgae/model.hpp"
#include "linkgae/trainer.hpp"

namespace linkgae {

enum class Precision { F32, F64 };

/// Everything needed to reproduce one training configuration.
struct RunConfig {
  std::string name = "custom";
  ModelConfig model;
  TrainConfig train;
  Precision precision = Precision::F32;
};

// ---------------------------------------------------------------------------
// Enum names used by JSON and --set

inline std::string to_string(InputMode m) {
  switch (m) {
    case InputMode::RawFeatures: return "raw";
    case InputMode::LearnableOrthogonal: return "orthogonal";
    case InputMode::FixedOrthogonal: return "fixed_orthogonal";
    case InputMode::AllOnes: return "ones";
    case InputMode::RandomUniform: return "random";
    case InputMode::RawPlusLearnable: return "raw+orthogonal";
  }
  return "?";
}

inline InputMode parse_input_mode(const std::string& s) {
  for (auto m : {InputMode::RawFeatures, InputMode::LearnableOrthogonal, InputMode::FixedOrthogonal,
                 InputMode::AllOnes, InputMode::RandomUniform, InputMode::RawPlusLearnable}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown input mode '" + s +
                    "' (raw|orthogonal|fixed_orthogonal|ones|random|raw+orthogonal)");
}

inline std::string to_string(ConvKind c) {
  switch (c) {
    case ConvKind::Gcn: return "gcn";
    case ConvKind::Sage: return "sage";
    case ConvKind::Gin: return "gin";
  }
  return "?";
}

inline ConvKind parse_conv(const std::string& s) {
  if (s == "gcn") return ConvKind::Gcn;
  if (s == "sage") return ConvKind::Sage;
  if (s == "gin") return ConvKind::Gin;
  if (s == "gat") throw ConfigError("conv 'gat' is not implemented (gcn|sage|gin)");
  throw ConfigError("unknown conv '" + s + "' (gcn|sage|gin)");
}

inline std::string to_string(DecoderKind d) { return d == DecoderKind::Dot ? "dot" : "mlp"; }

inline DecoderKind parse_decoder(const std::string& s) {
  if (s == "dot") return DecoderKind::Dot;
  if (s == "mlp") return DecoderKind::Mlp;
  throw ConfigError("unknown decoder '" + s + "' (dot|mlp)");
}

inline std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

// ---------------------------------------------------------------------------
// Presets

/// Shipped hyperparameters per dataset. Every preset trains up to 500 epochs
/// with 1:3 negative sampling.
inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  c.train.epochs = 500;
  c.train.neg_ratio = 3;
  c.model.encoder.conv = ConvKind::Gcn;
  c.model.encoder.linear = true;
  c.model.encoder.initial_residual = true;
  c.model.decoder.kind = DecoderKind::Mlp;
  c.model.decoder.initial_residual = true;

  struct Row {
    const char* name;
    double lr;
    int mpnn_layers, hidden_dim, batch_size;
    double dropout;
    bool mask_input, normalization;
    int mlp_layers;
    MetricSpec metric;
    InputMode input;
  };
  static const Row rows[] = {
      {"cora", 5e-3, 4, 1024, 2048, 0.6, true, true, 4, MetricSpec::hits(100), InputMode::RawFeatures},
      {"citeseer", 1e-3, 4, 1024, 4096, 0.6, true, true, 2, MetricSpec::hits(100), InputMode::RawFeatures},
      {"pubmed", 1e-3, 4, 512, 4096, 0.4, true, true, 2, MetricSpec::hits(100), InputMode::RawFeatures},
      {"ddi", 1e-3, 2, 1024, 8192, 0.6, true, false, 8, MetricSpec::hits(20), InputMode::LearnableOrthogonal},
      {"collab", 5e-4, 4, 512, 16384, 0.2, false, true, 5, MetricSpec::hits(50), InputMode::RawFeatures},
      {"ppa", 5e-4, 2, 512, 65536, 0.2, false, false, 5, MetricSpec::hits(100), InputMode::RawPlusLearnable},
      {"citation2", 5e-4, 3, 256, 65536, 0.2, false, true, 5, MetricSpec::mrr(), InputMode::RawPlusLearnable},
  };
  if (name == "custom") return c;
  for (const Row& r : rows) {
    if (name != r.name) continue;
    c.train.lr = r.lr;
    c.model.encoder.num_layers = r.mpnn_layers;
    c.model.encoder.hidden_dim = r.hidden_dim;
    c.train.batch_size = r.batch_size;
    c.model.decoder.dropout = r.dropout;
    c.train.mask_input = r.mask_input;
    c.model.encoder.normalize_output = r.normalization;
    c.model.decoder.mlp_layers = r.mlp_layers;
    c.train.metric = r.metric;
    c.model.input = r.input;
    return c;
  }
  throw ConfigError("unknown preset '" + name +
                    "' (cora|citeseer|pubmed|ddi|collab|ppa|citation2|custom)");
}

inline std::vector<std::string> preset_names() {
  return {"cora", "citeseer", "pubmed", "ddi", "collab", "ppa", "citation2", "custom"};
}

// ---------------------------------------------------------------------------
// Overrides

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  if (!parse_number(v, out)) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  if (!parse_number(v, out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

}  // namespace detail

/// Applies one `key=value` override. Keys: lr, epochs, batch_size, neg_ratio,
/// mask_input, eval_every, patience, metric, input, conv, mpnn_layers,
/// hidden_dim, linear, normalize, decoder, mlp_layers, dropout,
/// mpnn_residual, mlp_residual, residual (both), precision.
inline void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  auto& enc = c.model.encoder;
  auto& dec = c.model.decoder;
  auto& tr = c.train;
  if (key == "lr") tr.lr = parse_real(key, value);
  else if (key == "epochs") tr.epochs = parse_int(key, value);
  else if (key == "batch_size") tr.batch_size = parse_int(key, value);
  else if (key == "neg_ratio") tr.neg_ratio = parse_int(key, value);
  else if (key == "mask_input") tr.mask_input = parse_bool(key, value);
  else if (key == "eval_every") tr.eval_every = parse_int(key, value);
  else if (key == "patience") tr.patience = parse_int(key, value);
  else if (key == "metric") tr.metric = MetricSpec::parse(value);
  else if (key == "input") c.model.input = parse_input_mode(value);
  else if (key == "conv") enc.conv = parse_conv(value);
  else if (key == "mpnn_layers") enc.num_layers = parse_int(key, value);
  else if (key == "hidden_dim" || key == "dim") enc.hidden_dim = parse_int(key, value);
  else if (key == "linear") enc.linear = parse_bool(key, value);
  else if (key == "normalize") enc.normalize_output = parse_bool(key, value);
  else if (key == "mpnn_residual") enc.initial_residual = parse_bool(key, value);
  else if (key == "decoder") dec.kind = parse_decoder(value);
  else if (key == "mlp_layers") dec.mlp_layers = parse_int(key, value);
  else if (key == "dropout") dec.dropout = parse_real(key, value);
  else if (key == "mlp_residual") dec.initial_residual = parse_bool(key, value);
  else if (key == "residual") enc.initial_residual = dec.initial_residual = parse_bool(key, value);
  else if (key == "precision") {
    if (value == "f32") c.precision = Precision::F32;
    else if (value == "f64") c.precision = Precision::F64;
    else throw ConfigError("precision: expected f32 or f64, got '" + value + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Applies a comma-separated list of key=value pairs ("decoder=dot,input=raw").
inline void apply_overrides(RunConfig& c, const std::string& list) {
  std::size_t start = 0;
  while (start <= list.size()) {
    auto comma = list.find(',', start);
    std::string item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not key=value");
      apply_override(c, item.substr(0, eq), item.substr(eq + 1));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
}

inline void validate(const RunConfig& c) {
  c.train.validate();
  if (c.model.encoder.num_layers < 1) throw ConfigError("mpnn_layers must be >= 1");
  if (c.model.encoder.hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (c.model.decoder.kind == DecoderKind::Mlp && c.model.decoder.mlp_layers < 1) {
    throw ConfigError("mlp_layers must be >= 1 for the MLP decoder");
  }
  if (!(c.model.decoder.dropout >= 0.0 && c.model.decoder.dropout < 1.0)) {
    throw ConfigError("dropout must be in [0, 1)");
  }
}

// ---------------------------------------------------------------------------
// Serialization and hashing

/// Seed is excluded: one config is run under many seeds.
inline nlohmann::json to_json(const RunConfig& c) {
  const auto& e = c.model.encoder;
  const auto& d = c.model.decoder;
  const auto& t = c.train;
  return {
      {"name", c.name},
      {"precision", to_string(c.precision)},
      {"model",
       {{"input", to_string(c.model.input)},
        {"encoder",
         {{"conv", to_string(e.conv)},
          {"mpnn_layers", e.num_layers},
          {"hidden_dim", e.hidden_dim},
          {"linear", e.linear},
          {"initial_residual", e.initial_residual},
          {"normalize", e.normalize_output}}},
        {"decoder",
         {{"kind", to_string(d.kind)},
          {"mlp_layers", d.mlp_layers},
          {"initial_residual", d.initial_residual},
          {"dropout", d.dropout}}}}},
      {"train",
       {{"lr", t.lr},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"neg_ratio", t.neg_ratio},
        {"mask_input", t.mask_input},
        {"eval_every", t.eval_every},
        {"patience", t.patience},
        {"metric", t.metric.name()}}},
  };
}

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string version_string() {
#ifdef LINKGAE_VERSION
  return LINKGAE_VERSION;
#else
  return "0.1.0-unknown";
#endif
}

}  // namespace linkgae
