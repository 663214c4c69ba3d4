#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "linkgae/config.hpp"
#include "linkgae/dataset.hpp"
#include "linkgae/model.hpp"
#include "linkgae/trainer.hpp"

namespace linkgae {

// ---------------------------------------------------------------------------
// CSV

/// RFC 4180 writer: CRLF line ends, fields quoted only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((write_field(cell(fields), first)), ...);
    out_ << "\r\n";
  }

  void row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) write_field(f, first);
    out_ << "\r\n";
  }

  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double x) {
    if (std::isnan(x)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
  }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I x) { return std::to_string(x); }

 private:
  void write_field(const std::string& s, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << escape(s);
  }
  std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Aggregation

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation.
inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Runs

/// Keeps large temporaries on the heap instead of a fresh mmap per matrix.
/// Training allocates many n x d blocks per step and the default glibc
/// thresholds turn each one into page faults.
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

/// Caps worker threads. LINKGAE_THREADS unset or invalid means 1.
inline int thread_budget() {
  if (const char* env = std::getenv("LINKGAE_THREADS"); env && *env) {
    int n = 0;
    if (detail::parse_number(std::string_view(env), n) && n > 0) return n;
  }
  return 1;
}

/// Runs fn(i) for i in [0, count) on up to thread_budget() workers. The first
/// exception is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(thread_budget()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct SeedRun {
  std::uint64_t seed = 0;
  RunRecord record;
};

template <typename T>
RunRecord train_seed_typed(const Dataset& ds, const RunConfig& cfg, std::uint64_t seed) {
  const EdgeSplit split = dataset_split(ds, seed);
  const Graph train_graph = ds.graph.with_edges(split.train_pos);
  GaeModel<T> model(train_graph, cfg.model, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  Trainer<T> trainer(model, train_graph, tc);
  return trainer.fit(split);
}

/// One full fit on the split for `seed`. The same seed drives the split, the
/// initialization, batching, negatives and dropout.
inline RunRecord train_seed(const Dataset& ds, const RunConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  return cfg.precision == Precision::F32 ? train_seed_typed<float>(ds, cfg, seed)
                                         : train_seed_typed<double>(ds, cfg, seed);
}

inline std::vector<std::uint64_t> seed_list(std::uint64_t first, int count) {
  if (count < 1) throw ConfigError("seeds must be >= 1");
  std::vector<std::uint64_t> out;
  for (int i = 0; i < count; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
  return out;
}

inline std::vector<SeedRun> train_seeds(const Dataset& ds, const RunConfig& cfg,
                                        const std::vector<std::uint64_t>& seeds) {
  validate(cfg);
  std::vector<SeedRun> runs(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    runs[i].seed = seeds[i];
    runs[i].record = train_seed(ds, cfg, seeds[i]);
  });
  return runs;
}

inline std::vector<double> test_metrics(const std::vector<SeedRun>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.record.test_metric);
  return out;
}

// ---------------------------------------------------------------------------
// Run directory

inline void write_epochs_csv(std::ostream& out, const std::vector<SeedRun>& runs) {
  CsvWriter csv(out);
  csv.row("seed", "epoch", "loss", "valid_metric", "seconds");
  for (const auto& r : runs) {
    for (const auto& e : r.record.epochs) {
      csv.row(r.seed, e.epoch, e.loss, e.valid_metric ? *e.valid_metric : std::nan(""), e.seconds);
    }
  }
}

inline nlohmann::json summary_json(const std::string& dataset, const RunConfig& cfg,
                                   const std::vector<SeedRun>& runs) {
  nlohmann::json per_seed = nlohmann::json::array();
  std::vector<std::uint64_t> seeds;
  for (const auto& r : runs) {
    seeds.push_back(r.seed);
    per_seed.push_back({{"seed", r.seed},
                        {"best_epoch", r.record.best_epoch},
                        {"best_valid", r.record.best_valid},
                        {"test_metric", r.record.test_metric},
                        {"epochs_run", r.record.epochs.size()},
                        {"early_stopped", r.record.early_stopped}});
  }
  const MeanStd agg = mean_std(test_metrics(runs));
  return {{"dataset", dataset},
          {"metric", cfg.train.metric.name()},
          {"mean", agg.mean},
          {"std", agg.std},
          {"seeds", seeds},
          {"runs", per_seed},
          {"config_hash", config_hash(cfg)},
          {"config", to_json(cfg)},
          {"version", version_string()}};
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

/// Dataset names may be paths or "synthetic:..." specs; keep one path segment.
inline std::string dataset_slug(const std::string& dataset) {
  std::string base = std::filesystem::path(dataset).filename().string();
  if (base.empty()) base = dataset;
  for (char& c : base) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return base;
}

/// Creates out_root/<dataset>/<timestamp>-<hash>[-k]/ and returns it.
inline std::filesystem::path make_run_dir(const std::filesystem::path& out_root,
                                          const std::string& dataset, const std::string& hash) {
  namespace fs = std::filesystem;
  const fs::path parent = out_root / dataset_slug(dataset);
  fs::create_directories(parent);
  const std::string stem = utc_timestamp() + "-" + hash;
  fs::path dir = parent / stem;
  for (int k = 1; fs::exists(dir); ++k) dir = parent / (stem + "-" + std::to_string(k));
  fs::create_directory(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

/// Writes config.json, epochs.csv and summary.json; returns the run directory.
inline std::filesystem::path write_run(const std::filesystem::path& out_root, const std::string& dataset,
                                       const RunConfig& cfg, const std::vector<SeedRun>& runs) {
  const auto dir = make_run_dir(out_root, dataset, config_hash(cfg));
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  {
    std::ofstream out(dir / "epochs.csv", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "epochs.csv").string());
    write_epochs_csv(out, runs);
  }
  write_text(dir / "summary.json", summary_json(dataset, cfg, runs).dump(2) + "\n");
  return dir;
}

// ---------------------------------------------------------------------------
// Ablation and sweep grids

struct Variant {
  std::string axis;
  std::string name;
  RunConfig config;
  /// Empty when runnable; otherwise why the row has no numbers.
  std::string skip_reason;
};

inline std::vector<std::string> ablation_axes() { return {"input", "conv", "residual", "linearity"}; }

/// Baseline row followed by the axis's variants.
inline std::vector<Variant> ablation_variants(const RunConfig& base, const std::string& axis) {
  std::vector<Variant> out{{axis, "baseline", base, {}}};
  auto add = [&](std::string name, auto&& tweak) {
    RunConfig c = base;
    tweak(c);
    out.push_back({axis, std::move(name), c, {}});
  };
  if (axis == "input") {
    add("fixed_orthogonal", [](RunConfig& c) { c.model.input = InputMode::FixedOrthogonal; });
    add("random", [](RunConfig& c) { c.model.input = InputMode::RandomUniform; });
    add("ones", [](RunConfig& c) { c.model.input = InputMode::AllOnes; });
  } else if (axis == "conv") {
    add("sage", [](RunConfig& c) { c.model.encoder.conv = ConvKind::Sage; });
    add("gin", [](RunConfig& c) { c.model.encoder.conv = ConvKind::Gin; });
    out.push_back({axis, "gat", base, "attention convolution is not implemented"});
  } else if (axis == "residual") {
    add("no_mpnn_residual", [](RunConfig& c) { c.model.encoder.initial_residual = false; });
    add("no_mlp_residual", [](RunConfig& c) { c.model.decoder.initial_residual = false; });
    add("no_residual_both", [](RunConfig& c) {
      c.model.encoder.initial_residual = false;
      c.model.decoder.initial_residual = false;
    });
  } else if (axis == "linearity") {
    add("nonlinear", [](RunConfig& c) { c.model.encoder.linear = false; });
  } else {
    throw UsageError("unknown ablation axis '" + axis + "' (input|conv|residual|linearity)");
  }
  return out;
}

inline std::vector<std::string> sweep_axes() { return {"mpnn_layers", "mlp_layers", "hidden_dim"}; }

inline RunConfig sweep_variant(const RunConfig& base, const std::string& axis, int value) {
  const auto axes = sweep_axes();
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    throw UsageError("unknown sweep axis '" + axis + "' (mpnn_layers|mlp_layers|hidden_dim)");
  }
  RunConfig c = base;
  apply_override(c, axis, std::to_string(value));
  return c;
}

struct GridRow {
  Variant variant;
  std::vector<double> values;  // test metric per seed
  MeanStd stats;
};

/// Trains every runnable variant over `seeds`.
inline std::vector<GridRow> run_grid(const Dataset& ds, const std::vector<Variant>& variants,
                                     const std::vector<std::uint64_t>& seeds) {
  std::vector<GridRow> rows;
  for (const auto& v : variants) {
    GridRow row{v, {}, {}};
    if (v.skip_reason.empty()) {
      row.values = test_metrics(train_seeds(ds, v.config, seeds));
      row.stats = mean_std(row.values);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_ablation_csv(std::ostream& out, const std::vector<GridRow>& rows) {
  CsvWriter csv(out);
  csv.row("axis", "variant", "metric", "mean", "std", "per_seed", "status");
  for (const auto& r : rows) {
    if (!r.variant.skip_reason.empty()) {
      csv.row(r.variant.axis, r.variant.name, r.variant.config.train.metric.name(), "", "", "",
              "skipped: " + r.variant.skip_reason);
      continue;
    }
    std::string per_seed;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (i) per_seed += ';';
      per_seed += CsvWriter::cell(r.values[i]);
    }
    csv.row(r.variant.axis, r.variant.name, r.variant.config.train.metric.name(), r.stats.mean,
            r.stats.std, per_seed, "ok");
  }
}

inline void write_sweep_csv(std::ostream& out, const std::vector<int>& values,
                            const std::vector<GridRow>& rows) {
  CsvWriter csv(out);
  csv.row("value", "mean", "std");
  for (std::size_t i = 0; i < rows.size(); ++i) csv.row(values[i], rows[i].stats.mean, rows[i].stats.std);
}

}  // namespace linkgae
