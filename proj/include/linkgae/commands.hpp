#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkgae/config.hpp"
#include "linkgae/dataset.hpp"
#include "linkgae/diagnostics.hpp"
#include "linkgae/experiment.hpp"
#include "linkgae/heuristics.hpp"

namespace linkgae {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

/// Options common to the dataset-driven subcommands.
struct CommonOptions {
  std::string dataset;
  std::string preset;  // empty: the dataset name if it is a preset, else custom
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int seeds = 1;
  std::filesystem::path out_dir = "runs";
};

/// Preset named by --preset, else by the dataset, else "custom"; then --set.
inline RunConfig resolve_config(const CommonOptions& o) {
  std::string name = o.preset;
  if (name.empty()) {
    const auto names = preset_names();
    const std::string slug = dataset_slug(o.dataset);
    name = std::find(names.begin(), names.end(), slug) != names.end() ? slug : "custom";
  }
  RunConfig cfg = preset(name);
  for (const auto& s : o.overrides) apply_overrides(cfg, s);
  validate(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// train

inline std::filesystem::path cmd_train(const CommonOptions& o, std::ostream& log = std::cerr) {
  const RunConfig cfg = resolve_config(o);
  const Dataset ds = load_dataset(o.dataset);
  const auto seeds = seed_list(o.seed, o.seeds);
  log << "train " << o.dataset << " preset=" << cfg.name << " hash=" << config_hash(cfg)
      << " seeds=" << seeds.size() << '\n';
  const auto runs = train_seeds(ds, cfg, seeds);
  for (const auto& r : runs) {
    log << "  seed " << r.seed << ": " << cfg.train.metric.name() << "=" << r.record.test_metric
        << " (best epoch " << r.record.best_epoch << ")\n";
  }
  const auto dir = write_run(o.out_dir, o.dataset, cfg, runs);
  const MeanStd agg = mean_std(test_metrics(runs));
  log << cfg.train.metric.name() << " " << agg.mean << " +/- " << agg.std << "  -> " << dir.string() << '\n';
  return dir;
}

// ---------------------------------------------------------------------------
// ablate / sweep

inline std::filesystem::path table_path(const CommonOptions& o, const std::string& stem) {
  const auto dir = o.out_dir / dataset_slug(o.dataset);
  std::filesystem::create_directories(dir);
  return dir / (stem + "-" + utc_timestamp() + ".csv");
}

inline std::vector<GridRow> cmd_ablate(const CommonOptions& o, const std::string& axis, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto variants = ablation_variants(cfg, axis);  // validates the axis before loading data
  const Dataset ds = load_dataset(o.dataset);
  const auto rows = run_grid(ds, variants, seed_list(o.seed, o.seeds));
  write_ablation_csv(out, rows);
  std::ofstream file(table_path(o, "ablate-" + axis), std::ios::binary);
  write_ablation_csv(file, rows);
  return rows;
}

inline std::vector<GridRow> cmd_sweep(const CommonOptions& o, const std::string& axis,
                                      const std::vector<int>& values, std::ostream& out) {
  if (values.empty()) throw UsageError("sweep needs at least one value");
  const RunConfig cfg = resolve_config(o);
  std::vector<Variant> variants;
  for (int v : values) variants.push_back({axis, std::to_string(v), sweep_variant(cfg, axis, v), {}});
  const Dataset ds = load_dataset(o.dataset);
  const auto rows = run_grid(ds, variants, seed_list(o.seed, o.seeds));
  write_sweep_csv(out, values, rows);
  std::ofstream file(table_path(o, "sweep-" + axis), std::ios::binary);
  write_sweep_csv(file, values, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// index / heuristic / split

inline nlohmann::json cmd_index(const CommonOptions& o) {
  const RunConfig cfg = resolve_config(o);
  const Dataset ds = load_dataset(o.dataset);
  const EdgeSplit split = dataset_split(ds, o.seed);
  const auto r = structure_feature_index(ds.graph, split, cfg.train.metric);
  return {{"dataset", o.dataset},
          {"metric", cfg.train.metric.name()},
          {"P_S", r.structure_perf},
          {"P_F", r.feature_perf},
          {"index", r.index},
          {"num_nodes", ds.graph.num_nodes()},
          {"avg_degree", ds.graph.average_degree()},
          {"has_features", ds.graph.has_features()},
          {"seed", o.seed}};
}

inline nlohmann::json metric_json(const MetricSpec& m, double value, const EdgeSplit& split, std::uint64_t seed) {
  std::size_t n_neg = split.test_neg.size();
  for (const auto& row : split.test_neg_per_source) n_neg += row.size();
  nlohmann::json k = nullptr;
  if (m.kind == MetricSpec::Kind::HitsAtK) k = m.k;
  return {{"metric", m.name()}, {"value", value}, {"K", k},
          {"n_pos", split.test_pos.size()}, {"n_neg", n_neg}, {"seed", seed}};
}

inline nlohmann::json cmd_heuristic(const CommonOptions& o, const std::string& which) {
  const Heuristic h = parse_heuristic(which);
  const RunConfig cfg = resolve_config(o);
  const Dataset ds = load_dataset(o.dataset);
  const EdgeSplit split = dataset_split(ds, o.seed);
  const double value = heuristic_eval(ds.graph, split, h, cfg.train.metric);
  auto j = metric_json(cfg.train.metric, value, split, o.seed);
  j["heuristic"] = to_string(h);
  j["dataset"] = o.dataset;
  return j;
}

inline std::filesystem::path cmd_split(const CommonOptions& o, std::optional<std::filesystem::path> out) {
  const Dataset ds = load_dataset(o.dataset);
  const EdgeSplit split = dataset_split(ds, o.seed);
  if (!out) {
    const auto dir = o.out_dir / dataset_slug(o.dataset);
    std::filesystem::create_directories(dir);
    out = dir / ("split-seed" + std::to_string(o.seed) + ".json");
  }
  save_split(split, *out);
  return *out;
}

// ---------------------------------------------------------------------------
// verify

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Largest deviation of the linear encoder from the dense (Ã^{2k}) oracle
/// over `graphs` random graphs with 2..max_n nodes and k in {1, 2, 3}.
inline double cn_equivalence_suite(int graphs = 50, int max_n = 20, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, max_n);
  std::uniform_real_distribution<double> density(0.05, 0.6);
  double worst = 0.0;
  for (int i = 0; i < graphs; ++i) {
    const Graph g = detail::random_graph(size(rng), density(rng), rng());
    for (int k = 1; k <= 3; ++k) worst = std::max(worst, verify_cn_equivalence(g, k, -1, rng()).max_deviation);
  }
  return worst;
}

inline std::vector<CheckLine> run_verify(std::uint64_t seed = 0) {
  std::vector<CheckLine> lines;
  auto fmt = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return std::string(buf);
  };
  for (const auto& r : op_gradient_checks(7 + seed)) {
    lines.push_back({"grad/" + r.name, r.passed(), "max rel error " + fmt(r.max_rel_error)});
  }
  for (const auto& r : model_gradient_checks(3 + seed)) {
    lines.push_back({"grad/" + r.name, r.passed(), "max rel error " + fmt(r.max_rel_error)});
  }

  const double dev = cn_equivalence_suite(50, 20, 11 + seed);
  lines.push_back({"cn_equivalence/random_graphs", dev < 1e-9, "max deviation " + fmt(dev)});
  {
    const std::vector<Edge> p3{{0, 1}, {1, 2}};
    const auto r = verify_cn_equivalence(Graph(3, p3), 1);
    const bool ok = r.max_deviation < 1e-9 && std::abs(r.logits(0, 2) - 1.0 / 6.0) < 1e-9;
    lines.push_back({"cn_equivalence/path3", ok, "dot(0,2) " + fmt(r.logits(0, 2))});
  }

  {
    const auto s = orthogonality_stats(orthogonal_table(64, 128, seed));
    lines.push_back({"orthogonality/exact", s.mean_abs_cos < 1e-6, "mean |cos| " + fmt(s.mean_abs_cos)});
    // Beyond n = d rows cannot all be orthogonal; expect |cos| near that of random directions.
    const auto t = orthogonality_stats(orthogonal_table(3000, 256, seed), seed);
    const double expected = std::sqrt(2.0 / (3.14159265358979 * 256));
    lines.push_back({"orthogonality/overcomplete", std::abs(t.mean_abs_cos - expected) < 0.2 * expected,
                     "mean |cos| " + fmt(t.mean_abs_cos) + " vs " + fmt(expected)});
  }
  return lines;
}

inline int cmd_verify(std::ostream& out, std::uint64_t seed = 0) {
  bool ok = true;
  for (const auto& l : run_verify(seed)) {
    out << (l.passed ? "PASS " : "FAIL ") << l.name << "  " << l.detail << '\n';
    ok = ok && l.passed;
  }
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// bench

struct BenchPoint {
  int dim = 0;
  int batch_size = 0;
  double seconds = 0.0;
};

/// Times full training steps across hidden dims. The default graph is tiny
/// so the O(B d^2) decoder term dominates.
inline std::vector<BenchPoint> run_bench(const CommonOptions& o, const std::vector<int>& dims,
                                         const std::vector<int>& batch_sizes) {
  if (dims.empty() || batch_sizes.empty()) throw UsageError("bench needs at least one dim and batch size");
  const RunConfig base = resolve_config(o);
  const Dataset ds = load_dataset(o.dataset.empty() ? "synthetic:geometric:64:6" : o.dataset);
  const EdgeSplit split = dataset_split(ds, o.seed);
  const Graph train = ds.graph.with_edges(split.train_pos);
  std::vector<BenchPoint> out;
  for (int b : batch_sizes) {
    for (int d : dims) {
      RunConfig cfg = base;
      cfg.model.encoder.hidden_dim = d;
      cfg.train.batch_size = b;
      cfg.train.seed = o.seed;
      validate(cfg);
      double s = 0.0;
      if (cfg.precision == Precision::F32) {
        GaeModel<float> model(train, cfg.model, o.seed);
        s = bench_batch(model, train, split.train_pos, b, cfg.train);
      } else {
        GaeModel<double> model(train, cfg.model, o.seed);
        s = bench_batch(model, train, split.train_pos, b, cfg.train);
      }
      out.push_back({d, b, s});
    }
  }
  return out;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchPoint>& points) {
  CsvWriter csv(out);
  csv.row("hidden_dim", "batch_size", "seconds_per_batch");
  for (const auto& p : points) csv.row(p.dim, p.batch_size, p.seconds);
}

}  // namespace linkgae
