// linkgae: train, ablate, sweep, index, heuristic, verify, bench, split.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "linkgae/commands.hpp"

namespace {

using namespace linkgae;

void add_common(CLI::App* cmd, CommonOptions& o, bool dataset_required = true) {
  auto* d = cmd->add_option("--dataset,-d", o.dataset,
                            "dataset name under $LINKGAE_DATA_DIR, a directory, or synthetic:geometric[:n[:deg]]");
  if (dataset_required) d->required();
  cmd->add_option("--preset,-p", o.preset, "cora|citeseer|pubmed|ddi|collab|ppa|citation2|custom");
  cmd->add_option("--set", o.overrides, "config overrides key=value[,key=value...]");
  cmd->add_option("--seed", o.seed, "first seed")->capture_default_str();
  cmd->add_option("--out-dir", o.out_dir, "output root")->capture_default_str();
}

void add_seeds(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--seeds", o.seeds, "number of consecutive seeds")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Graph autoencoder link prediction"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  CommonOptions o;
  std::string axis, which;
  std::vector<int> values, dims{128, 256, 512, 1024}, batches{256};
  std::optional<std::string> split_out;

  auto* train = app.add_subcommand("train", "train over seeds and write runs/<dataset>/<stamp>-<hash>/");
  add_common(train, o);
  add_seeds(train, o);

  auto* ablate = app.add_subcommand("ablate", "run one ablation axis; CSV on stdout");
  add_common(ablate, o);
  add_seeds(ablate, o);
  ablate->add_option("--axis", axis, "input|conv|residual|linearity")->required();

  auto* sweep = app.add_subcommand("sweep", "sweep one size axis; CSV (value,mean,std) on stdout");
  add_common(sweep, o);
  add_seeds(sweep, o);
  sweep->add_option("--axis", axis, "mpnn_layers|mlp_layers|hidden_dim")->required();
  sweep->add_option("--values", values, "values to try")->delimiter(',')->required();

  auto* index = app.add_subcommand("index", "structure-to-feature dominance report (JSON)");
  add_common(index, o);

  auto* heuristic = app.add_subcommand("heuristic", "score the test split with a heuristic (JSON)");
  add_common(heuristic, o);
  heuristic->add_option("--which", which, "cn|aa|ra|cos")->required();

  auto* verify = app.add_subcommand("verify", "gradient, common-neighbor and orthogonality checks");
  add_common(verify, o, false);

  auto* bench = app.add_subcommand("bench", "time training steps; CSV on stdout");
  add_common(bench, o, false);
  bench->add_option("--dims", dims, "hidden dims")->delimiter(',')->capture_default_str();
  bench->add_option("--batch-sizes", batches, "batch sizes")->delimiter(',')->capture_default_str();

  auto* split = app.add_subcommand("split", "write the split for --seed as JSON");
  add_common(split, o);
  split->add_option("--out,-o", split_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      std::cout << cmd_train(o).string() << '\n';
    } else if (*ablate) {
      cmd_ablate(o, axis, std::cout);
    } else if (*sweep) {
      cmd_sweep(o, axis, values, std::cout);
    } else if (*index) {
      std::cout << cmd_index(o).dump(2) << '\n';
    } else if (*heuristic) {
      std::cout << cmd_heuristic(o, which).dump(2) << '\n';
    } else if (*verify) {
      return cmd_verify(std::cout, o.seed);
    } else if (*bench) {
      const auto points = run_bench(o, dims, batches);
      write_bench_csv(std::cout, points);
      if (dims.size() >= 2) {
        for (int b : batches) {
          std::vector<double> x, y;
          for (const auto& p : points) {
            if (p.batch_size != b) continue;
            x.push_back(p.dim);
            y.push_back(p.seconds);
          }
          std::cerr << "batch " << b << ": log-log slope vs hidden_dim " << log_log_slope(x, y) << '\n';
        }
      }
    } else if (*split) {
      std::cout << cmd_split(o, split_out ? std::optional<std::filesystem::path>(*split_out) : std::nullopt).string()
                << '\n';
    }
  } catch (const std::exception& e) {
    // Bad presets, overrides, missing or malformed files.
    std::cerr << "linkgae: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}
