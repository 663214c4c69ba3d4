#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "linkgae/commands.hpp"
#include "test_util.hpp"

using namespace linkgae;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LINKGAE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Presets, Table) {
  struct Expect {
    const char* name;
    double lr;
    int layers, dim, batch;
    double dropout;
    bool mask, norm;
    int mlp;
    const char* metric;
    InputMode input;
  };
  const Expect rows[] = {
      {"cora", 5e-3, 4, 1024, 2048, 0.6, true, true, 4, "hits@100", InputMode::RawFeatures},
      {"citeseer", 1e-3, 4, 1024, 4096, 0.6, true, true, 2, "hits@100", InputMode::RawFeatures},
      {"pubmed", 1e-3, 4, 512, 4096, 0.4, true, true, 2, "hits@100", InputMode::RawFeatures},
      {"ddi", 1e-3, 2, 1024, 8192, 0.6, true, false, 8, "hits@20", InputMode::LearnableOrthogonal},
      {"collab", 5e-4, 4, 512, 16384, 0.2, false, true, 5, "hits@50", InputMode::RawFeatures},
      {"ppa", 5e-4, 2, 512, 65536, 0.2, false, false, 5, "hits@100", InputMode::RawPlusLearnable},
      {"citation2", 5e-4, 3, 256, 65536, 0.2, false, true, 5, "mrr", InputMode::RawPlusLearnable},
  };
  for (const Expect& e : rows) {
    SCOPED_TRACE(e.name);
    RunConfig c = preset(e.name);
    EXPECT_EQ(c.train.lr, e.lr);
    EXPECT_EQ(c.model.encoder.num_layers, e.layers);
    EXPECT_EQ(c.model.encoder.hidden_dim, e.dim);
    EXPECT_EQ(c.train.batch_size, e.batch);
    EXPECT_EQ(c.model.decoder.dropout, e.dropout);
    EXPECT_EQ(c.train.mask_input, e.mask);
    EXPECT_EQ(c.model.encoder.normalize_output, e.norm);
    EXPECT_EQ(c.model.decoder.mlp_layers, e.mlp);
    EXPECT_EQ(c.train.metric.name(), e.metric);
    EXPECT_EQ(c.model.input, e.input);
    EXPECT_EQ(c.train.epochs, 500);
    EXPECT_EQ(c.train.neg_ratio, 3);
    EXPECT_EQ(c.model.encoder.conv, ConvKind::Gcn);
    EXPECT_TRUE(c.model.encoder.linear);
    EXPECT_TRUE(c.model.encoder.initial_residual);
    EXPECT_TRUE(c.model.decoder.initial_residual);
    EXPECT_NO_THROW(validate(c));
  }
  EXPECT_THROW(preset("ogbl-foo"), ConfigError);
  EXPECT_EQ(preset_names().size(), 8u);
}

TEST(Overrides, Apply) {
  RunConfig c = preset("cora");
  apply_overrides(c, "lr=0.01,input=ones,conv=sage,residual=false,decoder=dot,precision=f64,metric=mrr");
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.model.input, InputMode::AllOnes);
  EXPECT_EQ(c.model.encoder.conv, ConvKind::Sage);
  EXPECT_FALSE(c.model.encoder.initial_residual);
  EXPECT_FALSE(c.model.decoder.initial_residual);
  EXPECT_EQ(c.model.decoder.kind, DecoderKind::Dot);
  EXPECT_EQ(c.precision, Precision::F64);
  EXPECT_EQ(c.train.metric, MetricSpec::mrr());
  apply_overrides(c, "");
  apply_overrides(c, "dim=32,");
  EXPECT_EQ(c.model.encoder.hidden_dim, 32);
}

TEST(Overrides, Errors) {
  RunConfig c;
  EXPECT_THROW(apply_overrides(c, "nope=1"), ConfigError);
  EXPECT_THROW(apply_overrides(c, "lr"), ConfigError);
  EXPECT_THROW(apply_overrides(c, "epochs=ten"), ConfigError);
  EXPECT_THROW(apply_overrides(c, "linear=maybe"), ConfigError);
  EXPECT_THROW(apply_overrides(c, "conv=gat"), ConfigError);
  EXPECT_THROW(apply_overrides(c, "precision=f16"), ConfigError);
  apply_overrides(c, "dropout=1.5");
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(ConfigHash, StableAndSensitive) {
  const RunConfig a = preset("ddi");
  EXPECT_EQ(config_hash(a), config_hash(preset("ddi")));
  EXPECT_EQ(config_hash(a).size(), 16u);
  RunConfig b = a;
  b.train.seed = 99;  // not part of the config identity
  EXPECT_EQ(config_hash(a), config_hash(b));
  apply_overrides(b, "lr=0.002");
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(preset("cora")), config_hash(preset("citeseer")));
}

TEST(Csv, Escaping) {
  EXPECT_EQ(CsvWriter::escape("plain"), "plain");
  EXPECT_EQ(CsvWriter::escape("a,b"), "\"a,b\"");
  EXPECT_EQ(CsvWriter::escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(CsvWriter::escape("x\ny"), "\"x\ny\"");
  std::ostringstream out;
  CsvWriter csv(out);
  csv.row("a", 1, 0.5, std::nan(""));
  EXPECT_EQ(out.str(), "a,1,0.5,\r\n");
}

TEST(MeanStd, Population) {
  auto s = mean_std({1.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
  EXPECT_DOUBLE_EQ(mean_std({}).mean, 0.0);
}

TEST(Ablation, VariantShapes) {
  const RunConfig base = preset("ddi");
  auto input = ablation_variants(base, "input");
  ASSERT_EQ(input.size(), 4u);
  EXPECT_EQ(input[0].name, "baseline");
  EXPECT_EQ(input[1].config.model.input, InputMode::FixedOrthogonal);
  EXPECT_EQ(input[2].config.model.input, InputMode::RandomUniform);
  EXPECT_EQ(input[3].config.model.input, InputMode::AllOnes);

  auto conv = ablation_variants(base, "conv");
  ASSERT_EQ(conv.size(), 4u);
  EXPECT_EQ(conv[3].name, "gat");
  EXPECT_FALSE(conv[3].skip_reason.empty());

  auto res = ablation_variants(base, "residual");
  ASSERT_EQ(res.size(), 4u);
  EXPECT_FALSE(res[3].config.model.encoder.initial_residual);
  EXPECT_FALSE(res[3].config.model.decoder.initial_residual);

  auto lin = ablation_variants(base, "linearity");
  ASSERT_EQ(lin.size(), 2u);
  EXPECT_FALSE(lin[1].config.model.encoder.linear);

  EXPECT_THROW(ablation_variants(base, "depth"), UsageError);
  EXPECT_THROW(sweep_variant(base, "lr", 3), UsageError);
  EXPECT_EQ(sweep_variant(base, "mlp_layers", 3).model.decoder.mlp_layers, 3);
}

TEST(Ablation, SkippedRowIsWrittenWithReason) {
  CommonOptions o;
  o.dataset = "synthetic:geometric:40:5";
  o.overrides = {"epochs=1,hidden_dim=4,mpnn_layers=1,mlp_layers=1,metric=hits@5,batch_size=64"};
  TempDir tmp;
  o.out_dir = tmp.path;
  std::ostringstream out;
  auto rows = cmd_ablate(o, "conv", out);
  ASSERT_EQ(rows.size(), 4u);
  const std::string csv = out.str();
  EXPECT_NE(csv.find("axis,variant,metric,mean,std,per_seed,status"), std::string::npos);
  EXPECT_NE(csv.find("gat"), std::string::npos);
  EXPECT_NE(csv.find("skipped: attention convolution is not implemented"), std::string::npos);
}

TEST(Dataset, DirectoryWithGlobalSplit) {
  TempDir tmp;
  tmp.write("d/edges.txt", "0 1\n1 2\n2 3\n3 0\n0 2\n");
  tmp.write("d/features.csv", "1,0\n0,1\n1,1\n0,0\n");
  tmp.write("d/split/train.txt", "0 1\n1 2\n2 3\n");
  tmp.write("d/split/valid.txt", "3 0\n");
  tmp.write("d/split/test.txt", "0 2\n");
  tmp.write("d/split/valid_neg.txt", "1 3\n");
  tmp.write("d/split/test_neg.txt", "1 3\n");
  Dataset ds = load_dataset(tmp.path / "d");
  EXPECT_EQ(ds.name, "d");
  EXPECT_EQ(ds.graph.num_nodes(), 4);
  EXPECT_TRUE(ds.graph.has_features());
  ASSERT_TRUE(ds.official_split.has_value());
  EdgeSplit s = dataset_split(ds, 5);
  EXPECT_EQ(s.train_pos.size(), 3u);
  EXPECT_EQ(s.test_neg.size(), 1u);
  EXPECT_EQ(s.seed, 5u);
}

TEST(Dataset, SplitOnlyDirectoryWithPerSourceNegatives) {
  TempDir tmp;
  tmp.write("c/split/train.txt", "0 1\n1 2\n2 3\n3 4\n");
  tmp.write("c/split/valid.txt", "4 0\n");
  tmp.write("c/split/test.txt", "0 2\n1 3\n");
  tmp.write("c/split/valid_neg_per_source.txt", "2 3\n");
  tmp.write("c/split/test_neg_per_source.txt", "3 4\n4\n");
  Dataset ds = load_dataset_dir(tmp.path / "c");
  EXPECT_EQ(ds.graph.num_nodes(), 5);
  EXPECT_EQ(ds.graph.num_edges(), 7u);
  const auto& s = *ds.official_split;
  ASSERT_EQ(s.test_neg_per_source.size(), 2u);
  EXPECT_EQ(s.test_neg_per_source[1], std::vector<NodeId>{4});
  EXPECT_TRUE(s.test_neg.empty());
}

TEST(Dataset, MalformedSplitsAreRejected) {
  TempDir tmp;
  tmp.write("c/split/train.txt", "0 1\n");
  tmp.write("c/split/valid.txt", "1 2\n");
  tmp.write("c/split/test.txt", "0 2\n");
  tmp.write("c/split/valid_neg_per_source.txt", "0\n");
  tmp.write("c/split/test_neg_per_source.txt", "0\n1\n");  // one row too many
  EXPECT_THROW(load_dataset_dir(tmp.path / "c"), DimensionError);
  tmp.write("c/split/test_neg_per_source.txt", "9\n");
  EXPECT_THROW(load_dataset_dir(tmp.path / "c"), DimensionError);
  tmp.write("e/edges.txt", "0 1\n");
  tmp.write("e/split/train.txt", "0 7\n");
  tmp.write("e/split/valid.txt", "");
  tmp.write("e/split/test.txt", "");
  tmp.write("e/split/valid_neg.txt", "");
  tmp.write("e/split/test_neg.txt", "");
  EXPECT_THROW(load_dataset_dir(tmp.path / "e"), DimensionError);
}

TEST(Dataset, Unavailable) {
  EXPECT_THROW(load_dataset("/nonexistent/linkgae/dir"), DatasetUnavailable);
  ::setenv("LINKGAE_DATA_DIR", "/nonexistent/linkgae", 1);
  EXPECT_THROW(load_dataset("cora"), DatasetUnavailable);
  ::unsetenv("LINKGAE_DATA_DIR");
  EXPECT_THROW(load_dataset("synthetic:lattice"), ConfigError);
  EXPECT_THROW(load_dataset("synthetic:geometric:many"), ConfigError);
}

TEST(Dataset, SyntheticSpecs) {
  Dataset g = load_dataset("synthetic:geometric:300:8", 1);
  EXPECT_EQ(g.graph.num_nodes(), 300);
  EXPECT_FALSE(g.graph.has_features());
  EXPECT_NEAR(g.graph.average_degree(), 8.0, 1.5);
  Dataset f = load_dataset("synthetic:features:200");
  EXPECT_TRUE(f.graph.has_features());
  EXPECT_EQ(load_dataset("synthetic:geometric:300:8", 1).graph.edges().size(), g.graph.edges().size());
}

TEST(ResolveConfig, DatasetNameSelectsPreset) {
  CommonOptions o;
  o.dataset = "data/ddi";
  EXPECT_EQ(resolve_config(o).name, "ddi");
  o.dataset = "synthetic:geometric";
  EXPECT_EQ(resolve_config(o).name, "custom");
  o.preset = "collab";
  o.overrides = {"epochs=3"};
  auto c = resolve_config(o);
  EXPECT_EQ(c.name, "collab");
  EXPECT_EQ(c.train.epochs, 3);
}

TEST(Train, WritesRunDirectory) {
  TempDir tmp;
  CommonOptions o;
  o.dataset = "synthetic:geometric:80:6";
  o.overrides = {"epochs=4,eval_every=2,hidden_dim=8,mpnn_layers=1,mlp_layers=1,batch_size=64,metric=hits@10"};
  o.seeds = 2;
  o.seed = 3;
  o.out_dir = tmp.path;
  std::ostringstream log;
  const fs::path dir = cmd_train(o, log);
  ASSERT_TRUE(fs::exists(dir / "config.json"));
  ASSERT_TRUE(fs::exists(dir / "epochs.csv"));
  ASSERT_TRUE(fs::exists(dir / "summary.json"));
  auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["metric"], "hits@10");
  EXPECT_EQ(summary["seeds"], (std::vector<int>{3, 4}));
  EXPECT_EQ(summary["runs"].size(), 2u);
  EXPECT_EQ(summary["config_hash"], config_hash(resolve_config(o)));
  const std::string epochs = slurp(dir / "epochs.csv");
  EXPECT_EQ(epochs.rfind("seed,epoch,loss,valid_metric,seconds\r\n", 0), 0u);
  EXPECT_EQ(std::count(epochs.begin(), epochs.end(), '\n'), 1 + 2 * 4);
  // A second run with the same config never overwrites the first.
  EXPECT_NE(cmd_train(o, log), dir);
}

TEST(Heuristic, JsonShape) {
  CommonOptions o;
  o.dataset = "synthetic:geometric:200:8";
  o.overrides = {"metric=hits@20"};
  auto j = cmd_heuristic(o, "aa");
  EXPECT_EQ(j["metric"], "hits@20");
  EXPECT_EQ(j["K"], 20);
  EXPECT_GT(j["n_pos"].get<int>(), 0);
  EXPECT_GE(j["value"].get<double>(), 0.0);
  EXPECT_LE(j["value"].get<double>(), 1.0);
  EXPECT_THROW(cmd_heuristic(o, "katz"), ConfigError);
}

TEST(Verify, AllChecksPass) {
  std::ostringstream out;
  EXPECT_EQ(cmd_verify(out), kExitOk) << out.str();
  EXPECT_EQ(out.str().find("FAIL"), std::string::npos);
}

TEST(CliBinary, ExitCodes) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("verify"), 0);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
  EXPECT_EQ(run_cli("train --dataset /nonexistent/linkgae"), 2);
  EXPECT_EQ(run_cli("ablate --dataset synthetic:geometric:40 --axis depth"), 2);
  EXPECT_EQ(run_cli("train --dataset synthetic:geometric:40 --set lr=abc"), 2);
}
