#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "linkgae/diagnostics.hpp"
#include "linkgae/model.hpp"

using namespace linkgae;

namespace {

Graph path3() { return Graph(3, std::vector<Edge>{{0, 1}, {1, 2}}); }

EncoderConfig gcn(int layers, int d, bool residual) {
  EncoderConfig c;
  c.conv = ConvKind::Gcn;
  c.num_layers = layers;
  c.hidden_dim = d;
  c.initial_residual = residual;
  return c;
}

Matrix<double> encode(Encoder<double>& enc, const Graph& g, const Matrix<double>& x) {
  GraphOperators<double> ops(g, enc.config().conv);
  ad::Tape<double> t;
  return enc.forward(t, ops, t.constant(x)).value();
}

}  // namespace

TEST(OrthogonalInit, ExactWhenNarrow) {
  Matrix<double> x = orthogonal_table(4, 8, 3);
  EXPECT_LT((x * x.transpose() - Matrix<double>::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(OrthogonalInit, UnitRowsWhenWide) {
  for (auto [n, d] : {std::pair{300, 32}, std::pair{500, 64}}) {
    Matrix<double> x = orthogonal_table(n, d, 1);
    for (Eigen::Index i = 0; i < n; ++i) EXPECT_NEAR(x.row(i).norm(), 1.0, 1e-6);
    EXPECT_LE(orthogonality_stats(x).mean_abs_cos, 2.0 / std::sqrt(static_cast<double>(d)));
  }
}

TEST(OrthogonalInit, DdiScaleMeanCosine) {
  Matrix<double> x = orthogonal_table(4267, 1024, 0);
  auto s = orthogonality_stats(x, 0, 200'000);
  EXPECT_NEAR(s.mean_abs_cos, 0.03, 0.01);
}

TEST(OrthogonalInit, SeededAndDeterministic) {
  EXPECT_EQ(orthogonal_table(10, 16, 5), orthogonal_table(10, 16, 5));
  EXPECT_NE(orthogonal_table(10, 16, 5), orthogonal_table(10, 16, 6));
}

TEST(BuildInput, Modes) {
  Graph g = detail::random_graph(6, 0.4, 1);
  auto ones = build_input<double>(g, InputMode::AllOnes, 3, 0);
  EXPECT_EQ(ones.table().value, Matrix<double>::Ones(6, 3));
  auto rnd = build_input<double>(g, InputMode::RandomUniform, 16, 0);
  EXPECT_LE(rnd.table().value.cwiseAbs().maxCoeff(), 1.0);
  auto fixed = build_input<double>(g, InputMode::FixedOrthogonal, 8, 0);
  EXPECT_FALSE(fixed.table().trainable);
  EXPECT_EQ(fixed.table().value, build_input<double>(g, InputMode::LearnableOrthogonal, 8, 0).table().value);
}

TEST(BuildInput, RawFeaturesNeedFeatures) {
  Graph g = detail::random_graph(6, 0.4, 1);
  EXPECT_THROW(build_input<double>(g, InputMode::RawFeatures, 4, 0), ConfigError);
  EXPECT_THROW(build_input<double>(g, InputMode::RawPlusLearnable, 4, 0), ConfigError);
  Graph f(6, g.edges(), Matrix<double>::Ones(6, 5));
  auto in = build_input<double>(f, InputMode::RawFeatures, 4, 0);
  ad::Tape<double> t;
  auto z0 = in.forward(t);
  EXPECT_EQ(z0.rows(), 6);
  EXPECT_EQ(z0.cols(), 4);
  auto mix = build_input<double>(f, InputMode::RawPlusLearnable, 4, 0);
  EXPECT_EQ(mix.forward(t).cols(), 4);
}

TEST(GaeModel, FixedTableExcludedFromOptimizer) {
  Graph g = detail::random_graph(6, 0.4, 1);
  ModelConfig cfg;
  cfg.input = InputMode::FixedOrthogonal;
  cfg.encoder.hidden_dim = 8;
  GaeModel<double> fixed(g, cfg, 0);
  for (auto* p : fixed.parameters()) EXPECT_NE(p->name, "input.table");
  cfg.input = InputMode::LearnableOrthogonal;
  GaeModel<double> learn(g, cfg, 0);
  bool found = false;
  for (auto* p : learn.parameters()) found = found || p->name == "input.table";
  EXPECT_TRUE(found);
}

TEST(Encoder, PathCommonNeighborLogit) {
  Encoder<double> enc(gcn(1, 3, false), 0);
  enc.set_identity_weights();
  Matrix<double> z = encode(enc, path3(), Matrix<double>::Identity(3, 3));
  EXPECT_NEAR(z.row(0).dot(z.row(2)), 1.0 / 6.0, 1e-15);
}

TEST(Encoder, EdgelessResidualDoubles) {
  Graph g(5, std::vector<Edge>{});
  Encoder<double> enc(gcn(1, 4, true), 0);
  enc.set_identity_weights();
  std::mt19937_64 rng(1);
  Matrix<double> x = detail::random_matrix(5, 4, rng);
  EXPECT_LT((encode(enc, g, x) - 2 * x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Encoder, ZeroWeightsWithResidualKeepInput) {
  Graph g = detail::random_graph(8, 0.4, 2);
  std::mt19937_64 rng(2);
  Matrix<double> x = detail::random_matrix(8, 4, rng);
  for (ConvKind k : {ConvKind::Gcn, ConvKind::Sage, ConvKind::Gin}) {
    EncoderConfig c = gcn(3, 4, true);
    c.conv = k;
    Encoder<double> enc(c, 0);
    enc.zero_weights();
    EXPECT_LT((encode(enc, g, x) - x).cwiseAbs().maxCoeff(), 1e-15) << static_cast<int>(k);
  }
}

TEST(Encoder, NonlinearDiffersButReluIdentityOnPositives) {
  Graph g = detail::random_graph(10, 0.3, 3);
  std::mt19937_64 rng(3);
  Matrix<double> x = detail::random_matrix(10, 6, rng);
  EncoderConfig lin = gcn(3, 6, true);
  Encoder<double> a(lin, 7), b(nonlinear_variant(lin), 7);
  EXPECT_FALSE(nonlinear_variant(lin).linear);
  EXPECT_GT((encode(a, g, x) - encode(b, g, x)).cwiseAbs().maxCoeff(), 1e-6);

  // Positive inputs and identity weights keep every pre-activation positive.
  Matrix<double> pos = x.cwiseAbs().array() + 0.1;
  a.set_identity_weights();
  b.set_identity_weights();
  EXPECT_EQ(encode(a, g, pos), encode(b, g, pos));
}

TEST(Encoder, PermutationEquivariance) {
  const NodeId n = 12;
  Graph g = detail::random_graph(n, 0.3, 4);
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<Edge> relabeled;
  for (const Edge& e : g.edges()) relabeled.push_back({perm[e.u], perm[e.v]});
  Graph h(n, relabeled);

  Matrix<double> x = orthogonal_table(n, 16, 1);
  Matrix<double> px(n, 16);
  for (NodeId i = 0; i < n; ++i) px.row(perm[i]) = x.row(i);

  for (ConvKind k : {ConvKind::Gcn, ConvKind::Sage, ConvKind::Gin}) {
    EncoderConfig c = gcn(2, 16, true);
    c.conv = k;
    c.linear = k != ConvKind::Gin;
    Encoder<double> enc(c, 9);
    Matrix<double> z = encode(enc, g, x), pz = encode(enc, h, px);
    for (NodeId i = 0; i < n; ++i) EXPECT_LT((pz.row(perm[i]) - z.row(i)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Encoder, ShapeAndKindChecks) {
  Encoder<double> enc(gcn(1, 4, true), 0);
  GraphOperators<double> ops(path3(), ConvKind::Gcn);
  ad::Tape<double> t;
  EXPECT_THROW(enc.forward(t, ops, t.constant(Matrix<double>::Zero(3, 5))), DimensionError);
  GraphOperators<double> sage(path3(), ConvKind::Sage);
  EXPECT_THROW(enc.forward(t, sage, t.constant(Matrix<double>::Zero(3, 4))), ConfigError);
  EXPECT_THROW(Encoder<double>(gcn(0, 4, true), 0), ConfigError);
}

TEST(Encoder, NormalizedOutputHasUnitRows) {
  EncoderConfig c = gcn(2, 8, true);
  c.normalize_output = true;
  Encoder<double> enc(c, 1);
  Graph g = detail::random_graph(10, 0.3, 5);
  Matrix<double> z = encode(enc, g, orthogonal_table(10, 8, 0));
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_NEAR(z.row(i).norm(), 1.0, 1e-12);
}

TEST(Decoder, DotProduct) {
  DecoderConfig c;
  c.kind = DecoderKind::Dot;
  Decoder<double> dec(c, 2, 0);
  ad::Tape<double> t;
  Matrix<double> z(3, 2);
  z << 1, 0, 1, 0, 0, 1;
  std::mt19937_64 rng(0);
  std::vector<Edge> pairs{{0, 1}, {0, 2}};
  auto logits = dec.forward(t, t.constant(z), pairs, false, rng).value();
  EXPECT_DOUBLE_EQ(logits(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(logits(1, 0), 0.0);
  std::vector<Edge> bad{{0, 3}};
  EXPECT_THROW(dec.forward(t, t.constant(z), bad, false, rng), DimensionError);
}

TEST(Decoder, ZeroHeadGivesHalf) {
  DecoderConfig c;
  c.mlp_layers = 3;
  c.dropout = 0.5;
  Decoder<double> dec(c, 4, 1);
  dec.zero_head();
  ad::Tape<double> t;
  std::mt19937_64 rng(0), rng2(1);
  std::vector<Edge> pairs{{0, 1}, {1, 2}, {2, 0}};
  auto z = t.constant(orthogonal_table(3, 4, 0));
  auto logits = dec.forward(t, z, pairs, true, rng);
  EXPECT_EQ(logits.value(), Matrix<double>::Zero(3, 1));
  EXPECT_EQ(ad::sigmoid(logits).value(), Matrix<double>::Constant(3, 1, 0.5));
}

TEST(Decoder, Config) {
  DecoderConfig c;
  c.mlp_layers = 0;
  EXPECT_THROW(Decoder<double>(c, 4, 0), ConfigError);
  c.mlp_layers = 2;
  c.dropout = 1.0;
  EXPECT_THROW(Decoder<double>(c, 4, 0), ConfigError);
}

TEST(Decoder, SymmetricInEndpoints) {
  DecoderConfig c;
  Decoder<double> dec(c, 6, 2);
  ad::Tape<double> t;
  std::mt19937_64 rng(0);
  auto z = t.constant(orthogonal_table(5, 6, 1));
  std::vector<Edge> fwd{{0, 3}, {1, 4}}, rev{{3, 0}, {4, 1}};
  EXPECT_EQ(dec.forward(t, z, fwd, false, rng).value(), dec.forward(t, z, rev, false, rng).value());
}

TEST(GraphOperators, MaskZeroesBothDirectionsAndRestores) {
  Graph g = detail::random_graph(10, 0.4, 6);
  for (ConvKind k : {ConvKind::Gcn, ConvKind::Sage, ConvKind::Gin}) {
    GraphOperators<double> ops(g, k);
    const Matrix<double> before = ops.op().to_dense();
    std::vector<Edge> batch(g.edges().begin(), g.edges().begin() + 3);
    ops.mask(batch);
    EXPECT_TRUE(ops.masked());
    for (const Edge& e : batch) {
      EXPECT_EQ(ops.op().at(e.u, e.v), 0.0);
      EXPECT_EQ(ops.op().at(e.v, e.u), 0.0);
      if (ops.op_transpose()) {
        EXPECT_EQ(ops.op_transpose()->at(e.u, e.v), 0.0);
      }
    }
    ops.unmask();
    EXPECT_FALSE(ops.masked());
    EXPECT_EQ(ops.op().to_dense(), before);
  }
}

TEST(GaeModel, CheckpointRoundTrip) {
  Graph g = detail::random_graph(8, 0.4, 1);
  ModelConfig cfg;
  cfg.encoder.hidden_dim = 4;
  GaeModel<double> a(g, cfg, 1), b(g, cfg, 2);
  auto j = a.checkpoint("abc");
  EXPECT_THROW(b.load_checkpoint(j, "other"), ConfigError);
  b.load_checkpoint(nlohmann::json::parse(j.dump()), "abc");
  EXPECT_EQ(a.snapshot(), b.snapshot());
  j["parameters"]["input.table"]["rows"] = 9;
  EXPECT_THROW(b.load_checkpoint(j, "abc"), DimensionError);
}

TEST(GaeModel, SnapshotRestore) {
  Graph g = detail::random_graph(8, 0.4, 1);
  ModelConfig cfg;
  cfg.encoder.hidden_dim = 4;
  GaeModel<double> m(g, cfg, 1);
  auto snap = m.snapshot();
  for (auto* p : m.parameters()) p->value.setZero();
  m.restore(snap);
  EXPECT_EQ(m.snapshot(), snap);
}
