#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "linkgae/autograd.hpp"
#include "linkgae/graph.hpp"
#include "linkgae/model.hpp"
#include "linkgae/trainer.hpp"

namespace linkgae {

// ---------------------------------------------------------------------------
// Orthogonality drift

struct OrthogonalityStats {
  double mean_abs_cos = 0.0;
  double std_abs_cos = 0.0;
  std::size_t pairs = 0;
};

/// Mean and standard deviation of |cos| between distinct rows. Uses every
/// pair for n <= 2000, otherwise `sampled_pairs` seeded random pairs.
template <typename Derived>
OrthogonalityStats orthogonality_stats(const Eigen::MatrixBase<Derived>& table,
                                       std::uint64_t seed = 0,
                                       std::size_t sampled_pairs = 1'000'000) {
  const Matrix<double> x = table.template cast<double>();
  const Eigen::Index n = x.rows();
  if (n < 2) throw DimensionError("orthogonality_stats needs at least two rows");
  Eigen::VectorXd inv_norm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nrm = x.row(i).norm();
    inv_norm(i) = nrm > 0.0 ? 1.0 / nrm : 0.0;
  }
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  auto visit = [&](Eigen::Index i, Eigen::Index j) {
    const double c = std::abs(x.row(i).dot(x.row(j)) * inv_norm(i) * inv_norm(j));
    sum += c;
    sum_sq += c * c;
    ++count;
  };
  if (n <= 2000) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) visit(i, j);
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    while (count < sampled_pairs) {
      Eigen::Index i = pick(rng), j = pick(rng);
      if (i != j) visit(i, j);
    }
  }
  OrthogonalityStats s;
  s.pairs = count;
  s.mean_abs_cos = sum / static_cast<double>(count);
  s.std_abs_cos = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) -
                                              s.mean_abs_cos * s.mean_abs_cos));
  return s;
}

// ---------------------------------------------------------------------------
// Common-neighbor equivalence of the linear encoder

/// Dense D̃^{-1/2}(A + I)D̃^{-1/2}, built straight from the edge list.
inline Matrix<double> dense_normalized_adjacency(const Graph& g) {
  const Eigen::Index n = g.num_nodes();
  Matrix<double> a = Matrix<double>::Identity(n, n);
  for (const Edge& e : g.edges()) {
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  Eigen::VectorXd inv_sqrt = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

struct CnEquivalence {
  double max_deviation = 0.0;
  Matrix<double> logits;  // z_i · z_j for all pairs
  Matrix<double> oracle;  // (Ã^{2k})_{ij}
};

/// Runs a k-layer identity-weight linear GCN encoder (no residual) on exact
/// orthonormal inputs and compares every pairwise dot product with the dense
/// matrix power (Ã^{2k}). Requires d >= n.
inline CnEquivalence verify_cn_equivalence(const Graph& g, int k, Eigen::Index d = -1,
                                           std::uint64_t seed = 0) {
  const Eigen::Index n = g.num_nodes();
  if (d < 0) d = n;
  if (n > d) {
    throw ConfigError("verify_cn_equivalence: exact orthonormal inputs need d >= n (n=" +
                      std::to_string(n) + ", d=" + std::to_string(d) + ")");
  }
  if (n > 512) throw ConfigError("verify_cn_equivalence: dense oracle limited to n <= 512");
  if (k < 1) throw ConfigError("verify_cn_equivalence: k must be >= 1");

  EncoderConfig cfg;
  cfg.conv = ConvKind::Gcn;
  cfg.num_layers = k;
  cfg.hidden_dim = static_cast<int>(d);
  cfg.linear = true;
  cfg.initial_residual = false;
  Encoder<double> encoder(cfg, seed);
  encoder.set_identity_weights();
  GraphOperators<double> ops(g, ConvKind::Gcn);
  ad::Tape<double> tape;
  auto x = tape.constant(orthogonal_table(n, d, seed));
  Matrix<double> z = encoder.forward(tape, ops, x).value();

  CnEquivalence out;
  out.logits = z * z.transpose();
  const Matrix<double> a = dense_normalized_adjacency(g);
  Matrix<double> power = Matrix<double>::Identity(n, n);
  for (int i = 0; i < 2 * k; ++i) power = power * a;
  out.oracle = std::move(power);
  out.max_deviation = n == 0 ? 0.0 : (out.logits - out.oracle).cwiseAbs().maxCoeff();
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  bool passed(double tol = 1e-4) const { return max_rel_error < tol; }
};

/// Compares analytic parameter gradients of `loss_fn` against central
/// differences. Error per entry is |a - n| / max(|a|, |n|, 1e-6). The loss
/// function must be deterministic (seed any dropout RNG inside it).
inline GradCheckResult gradient_check(
    std::string name, std::span<ad::Parameter<double>* const> params,
    const std::function<ad::Var<double>(ad::Tape<double>&)>& loss_fn, double h = 1e-5,
    std::size_t max_entries_per_param = 400) {
  for (auto* p : params) p->zero_grad();
  {
    ad::Tape<double> tape;
    tape.backward(loss_fn(tape));
  }
  auto eval = [&] {
    ad::Tape<double> tape;
    return loss_fn(tape).scalar();
  };
  GradCheckResult r;
  r.name = std::move(name);
  for (auto* p : params) {
    const Eigen::Index size = p->value.size();
    const Eigen::Index stride =
        std::max<Eigen::Index>(1, size / static_cast<Eigen::Index>(max_entries_per_param));
    for (Eigen::Index i = 0; i < size; i += stride) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + h;
      const double up = eval();
      x = saved - h;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
      ++r.entries;
    }
  }
  for (auto* p : params) p->zero_grad();
  return r;
}

inline GradCheckResult gradient_check(
    std::string name, std::vector<ad::Parameter<double>*> params,
    const std::function<ad::Var<double>(ad::Tape<double>&)>& loss_fn, double h = 1e-5) {
  return gradient_check(std::move(name),
                        std::span<ad::Parameter<double>* const>(params.data(), params.size()),
                        loss_fn, h);
}

namespace detail {

inline Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                                    double away_from_zero = 0.0) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v = dist(rng);
    if (away_from_zero > 0.0) v += v >= 0.0 ? away_from_zero : -away_from_zero;
    m.data()[i] = v;
  }
  return m;
}

// A small random graph with every node touched, for operator checks.
inline Graph random_graph(NodeId n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      if (coin(rng)) edges.push_back({u, v});
    }
  }
  return Graph(n, edges);
}

}  // namespace detail

/// Finite-difference check of every tape op, each reduced to a scalar by a
/// fixed random weighting.
inline std::vector<GradCheckResult> op_gradient_checks(std::uint64_t seed = 7) {
  using ad::Parameter;
  using ad::Tape;
  using ad::Var;
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> out;

  Parameter<double> a("a", detail::random_matrix(5, 4, rng, 0.1));
  Parameter<double> b("b", detail::random_matrix(5, 4, rng, 0.1));
  Parameter<double> w("w", detail::random_matrix(4, 3, rng));
  Parameter<double> bias("bias", detail::random_matrix(1, 4, rng));
  Parameter<double> s("s", detail::random_matrix(1, 1, rng, 0.2));
  const Matrix<double> r54 = detail::random_matrix(5, 4, rng);
  const Matrix<double> r53 = detail::random_matrix(5, 3, rng);
  const Matrix<double> r51 = detail::random_matrix(5, 1, rng);
  const Matrix<double> r10 = detail::random_matrix(10, 4, rng);
  const Matrix<double> r58 = detail::random_matrix(5, 8, rng);

  auto weigh = [](Tape<double>& t, Var<double> x, const Matrix<double>& r) {
    return ad::sum(ad::hadamard(x, t.constant(r)));
  };
  using Fn = std::function<Var<double>(Tape<double>&)>;
  auto check = [&](const char* name, std::vector<Parameter<double>*> ps, Fn fn) {
    out.push_back(gradient_check(name, std::move(ps), fn));
  };

  check("matmul", {&a, &w}, [&](Tape<double>& t) {
    return weigh(t, ad::matmul(t.parameter(a), t.parameter(w)), r53);
  });
  const Graph g = detail::random_graph(5, 0.5, seed);
  const auto adj = normalize(g);
  const auto mean = mean_aggregation(g);
  const auto mean_t = mean.transpose();
  check("spmm", {&a}, [&](Tape<double>& t) { return weigh(t, ad::spmm(adj, t.parameter(a)), r54); });
  check("spmm_nonsymmetric", {&a}, [&](Tape<double>& t) {
    return weigh(t, ad::spmm(mean, t.parameter(a), &mean_t), r54);
  });
  check("add", {&a, &b}, [&](Tape<double>& t) {
    return weigh(t, ad::add(t.parameter(a), t.parameter(b)), r54);
  });
  check("add_bias", {&a, &bias}, [&](Tape<double>& t) {
    return weigh(t, ad::add_bias(t.parameter(a), t.parameter(bias)), r54);
  });
  check("hadamard", {&a, &b}, [&](Tape<double>& t) {
    return weigh(t, ad::hadamard(t.parameter(a), t.parameter(b)), r54);
  });
  check("row_dot", {&a, &b}, [&](Tape<double>& t) {
    return weigh(t, ad::row_dot(t.parameter(a), t.parameter(b)), r51);
  });
  check("sigmoid", {&a}, [&](Tape<double>& t) { return weigh(t, ad::sigmoid(t.parameter(a)), r54); });
  check("relu", {&a}, [&](Tape<double>& t) { return weigh(t, ad::relu(t.parameter(a)), r54); });
  check("dropout", {&a}, [&](Tape<double>& t) {
    std::mt19937_64 mask_rng(11);
    return weigh(t, ad::dropout(t.parameter(a), 0.4, true, mask_rng), r54);
  });
  check("concat_rows", {&a, &b}, [&](Tape<double>& t) {
    return weigh(t, ad::concat_rows({t.parameter(a), t.parameter(b)}), r10);
  });
  check("concat_cols", {&a, &b}, [&](Tape<double>& t) {
    return weigh(t, ad::concat_cols(t.parameter(a), t.parameter(b)), r58);
  });
  check("sum", {&a}, [&](Tape<double>& t) {
    auto x = ad::hadamard(t.parameter(a), t.parameter(a));
    return ad::sum(x);
  });
  check("scale", {&a, &s}, [&](Tape<double>& t) {
    return weigh(t, ad::scale(t.parameter(a), t.parameter(s)), r54);
  });
  check("gather_rows", {&a}, [&](Tape<double>& t) {
    return weigh(t, ad::gather_rows(t.parameter(a), {4, 0, 4, 2, 1}), r54);
  });
  check("l2_normalize_rows", {&a}, [&](Tape<double>& t) {
    return weigh(t, ad::l2_normalize_rows(t.parameter(a)), r54);
  });
  check("bce_with_logits", {&a, &w}, [&](Tape<double>& t) {
    auto logits = ad::matmul(t.parameter(a), t.parameter(w));
    auto col = ad::row_dot(logits, t.constant(Matrix<double>::Ones(5, 3)));
    return ad::bce_with_logits(col, std::vector<double>{1, 0, 1, 1, 0});
  });
  return out;
}

/// Finite-difference check of the full training loss for a few model
/// variants on a 12-node random graph.
inline std::vector<GradCheckResult> model_gradient_checks(std::uint64_t seed = 3) {
  std::vector<GradCheckResult> out;
  std::mt19937_64 rng(seed);
  Graph base = detail::random_graph(12, 0.3, seed);
  Graph g(12, base.edges(), detail::random_matrix(12, 5, rng));
  const std::vector<Edge> pos(g.edges().begin(), g.edges().begin() + std::min<std::size_t>(6, g.num_edges()));
  const std::vector<Edge> neg = sample_negatives(g, 3 * pos.size(), seed);

  struct Variant {
    const char* name;
    ModelConfig cfg;
  };
  auto make = [](InputMode in, ConvKind conv, DecoderKind dec, bool linear, bool norm) {
    ModelConfig c;
    c.input = in;
    c.encoder.conv = conv;
    c.encoder.num_layers = 2;
    c.encoder.hidden_dim = 6;
    c.encoder.linear = linear;
    c.encoder.normalize_output = norm;
    c.decoder.kind = dec;
    c.decoder.mlp_layers = 2;
    c.decoder.dropout = 0.3;
    return c;
  };
  const std::vector<Variant> variants = {
      {"gae_gcn_orthogonal_mlp", make(InputMode::LearnableOrthogonal, ConvKind::Gcn, DecoderKind::Mlp, true, false)},
      {"gae_gcn_raw_mlp_normalized", make(InputMode::RawFeatures, ConvKind::Gcn, DecoderKind::Mlp, true, true)},
      {"gae_sage_raw_plus_learnable_dot", make(InputMode::RawPlusLearnable, ConvKind::Sage, DecoderKind::Dot, true, false)},
      {"gae_gin_orthogonal_mlp_nonlinear", make(InputMode::LearnableOrthogonal, ConvKind::Gin, DecoderKind::Mlp, false, false)},
  };
  for (const auto& v : variants) {
    GaeModel<double> model(g, v.cfg, seed);
    GraphOperators<double> ops(g, v.cfg.encoder.conv);
    auto fn = [&](ad::Tape<double>& t) {
      std::mt19937_64 drop(5);
      auto z = model.encode(t, ops);
      auto lp = model.decode(t, z, pos, true, drop);
      auto ln = model.decode(t, z, neg, true, drop);
      return bce_loss(lp, ln);
    };
    out.push_back(gradient_check(v.name, model.parameters(), fn));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Micro-benchmark

/// Median wall time of one full training step (encode, decode |batch| + 3|batch|
/// pairs, backward, Adam) over `timed` steps after `warmup` untimed steps.
template <typename T>
double bench_batch(GaeModel<T>& model, const Graph& train_graph, std::span<const Edge> train_pos,
                   int batch_size, const TrainConfig& cfg, int warmup = 5, int timed = 20) {
  if (train_pos.empty()) throw DimensionError("bench_batch: no training edges");
  Trainer<T> trainer(model, train_graph, cfg);
  std::vector<Edge> batch;
  for (int i = 0; i < batch_size; ++i) batch.push_back(train_pos[static_cast<std::size_t>(i) % train_pos.size()]);
  for (int i = 0; i < warmup; ++i) trainer.train_batch(batch);
  std::vector<double> times;
  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < timed; ++i) {
    auto t0 = Clock::now();
    trainer.train_batch(batch);
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  return times[times.size() / 2];
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw DimensionError("log_log_slope needs >= 2 matching points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace linkgae
