#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "linkgae/autograd.hpp"
#include "linkgae/evaluation.hpp"
#include "linkgae/metrics.hpp"
#include "linkgae/model.hpp"
#include "linkgae/optim.hpp"
#include "linkgae/split.hpp"

namespace linkgae {

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 500;
  int batch_size = 2048;
  int neg_ratio = 3;
  /// Hide each batch's own positive edges from message passing.
  bool mask_input = false;
  int eval_every = 5;
  /// Evaluations without improvement before stopping.
  int patience = 20;
  std::uint64_t seed = 0;
  MetricSpec metric = MetricSpec::hits(100);

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (neg_ratio < 1) throw ConfigError("neg_ratio must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> valid_metric;
  double seconds = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_valid = -std::numeric_limits<double>::infinity();
  double test_metric = 0.0;
  bool early_stopped = false;
};

/// Mean BCE over positives (label 1) and negatives (label 0) given as n x 1
/// logit columns.
template <typename T>
ad::Var<T> bce_loss(ad::Var<T> logits_pos, ad::Var<T> logits_neg) {
  const auto np = static_cast<std::size_t>(logits_pos.rows());
  const auto nn = static_cast<std::size_t>(logits_neg.rows());
  if (np + nn == 0) throw DimensionError("bce_loss: no positive or negative logits");
  std::vector<T> labels(np, T(1));
  labels.resize(np + nn, T(0));
  return ad::bce_with_logits(ad::concat_rows({logits_pos, logits_neg}), std::move(labels));
}

namespace detail {

/// Flushes subnormal floats to zero for the current thread while alive.
/// Late in training many activations and Adam moments decay into the
/// subnormal range, where each arithmetic op costs ~100x more.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }  // FTZ | DAZ
  ~FlushDenormals() { _mm_setcsr(saved_); }
#else
  FlushDenormals() = default;
#endif
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

#if defined(__SSE__)
 private:
  unsigned saved_;
#endif
};

}  // namespace detail

/// Tracks the best validation score and the patience counter.
class ModelSelector {
 public:
  explicit ModelSelector(int patience) : patience_(patience) {}

  /// Records one evaluation. Returns true when it is a new best.
  bool observe(int epoch, double metric) {
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const noexcept { return stale_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = -1;
  double best_ = -std::numeric_limits<double>::infinity();
};

/// One training run: owns the optimizer state, the message-passing
/// operators built from the training edges, and the RNG.
template <typename T>
class Trainer {
 public:
  /// Called with the operator used for a batch's forward pass and the batch.
  using BatchObserver = std::function<void(const GraphOperators<T>&, std::span<const Edge>)>;

  Trainer(GaeModel<T>& model, const Graph& train_graph, const TrainConfig& cfg)
      : model_(model),
        train_graph_(train_graph),
        ops_(train_graph, model.config().encoder.conv),
        cfg_(cfg),
        adam_(cfg.lr),
        rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
    cfg.validate();
    params_ = model_.parameters();
  }

  const GraphOperators<T>& operators() const noexcept { return ops_; }
  void set_batch_observer(BatchObserver fn) { observer_ = std::move(fn); }

  /// One pass over the shuffled training positives. Each batch draws
  /// neg_ratio x |batch| fresh negatives and takes one Adam step. Returns
  /// the pair-weighted mean batch loss.
  double train_epoch(std::span<const Edge> train_pos) {
    if (train_pos.empty()) throw DimensionError("train_epoch: no training edges");
    std::vector<Edge> order(train_pos.begin(), train_pos.end());
    std::shuffle(order.begin(), order.end(), rng_);
    double weighted = 0.0;
    std::size_t pairs = 0;
    const auto bs = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::span<const Edge> batch(order.data() + start, std::min(bs, order.size() - start));
      const double loss = train_batch(batch);
      const std::size_t n = batch.size() * static_cast<std::size_t>(1 + cfg_.neg_ratio);
      weighted += loss * static_cast<double>(n);
      pairs += n;
    }
    return weighted / static_cast<double>(pairs);
  }

  double train_batch(std::span<const Edge> batch) {
    detail::FlushDenormals ftz;
    std::vector<Edge> negatives = sample_negatives(
        train_graph_, batch.size() * static_cast<std::size_t>(cfg_.neg_ratio), rng_());
    if (cfg_.mask_input) ops_.mask(batch);
    if (observer_) observer_(ops_, batch);
    ad::Tape<T> tape;
    auto z = model_.encode(tape, ops_);
    auto pos = model_.decode(tape, z, batch, true, rng_);
    auto neg = model_.decode(tape, z, negatives, true, rng_);
    auto loss = bce_loss(pos, neg);
    const double value = static_cast<double>(loss.scalar());
    tape.backward(loss);
    if (cfg_.mask_input) ops_.unmask();
    ad::adam_step(adam_, params_);
    return value;
  }

  double evaluate(const EdgeSplit& split, SplitPart part) {
    detail::FlushDenormals ftz;
    Matrix<T> z = model_.embed(ops_);
    PairScorer score = [&](std::span<const Edge> pairs) { return model_.score(z, pairs); };
    return evaluate_split(cfg_.metric, split, part, score);
  }

  /// Trains with periodic validation, keeps the best-validation parameters,
  /// and reports the test metric of that checkpoint.
  RunRecord fit(const EdgeSplit& split) {
    if (split.valid_pos.empty()) throw DimensionError("fit: split has no validation edges");
    RunRecord record;
    ModelSelector selector(cfg_.patience);
    std::vector<Matrix<T>> best = model_.snapshot();
    using Clock = std::chrono::steady_clock;
    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      auto t0 = Clock::now();
      EpochRecord rec;
      rec.epoch = epoch;
      rec.loss = train_epoch(split.train_pos);
      if (epoch % cfg_.eval_every == 0 || epoch == cfg_.epochs) {
        rec.valid_metric = evaluate(split, SplitPart::Valid);
        if (selector.observe(epoch, *rec.valid_metric)) best = model_.snapshot();
      }
      rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      record.epochs.push_back(rec);
      if (rec.valid_metric && selector.should_stop()) {
        record.early_stopped = epoch < cfg_.epochs;
        break;
      }
    }
    model_.restore(best);
    record.best_epoch = selector.best_epoch();
    record.best_valid = selector.best();
    record.test_metric = evaluate(split, SplitPart::Test);
    return record;
  }

 private:
  GaeModel<T>& model_;
  const Graph& train_graph_;
  GraphOperators<T> ops_;
  TrainConfig cfg_;
  ad::AdamState<T> adam_;
  std::vector<ad::Parameter<T>*> params_;
  std::mt19937_64 rng_;
  BatchObserver observer_;
};

}  // namespace linkgae
