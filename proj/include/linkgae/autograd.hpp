#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linkgae/errors.hpp"
#include "linkgae/graph.hpp"

/// Minimal reverse-mode AD over dense row-major matrices.
///
/// A Tape records every op of one forward pass. Values live in tape nodes;
/// parameters are owned by the model and referenced, not copied. backward()
/// walks nodes in reverse recording order, accumulates parameter gradients
/// into Parameter::grad, and clears the tape.
namespace linkgae::ad {

template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool has_grad = false;
  /// Frozen parameters are fed to the tape as constants and skipped by the
  /// optimizer.
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = Matrix<T>::Zero(value.rows(), value.cols());
  }

  void zero_grad() {
    grad.setZero();
    has_grad = false;
  }
};

template <typename T>
class Tape;

/// Handle to a tape node. Invalidated by Tape::clear().
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;
  std::uint64_t generation = 0;

  const Matrix<T>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  T scalar() const { return value()(0, 0); }
};

template <typename T>
class Tape {
 public:
  using Mat = Matrix<T>;
  /// Called during backward with the node's own id; reads grad(self) and
  /// accumulates into parents.
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Mat value) {
    Node node;
    node.owned = std::move(value);
    return push(std::move(node));
  }

  /// Leaf for a model parameter. The tape reads p.value in place, so p must
  /// not move or change until backward() finishes.
  Var<T> parameter(Parameter<T>& p) {
    Node node;
    node.external = &p.value;
    if (p.trainable) {
      node.param = &p;
      node.requires_grad = true;
    }
    return push(std::move(node));
  }

  /// Records a derived value. It requires grad iff any parent does.
  Var<T> record(Mat value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record(std::move(value), std::span<const Var<T>>(parents.begin(), parents.size()),
                  std::move(fn));
  }

  Var<T> record(Mat value, std::span<const Var<T>> parents, BackwardFn fn) {
    Node node;
    node.owned = std::move(value);
    for (const Var<T>& p : parents) {
      check(p);
      node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(fn);
    return push(std::move(node));
  }

  const Mat& value(Var<T> v) const {
    check(v);
    return value(v.id);
  }
  const Mat& value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
  }

  bool requires_grad(Var<T> v) const {
    check(v);
    return nodes_[v.id].requires_grad;
  }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  /// Gradient of node `id`; only meaningful inside a backward callback.
  const Mat& grad(std::uint32_t id) const { return nodes_[id].grad; }

  /// grad(id) += g. No-op for nodes that do not require grad.
  template <typename Expr>
  void accumulate(std::uint32_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 loss, then clears the tape.
  void backward(Var<T> loss) {
    if (loss.tape != this || loss.generation != generation_ || loss.id >= nodes_.size()) {
      throw UsageError("backward: tensor was not recorded on this tape (or the tape was cleared)");
    }
    const Mat& lv = value(loss.id);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw UsageError("backward: loss must be a scalar, got " + std::to_string(lv.rows()) + "x" +
                       std::to_string(lv.cols()));
    }
    accumulate(loss.id, Mat::Ones(1, 1));
    for (std::int64_t i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.param) {
        n.param->grad += n.grad;
        n.param->has_grad = true;
      } else if (n.backward) {
        n.backward(*this, static_cast<std::uint32_t>(i));
      }
    }
    clear();
  }

  void clear() {
    nodes_.clear();
    ++generation_;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  void check(Var<T> v) const {
    if (v.tape != this || v.generation != generation_ || v.id >= nodes_.size()) {
      throw UsageError("tensor does not belong to this tape (or the tape was cleared)");
    }
  }

 private:
  struct Node {
    Mat owned;
    const Mat* external = nullptr;
    Mat grad;
    bool has_grad = false;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  Var<T> push(Node node) {
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_};
  }

  // deque: node addresses stay stable while ops hold references to parents.
  std::deque<Node> nodes_;
  std::uint64_t generation_ = 1;
};

// ---------------------------------------------------------------------------
// Ops

namespace detail {

template <typename T>
void same_shape(const char* op, Var<T> a, Var<T> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

template <typename T>
Tape<T>& tape_of(Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw UsageError("operands recorded on different tapes");
  return *a.tape;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix<T> out = a.value() * b.value();
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    const auto& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

/// adj * x. The backward pass multiplies by adjᵀ (adj itself when the
/// operator is symmetric, else `adj_transpose`, which must then be given).
/// Both operators must outlive the backward pass and keep their values.
template <typename T>
Var<T> spmm(const SparseMatrix<T>& adj, Var<T> x, const SparseMatrix<T>* adj_transpose = nullptr) {
  if (!adj.symmetric() && adj_transpose == nullptr) {
    throw UsageError("spmm: non-symmetric operator needs its transpose for backward");
  }
  Matrix<T> out = linkgae::spmm(adj, x.value());
  const auto ix = x.id;
  const SparseMatrix<T>* back = adj.symmetric() ? &adj : adj_transpose;
  return x.tape->record(std::move(out), {x}, [ix, back](Tape<T>& tp, std::uint32_t self) {
    tp.accumulate(ix, linkgae::spmm(*back, tp.grad(self)));
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::tape_of(a, b);
  detail::same_shape("add", a, b);
  Matrix<T> out = a.value() + b.value();
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    tp.accumulate(ia, tp.grad(self));
    tp.accumulate(ib, tp.grad(self));
  });
}

/// a + bias, bias a 1 x cols row broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> a, Var<T> bias) {
  Tape<T>& t = detail::tape_of(a, bias);
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_bias: bias must be 1x" + std::to_string(a.cols()));
  }
  Matrix<T> out = a.value().rowwise() + bias.value().row(0);
  const auto ia = a.id, ib = bias.id;
  return t.record(std::move(out), {a, bias}, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    tp.accumulate(ia, tp.grad(self));
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.grad(self).colwise().sum());
  });
}

template <typename T>
Var<T> hadamard(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::tape_of(a, b);
  detail::same_shape("hadamard", a, b);
  Matrix<T> out = a.value().cwiseProduct(b.value());
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    const auto& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

/// Row-wise dot product: n x d, n x d -> n x 1.
template <typename T>
Var<T> row_dot(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::tape_of(a, b);
  detail::same_shape("row_dot", a, b);
  Matrix<T> out = a.value().cwiseProduct(b.value()).rowwise().sum();
  const auto ia = a.id, ib = b.id;
  return t.record(std::move(out), {a, b}, [ia, ib](Tape<T>& tp, std::uint32_t self) {
    const auto g = tp.grad(self).col(0);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g.asDiagonal() * tp.value(ib));
    if (tp.requires_grad(ib)) tp.accumulate(ib, g.asDiagonal() * tp.value(ia));
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Matrix<T> out = x.value().unaryExpr([](T v) { return detail::stable_sigmoid(v); });
  const auto ix = x.id;
  return x.tape->record(out, {x}, [ix](Tape<T>& tp, std::uint32_t self) {
    const auto& s = tp.value(self);
    tp.accumulate(ix, tp.grad(self).cwiseProduct(s.cwiseProduct((T(1) - s.array()).matrix())));
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Matrix<T> out = x.value().cwiseMax(T(0));
  const auto ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix](Tape<T>& tp, std::uint32_t self) {
    const auto& in = tp.value(ix);
    tp.accumulate(ix, (in.array() > T(0)).select(tp.grad(self), T(0)).matrix());
  });
}

/// Inverted dropout: train mode zeroes entries with probability p and scales
/// survivors by 1/(1-p); eval mode (or p == 0) is the identity.
template <typename T, typename Rng>
Var<T> dropout(Var<T> x, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout p must be in [0, 1)");
  if (!train || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const T scale = T(1.0 / (1.0 - p));
  Matrix<T> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : T(0);
  Matrix<T> out = x.value().cwiseProduct(mask);
  const auto ix = x.id;
  return x.tape->record(std::move(out), {x},
                        [ix, mask = std::move(mask)](Tape<T>& tp, std::uint32_t self) {
                          tp.accumulate(ix, tp.grad(self).cwiseProduct(mask));
                        });
}

/// Stacks row blocks with equal column counts.
template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  Tape<T>& t = *parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.tape != &t) throw UsageError("operands recorded on different tapes");
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<T> out(rows, cols);
  std::vector<std::pair<std::uint32_t, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id, r);
    r += p.rows();
  }
  return t.record(std::move(out), parts, [spans](Tape<T>& tp, std::uint32_t self) {
    const auto& g = tp.grad(self);
    for (auto [id, start] : spans) {
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleRows(start, tp.value(id).rows()));
    }
  });
}

template <typename T>
Var<T> concat_rows(std::initializer_list<Var<T>> parts) {
  return concat_rows(std::span<const Var<T>>(parts.begin(), parts.size()));
}

/// [a | b] for equal row counts.
template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  Tape<T>& t = detail::tape_of(a, b);
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
  Matrix<T> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  const auto ia = a.id, ib = b.id;
  const auto ca = a.cols(), cb = b.cols();
  return t.record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape<T>& tp, std::uint32_t self) {
    const auto& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g.leftCols(ca));
    if (tp.requires_grad(ib)) tp.accumulate(ib, g.rightCols(cb));
  });
}

/// Sum of all entries, as a 1x1 tensor.
template <typename T>
Var<T> sum(Var<T> x) {
  Matrix<T> out(1, 1);
  out(0, 0) = x.value().sum();
  const auto ix = x.id;
  const auto r = x.rows(), c = x.cols();
  return x.tape->record(std::move(out), {x}, [ix, r, c](Tape<T>& tp, std::uint32_t self) {
    tp.accumulate(ix, Matrix<T>::Constant(r, c, tp.grad(self)(0, 0)));
  });
}

/// x * s for a 1x1 tensor s.
template <typename T>
Var<T> scale(Var<T> x, Var<T> s) {
  Tape<T>& t = detail::tape_of(x, s);
  if (s.rows() != 1 || s.cols() != 1) throw DimensionError("scale: factor must be 1x1");
  Matrix<T> out = x.value() * s.scalar();
  const auto ix = x.id, is = s.id;
  return t.record(std::move(out), {x, s}, [ix, is](Tape<T>& tp, std::uint32_t self) {
    const auto& g = tp.grad(self);
    if (tp.requires_grad(ix)) tp.accumulate(ix, g * tp.value(is)(0, 0));
    if (tp.requires_grad(is)) {
      Matrix<T> gs(1, 1);
      gs(0, 0) = g.cwiseProduct(tp.value(ix)).sum();
      tp.accumulate(is, gs);
    }
  });
}

template <typename T>
Var<T> scale(Var<T> x, T c) {
  Matrix<T> out = x.value() * c;
  const auto ix = x.id;
  return x.tape->record(std::move(out), {x}, [ix, c](Tape<T>& tp, std::uint32_t self) {
    tp.accumulate(ix, tp.grad(self) * c);
  });
}

/// Rows of x picked by index (embedding lookup). Backward scatter-adds.
template <typename T>
Var<T> gather_rows(Var<T> x, std::vector<NodeId> index) {
  const Eigen::Index n = x.rows();
  Matrix<T> out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " out of range [0," +
                           std::to_string(n) + ")");
    }
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(index[i]);
  }
  const auto ix = x.id;
  const auto cols = x.cols();
  return x.tape->record(std::move(out), {x},
                        [ix, n, cols, index = std::move(index)](Tape<T>& tp, std::uint32_t self) {
                          const auto& g = tp.grad(self);
                          Matrix<T> scattered = Matrix<T>::Zero(n, cols);
                          for (std::size_t i = 0; i < index.size(); ++i) {
                            scattered.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
                          }
                          tp.accumulate(ix, scattered);
                        });
}

/// Divides each row by max(||row||, eps).
template <typename T>
Var<T> l2_normalize_rows(Var<T> x, T eps = T(1e-12)) {
  const auto& in = x.value();
  Matrix<T> norms = in.rowwise().norm().cwiseMax(eps);
  Matrix<T> out = norms.col(0).cwiseInverse().asDiagonal() * in;
  const auto ix = x.id;
  return x.tape->record(
      out, {x}, [ix, norms = std::move(norms), eps](Tape<T>& tp, std::uint32_t self) {
        const auto& g = tp.grad(self);
        const auto& y = tp.value(self);
        Matrix<T> gx(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const T nrm = norms(i, 0);
          if (nrm > eps) {
            // d(x/|x|) = (g - y (y·g)) / |x|
            gx.row(i) = (g.row(i) - y.row(i) * y.row(i).dot(g.row(i))) / nrm;
          } else {
            gx.row(i) = g.row(i) / eps;
          }
        }
        tp.accumulate(ix, gx);
      });
}

/// Mean binary cross-entropy over logits (n x 1) against 0/1 labels, in the
/// overflow-free form max(x,0) - x*y + log(1 + exp(-|x|)).
template <typename T>
Var<T> bce_with_logits(Var<T> logits, std::vector<T> labels) {
  if (logits.cols() != 1 || static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw DimensionError("bce_with_logits: logits must be n x 1 with n labels");
  }
  if (labels.empty()) throw DimensionError("bce_with_logits: empty batch");
  const auto& x = logits.value();
  const T n = static_cast<T>(labels.size());
  T total = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T v = x(i, 0);
    total += std::max(v, T(0)) - v * labels[i] + std::log1p(std::exp(-std::abs(v)));
  }
  Matrix<T> out(1, 1);
  out(0, 0) = total / n;
  const auto il = logits.id;
  return logits.tape->record(std::move(out), {logits},
                             [il, n, labels = std::move(labels)](Tape<T>& tp, std::uint32_t self) {
                               const auto& xv = tp.value(il);
                               const T g = tp.grad(self)(0, 0);
                               Matrix<T> gx(xv.rows(), 1);
                               for (Eigen::Index i = 0; i < xv.rows(); ++i) {
                                 gx(i, 0) = g * (detail::stable_sigmoid(xv(i, 0)) - labels[i]) / n;
                               }
                               tp.accumulate(il, gx);
                             });
}

}  // namespace linkgae::ad
