#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "linkgae/autograd.hpp"

namespace linkgae::ad {

/// Adam moments for a fixed parameter list. β1, β2 and ε are the usual
/// defaults and are not tuned.
template <typename T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix<T>> m;
  std::vector<Matrix<T>> v;

  AdamState() = default;
  explicit AdamState(double learning_rate) : lr(learning_rate) {}
};

/// Bias-corrected Adam update over every trainable parameter that received a
/// gradient; gradients are zeroed afterwards.
template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params) {
  if (state.m.empty()) {
    for (const Parameter<T>* p : params) {
      state.m.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw UsageError("adam_step: parameter list changed between steps");
  }
  bool any = false;
  for (const Parameter<T>* p : params) any = any || (p->trainable && p->has_grad);
  if (!any) throw UsageError("adam_step: no parameter has a gradient (call backward first)");

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(state.lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(state.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    if (!p.trainable || !p.has_grad) continue;
    if (state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols()) {
      throw UsageError("adam_step: moment shape does not match parameter " + p.name);
    }
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    auto g = p.grad.array();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.square();
    // θ -= lr * m̂ / (sqrt(v̂) + ε)
    p.value.array() -= step_size * m / (v.sqrt() * inv_sqrt_c2 + eps);
    p.zero_grad();
  }
}

template <typename T>
void adam_step(AdamState<T>& state, std::vector<Parameter<T>*>& params) {
  adam_step(state, std::span<Parameter<T>* const>(params.data(), params.size()));
}

}  // namespace linkgae::ad
