#pragma once

#include <cstdint>

#include "cir/tensor.hpp"

namespace cir {

// A trainable tensor with its gradient accumulator. lr_multiplier scales the
// optimizer's base learning rate for this parameter only.
template <typename T>
struct ParamTensor {
  BasicTensor<T> value;
  BasicTensor<T> grad;
  T lr_multiplier = T(1);

  ParamTensor() = default;
  explicit ParamTensor(BasicTensor<T> v, T lr_mult = T(1))
      : value(std::move(v)), grad(value.shape()), lr_multiplier(lr_mult) {}

  void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
struct AdamState {
  BasicTensor<T> m;
  BasicTensor<T> v;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(const std::vector<std::size_t>& shape)
      : m(shape), v(shape) {}
};

// One bias-corrected Adam update with lr = base_lr * param.lr_multiplier.
// Throws a numeric error, leaving param and state untouched, when the
// gradient holds NaN or Inf.
template <typename T>
void adam_step(ParamTensor<T>& param, AdamState<T>& state, double base_lr);

}  // namespace cir
