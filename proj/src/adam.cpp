#include "cir/adam.hpp"

#include <cmath>

namespace cir {

template <typename T>
void adam_step(ParamTensor<T>& param, AdamState<T>& state, double base_lr) {
  require(param.lr_multiplier > T(0), ErrorKind::kContract,
          "lr_multiplier must be positive");
  require(param.grad.shape() == param.value.shape() &&
              state.m.shape() == param.value.shape() &&
              state.v.shape() == param.value.shape(),
          ErrorKind::kDimension, "adam_step: state shape does not match param");
  if (!param.grad.all_finite()) {
    fail(ErrorKind::kNumeric, "adam_step: non-finite gradient");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double lr = base_lr * static_cast<double>(param.lr_multiplier);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const T g = param.grad[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const double m_hat = static_cast<double>(state.m[i]) / bc1;
    const double v_hat = static_cast<double>(state.v[i]) / bc2;
    param.value[i] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + state.eps));
  }
}

template void adam_step(ParamTensor<float>&, AdamState<float>&, double);
template void adam_step(ParamTensor<double>&, AdamState<double>&, double);

}  // namespace cir
