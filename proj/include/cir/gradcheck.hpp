#pragma once

#include <functional>

#include "cir/tensor.hpp"

namespace cir {

// Scalar function of x. When grad is non-null the function must also write
// its analytic gradient (same shape as x) into it.
using DifferentiableFn = std::function<double(const Tensor64& x, Tensor64* grad)>;

// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8), where numeric is the central difference with step h.
double finite_difference_check(const DifferentiableFn& f, const Tensor64& x,
                               double h = 1e-5);

}  // namespace cir
