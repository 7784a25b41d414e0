#pragma once

#include <vector>

#include "cir/tensor.hpp"

// Differentiable building blocks. Each op has an explicit forward and a
// backward that maps the upstream gradient to input gradients; there is no
// tape. Only row-wise bias addition broadcasts.
namespace cir {

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
struct MatmulGrads {
  BasicTensor<T> da;
  BasicTensor<T> db;
};

template <typename T>
MatmulGrads<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                               const BasicTensor<T>& dc);

// c = a * b^T.
template <typename T>
BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b);

// acc += op(a) * op(b), shapes checked. Used to accumulate weight gradients.
template <typename T>
void matmul_accumulate(bool trans_a, bool trans_b, const BasicTensor<T>& a,
                       const BasicTensor<T>& b, BasicTensor<T>& acc);

// Throws a degenerate-input error when ||v|| == 0.
template <typename T>
BasicTensor<T> l2_normalize(const BasicTensor<T>& v);

// Gradient of v / ||v|| given the input v and upstream gradient dy.
template <typename T>
BasicTensor<T> l2_normalize_backward(const BasicTensor<T>& v,
                                     const BasicTensor<T>& dy);

template <typename T>
struct LayerNormCache {
  BasicTensor<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, T eps,
                          LayerNormCache<T>* cache = nullptr);

template <typename T>
struct LayerNormGrads {
  BasicTensor<T> dx;
  BasicTensor<T> dgamma;
  BasicTensor<T> dbeta;
};

template <typename T>
LayerNormGrads<T> layer_norm_backward(const LayerNormCache<T>& cache,
                                      const BasicTensor<T>& gamma,
                                      const BasicTensor<T>& dy);

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

// Takes the softmax output y, not the logits.
template <typename T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y,
                                     const BasicTensor<T>& dy);

// x[r, :] += bias for every row.
template <typename T>
void add_row_bias(BasicTensor<T>& x, const BasicTensor<T>& bias);

// Column sums of dy accumulated into acc (the bias gradient).
template <typename T>
void accumulate_column_sums(const BasicTensor<T>& dy, BasicTensor<T>& acc);

// tanh approximation of GELU.
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy);

template <typename T>
T dot(std::span<const T> a, std::span<const T> b);

template <typename T>
T norm2(std::span<const T> v);

template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y);

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* what);

}  // namespace cir
