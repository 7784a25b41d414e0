#include "cir/kernels.hpp"

#include <omp.h>

#include <vector>

namespace cir::kernels {
namespace {

constexpr std::size_t kParallelWork = 1u << 15;

template <typename T, bool TA, bool TB>
void gemm_rows(std::size_t row_begin, std::size_t row_end, std::size_t m,
               std::size_t n, std::size_t k, const T* a, const T* b, T beta,
               T* c, T* acc) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    if constexpr (TB) {
      // B stored n x k: each output is a contiguous dot product.
      for (std::size_t j = 0; j < n; ++j) {
        T sum = T(0);
        for (std::size_t p = 0; p < k; ++p) {
          const T av = TA ? a[p * m + i] : a[i * k + p];
          sum += av * b[j * k + p];
        }
        acc[j] = sum;
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) acc[j] = T(0);
      for (std::size_t p = 0; p < k; ++p) {
        const T av = TA ? a[p * m + i] : a[i * k + p];
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
      }
    }
    T* crow = c + i * n;
    if (beta == T(0)) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
    } else {
      for (std::size_t j = 0; j < n; ++j) crow[j] = beta * crow[j] + acc[j];
    }
  }
}

template <typename T>
using RowKernel = void (*)(std::size_t, std::size_t, std::size_t, std::size_t,
                           std::size_t, const T*, const T*, T, T*, T*);

template <typename T>
RowKernel<T> pick(bool ta, bool tb) {
  if (ta) return tb ? gemm_rows<T, true, true> : gemm_rows<T, true, false>;
  return tb ? gemm_rows<T, false, true> : gemm_rows<T, false, false>;
}

}  // namespace

template <typename T>
void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const T* a, const T* b, T beta, T* c) {
  std::vector<T> acc(n);
  pick<T>(trans_a, trans_b)(0, m, m, n, k, a, b, beta, c, acc.data());
}

template <typename T>
void gemm_parallel(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                   std::size_t k, const T* a, const T* b, T beta, T* c) {
  const auto kernel = pick<T>(trans_a, trans_b);
  const auto rows = static_cast<long long>(m);
#pragma omp parallel
  {
    std::vector<T> acc(n);
#pragma omp for schedule(static)
    for (long long i = 0; i < rows; ++i) {
      const auto r = static_cast<std::size_t>(i);
      kernel(r, r + 1, m, n, k, a, b, beta, c, acc.data());
    }
  }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T beta, T* c) {
  if (m > 1 && m * n * k >= kParallelWork && !omp_in_parallel() &&
      omp_get_max_threads() > 1) {
    gemm_parallel(trans_a, trans_b, m, n, k, a, b, beta, c);
  } else {
    gemm_serial(trans_a, trans_b, m, n, k, a, b, beta, c);
  }
}

template <typename T>
void dot_scores_serial(std::size_t nq, std::size_t nc, std::size_t d,
                       const T* queries, const T* catalog, T* scores) {
  gemm_serial(false, true, nq, nc, d, queries, catalog, T(0), scores);
}

template <typename T>
void dot_scores_parallel(std::size_t nq, std::size_t nc, std::size_t d,
                         const T* queries, const T* catalog, T* scores) {
  gemm_parallel(false, true, nq, nc, d, queries, catalog, T(0), scores);
}

void set_num_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

#define CIR_INSTANTIATE(T)                                                     \
  template void gemm_serial<T>(bool, bool, std::size_t, std::size_t,           \
                               std::size_t, const T*, const T*, T, T*);        \
  template void gemm_parallel<T>(bool, bool, std::size_t, std::size_t,         \
                                 std::size_t, const T*, const T*, T, T*);      \
  template void gemm<T>(bool, bool, std::size_t, std::size_t, std::size_t,     \
                        const T*, const T*, T, T*);                            \
  template void dot_scores_serial<T>(std::size_t, std::size_t, std::size_t,    \
                                     const T*, const T*, T*);                  \
  template void dot_scores_parallel<T>(std::size_t, std::size_t, std::size_t,  \
                                       const T*, const T*, T*);

CIR_INSTANTIATE(float)
CIR_INSTANTIATE(double)
#undef CIR_INSTANTIATE

}  // namespace cir::kernels
