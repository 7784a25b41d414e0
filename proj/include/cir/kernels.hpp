#pragma once

#include <cstddef>

namespace cir::kernels {

// Row-major GEMM: C[m x n] = beta * C + op(A) * op(B), where op(A) is m x k
// and op(B) is k x n. With trans_a, A is stored k x m; with trans_b, B is
// stored n x k.
//
// Every output element is accumulated over k in ascending order into a local
// sum before being combined with beta * C, in both the serial and parallel
// variants. The two therefore agree bitwise for any thread count.
template <typename T>
void gemm_serial(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, const T* a, const T* b, T beta, T* c);

template <typename T>
void gemm_parallel(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                   std::size_t k, const T* a, const T* b, T beta, T* c);

// Picks the parallel kernel for large problems outside an enclosing parallel
// region, the serial one otherwise.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T beta, T* c);

// scores[q, c] = <queries[q], catalog[c]> for row-major queries (nq x d) and
// catalog (nc x d).
template <typename T>
void dot_scores_serial(std::size_t nq, std::size_t nc, std::size_t d,
                       const T* queries, const T* catalog, T* scores);

template <typename T>
void dot_scores_parallel(std::size_t nq, std::size_t nc, std::size_t d,
                         const T* queries, const T* catalog, T* scores);

void set_num_threads(int n);
int max_threads();

}  // namespace cir::kernels

#include <exception>
#include <vector>

namespace cir::kernels {

// Runs body(i) for i in [0, n) across OpenMP threads. Exceptions are captured
// per index and the lowest-index one is rethrown after the loop, so failures
// surface deterministically.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cir::kernels

namespace cir {

// Execution policy for per-query loops; both produce identical results.
enum class Exec { kSerial, kParallel };

}  // namespace cir
