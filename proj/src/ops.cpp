#include "cir/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cir/kernels.hpp"

namespace cir {

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* what) {
  if (!t.all_finite()) {
    fail(ErrorKind::kNumeric, std::string(what) + ": non-finite value");
  }
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorKind::kDimension,
          "matmul expects rank-2 operands");
  require(a.cols() == b.rows(), ErrorKind::kDimension,
          "matmul inner extents differ: " + shape_string(a.shape()) + " * " +
              shape_string(b.shape()));
  BasicTensor<T> c({a.rows(), b.cols()});
  kernels::gemm(false, false, a.rows(), b.cols(), a.cols(), a.data().data(),
                b.data().data(), T(0), c.data().data());
  require_finite(c, "matmul");
  return c;
}

template <typename T>
BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.cols(),
          ErrorKind::kDimension,
          "matmul_bt shape mismatch: " + shape_string(a.shape()) + " * " +
              shape_string(b.shape()) + "^T");
  BasicTensor<T> c({a.rows(), b.rows()});
  kernels::gemm(false, true, a.rows(), b.rows(), a.cols(), a.data().data(),
                b.data().data(), T(0), c.data().data());
  require_finite(c, "matmul_bt");
  return c;
}

template <typename T>
void matmul_accumulate(bool trans_a, bool trans_b, const BasicTensor<T>& a,
                       const BasicTensor<T>& b, BasicTensor<T>& acc) {
  require(a.rank() == 2 && b.rank() == 2 && acc.rank() == 2,
          ErrorKind::kDimension, "matmul_accumulate expects rank-2 operands");
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  require(k == kb && acc.rows() == m && acc.cols() == n, ErrorKind::kDimension,
          "matmul_accumulate shape mismatch");
  kernels::gemm(trans_a, trans_b, m, n, k, a.data().data(), b.data().data(),
                T(1), acc.data().data());
}

template <typename T>
MatmulGrads<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                               const BasicTensor<T>& dc) {
  require_shape(dc, {a.rows(), b.cols()}, "matmul_backward upstream");
  MatmulGrads<T> g{BasicTensor<T>(a.shape()), BasicTensor<T>(b.shape())};
  matmul_accumulate(false, true, dc, b, g.da);
  matmul_accumulate(true, false, a, dc, g.db);
  return g;
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T norm2(std::span<const T> v) {
  return std::sqrt(dot(v, v));
}

template <typename T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

template <typename T>
BasicTensor<T> l2_normalize(const BasicTensor<T>& v) {
  const T n = norm2(v.data());
  if (!(n > T(0))) fail(ErrorKind::kDegenerate, "l2_normalize of a zero vector");
  require(std::isfinite(n), ErrorKind::kNumeric, "l2_normalize: non-finite input");
  BasicTensor<T> y = v;
  for (auto& x : y.data()) x /= n;
  return y;
}

template <typename T>
BasicTensor<T> l2_normalize_backward(const BasicTensor<T>& v,
                                     const BasicTensor<T>& dy) {
  require(v.shape() == dy.shape(), ErrorKind::kDimension,
          "l2_normalize_backward shape mismatch");
  const T n = norm2(v.data());
  if (!(n > T(0))) fail(ErrorKind::kDegenerate, "l2_normalize of a zero vector");
  // d(v/n) = (dy - y <y, dy>) / n
  T ydy = T(0);
  for (std::size_t i = 0; i < v.size(); ++i) ydy += (v[i] / n) * dy[i];
  BasicTensor<T> dv(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    dv[i] = (dy[i] - (v[i] / n) * ydy) / n;
  }
  return dv;
}

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, T eps,
                          LayerNormCache<T>* cache) {
  require(eps > T(0), ErrorKind::kContract, "layer_norm eps must be positive");
  require(x.rank() == 2, ErrorKind::kDimension, "layer_norm expects rank 2");
  const std::size_t rows = x.rows(), d = x.cols();
  require_shape(gamma, {d}, "layer_norm gamma");
  require_shape(beta, {d}, "layer_norm beta");
  BasicTensor<T> y(x.shape());
  BasicTensor<T> xhat(x.shape());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto xr = x.row(r);
    T mean = T(0);
    for (auto v : xr) mean += v;
    mean /= static_cast<T>(d);
    T var = T(0);
    for (auto v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xr[c] - mean) * rstd[r];
      y(r, c) = xhat(r, c) * gamma[c] + beta[c];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename T>
LayerNormGrads<T> layer_norm_backward(const LayerNormCache<T>& cache,
                                      const BasicTensor<T>& gamma,
                                      const BasicTensor<T>& dy) {
  const auto& xhat = cache.xhat;
  require(dy.shape() == xhat.shape(), ErrorKind::kDimension,
          "layer_norm_backward shape mismatch");
  const std::size_t rows = xhat.rows(), d = xhat.cols();
  LayerNormGrads<T> g{BasicTensor<T>(xhat.shape()), BasicTensor<T>({d}),
                      BasicTensor<T>({d})};
  std::vector<T> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
    for (std::size_t c = 0; c < d; ++c) {
      dxhat[c] = dy(r, c) * gamma[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat(r, c);
      g.dgamma[c] += dy(r, c) * xhat(r, c);
      g.dbeta[c] += dy(r, c);
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    for (std::size_t c = 0; c < d; ++c) {
      g.dx(r, c) =
          cache.rstd[r] * (dxhat[c] - mean_dxhat - xhat(r, c) * mean_dxhat_xhat);
    }
  }
  return g;
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
  require(x.rank() == 2, ErrorKind::kDimension, "softmax_rows expects rank 2");
  BasicTensor<T> y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto xr = x.row(r);
    auto yr = y.row(r);
    const T mx = *std::max_element(xr.begin(), xr.end());
    T sum = T(0);
    for (std::size_t c = 0; c < xr.size(); ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (auto& v : yr) v /= sum;
  }
  require_finite(y, "softmax_rows");
  return y;
}

template <typename T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y,
                                     const BasicTensor<T>& dy) {
  require(y.shape() == dy.shape(), ErrorKind::kDimension,
          "softmax_rows_backward shape mismatch");
  BasicTensor<T> dx(y.shape());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const auto yr = y.row(r);
    const auto dyr = dy.row(r);
    const T s = dot(yr, dyr);
    auto dxr = dx.row(r);
    for (std::size_t c = 0; c < yr.size(); ++c) dxr[c] = yr[c] * (dyr[c] - s);
  }
  return dx;
}

template <typename T>
void add_row_bias(BasicTensor<T>& x, const BasicTensor<T>& bias) {
  require_shape(bias, {x.cols()}, "add_row_bias");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) xr[c] += bias[c];
  }
}

template <typename T>
void accumulate_column_sums(const BasicTensor<T>& dy, BasicTensor<T>& acc) {
  require_shape(acc, {dy.cols()}, "accumulate_column_sums");
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const auto dr = dy.row(r);
    for (std::size_t c = 0; c < dr.size(); ++c) acc[c] += dr[c];
  }
}

namespace {
template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = static_cast<T>(0.044715);
}  // namespace

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    const T u = kGeluC<T> * (v + kGeluA<T> * v * v * v);
    y[i] = T(0.5) * v * (T(1) + std::tanh(u));
  }
  return y;
}

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy) {
  require(x.shape() == dy.shape(), ErrorKind::kDimension,
          "gelu_backward shape mismatch");
  BasicTensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    const T u = kGeluC<T> * (v + kGeluA<T> * v * v * v);
    const T th = std::tanh(u);
    const T du = kGeluC<T> * (T(1) + T(3) * kGeluA<T> * v * v);
    const T grad = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
    dx[i] = dy[i] * grad;
  }
  return dx;
}

#define CIR_INSTANTIATE(T)                                                     \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template MatmulGrads<T> matmul_backward(                                     \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> matmul_bt(const BasicTensor<T>&,                     \
                                    const BasicTensor<T>&);                    \
  template void matmul_accumulate(bool, bool, const BasicTensor<T>&,           \
                                  const BasicTensor<T>&, BasicTensor<T>&);     \
  template BasicTensor<T> l2_normalize(const BasicTensor<T>&);                 \
  template BasicTensor<T> l2_normalize_backward(const BasicTensor<T>&,         \
                                                const BasicTensor<T>&);        \
  template BasicTensor<T> layer_norm(const BasicTensor<T>&,                    \
                                     const BasicTensor<T>&,                    \
                                     const BasicTensor<T>&, T,                 \
                                     LayerNormCache<T>*);                      \
  template LayerNormGrads<T> layer_norm_backward(                              \
      const LayerNormCache<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                 \
  template BasicTensor<T> softmax_rows_backward(const BasicTensor<T>&,         \
                                                const BasicTensor<T>&);        \
  template void add_row_bias(BasicTensor<T>&, const BasicTensor<T>&);          \
  template void accumulate_column_sums(const BasicTensor<T>&,                  \
                                       BasicTensor<T>&);                       \
  template BasicTensor<T> gelu(const BasicTensor<T>&);                         \
  template BasicTensor<T> gelu_backward(const BasicTensor<T>&,                 \
                                        const BasicTensor<T>&);                \
  template T dot(std::span<const T>, std::span<const T>);                      \
  template T norm2(std::span<const T>);                                        \
  template void axpy(T, std::span<const T>, std::span<T>);                     \
  template void require_finite(const BasicTensor<T>&, const char*);

CIR_INSTANTIATE(float)
CIR_INSTANTIATE(double)
#undef CIR_INSTANTIATE

}  // namespace cir
