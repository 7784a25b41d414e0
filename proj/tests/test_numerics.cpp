#include <doctest.h>

#include <cmath>
#include <limits>

#include "cir/adam.hpp"
#include "cir/error.hpp"
#include "cir/gradcheck.hpp"
#include "cir/kernels.hpp"
#include "cir/ops.hpp"
#include "support.hpp"

using namespace cir;
using support::random_tensor;

namespace {

// Weighted sum <w, op(x)> as a scalar test function.
double weighted(const Tensor64& y, const Tensor64& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace

TEST_CASE("matmul examples") {
  const auto id = Tensor::matrix({{1, 0}, {0, 1}});
  const auto m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(matmul(id, m) == m);
  CHECK(matmul(Tensor::matrix({{1, 0}}), Tensor::matrix({{0}, {5}})) == Tensor::matrix({{0}}));
  CHECK_THROWS_AS(matmul(m, Tensor::matrix({{1, 2, 3}})), Error);
}

TEST_CASE("matmul gradient") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng = substream(seed, "matmul");
    const auto b = random_tensor<double>({4, 2}, rng);
    const auto w = random_tensor<double>({3, 2}, rng);
    DifferentiableFn f = [&](const Tensor64& x, Tensor64* g) {
      const Tensor64 a({3, 4}, x.storage());
      if (g) *g = Tensor64({12}, matmul_backward(a, b, w).da.storage());
      return weighted(matmul(a, b), w);
    };
    CHECK(finite_difference_check(f, random_tensor<double>({12}, rng)) < 1e-4);
    const auto a = random_tensor<double>({3, 4}, rng);
    DifferentiableFn fb = [&](const Tensor64& x, Tensor64* g) {
      const Tensor64 bb({4, 2}, x.storage());
      if (g) *g = Tensor64({8}, matmul_backward(a, bb, w).db.storage());
      return weighted(matmul(a, bb), w);
    };
    CHECK(finite_difference_check(fb, random_tensor<double>({8}, rng)) < 1e-4);
  }
}

TEST_CASE("matmul associativity in 32-bit") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = substream(seed, "assoc");
    const auto a = random_tensor<float>({5, 7}, rng);
    const auto b = random_tensor<float>({7, 3}, rng);
    const auto c = random_tensor<float>({3, 6}, rng);
    const auto left = matmul(matmul(a, b), c);
    const auto right = matmul(a, matmul(b, c));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < left.size(); ++i) {
      num += std::pow(double(left[i]) - right[i], 2);
      den += std::pow(double(left[i]), 2);
    }
    CHECK(std::sqrt(num / den) < 1e-4);
  }
}

TEST_CASE("serial and parallel gemm agree bitwise") {
  Rng rng = substream(3, "gemm");
  for (auto [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1}, {17, 33, 65}, {64, 128, 96}}) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        const auto a = random_tensor<float>({ta ? k : m, ta ? m : k}, rng);
        const auto b = random_tensor<float>({tb ? n : k, tb ? k : n}, rng);
        Tensor c1({m, n}, 0.5f), c2({m, n}, 0.5f);
        kernels::gemm_serial(ta, tb, m, n, k, a.data().data(), b.data().data(), 1.0f, c1.data().data());
        kernels::gemm_parallel(ta, tb, m, n, k, a.data().data(), b.data().data(), 1.0f, c2.data().data());
        CHECK(c1 == c2);
      }
    }
  }
  const auto q = random_tensor<float>({13, 16}, rng);
  const auto c = random_tensor<float>({29, 16}, rng);
  std::vector<float> s1(13 * 29), s2(13 * 29);
  kernels::dot_scores_serial(13, 29, 16, q.data().data(), c.data().data(), s1.data());
  kernels::dot_scores_parallel(13, 29, 16, q.data().data(), c.data().data(), s2.data());
  CHECK(s1 == s2);
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  try {
    kernels::parallel_for(100, [](std::size_t i) {
      if (i % 7 == 3) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "3");
  }
}

TEST_CASE("l2_normalize") {
  const auto y = l2_normalize(Tensor::vector({3, 4}));
  CHECK(y[0] == doctest::Approx(0.6));
  CHECK(y[1] == doctest::Approx(0.8));
  CHECK(l2_normalize(Tensor64::vector({0.6, 0.8})) == l2_normalize(l2_normalize(Tensor64::vector({0.6, 0.8}))));
  CHECK_THROWS_AS(l2_normalize(Tensor::vector({0, 0})), Error);
  try {
    l2_normalize(Tensor::vector({0, 0}));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegenerate);
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = substream(seed, "l2");
    const auto w = random_tensor<double>({8}, rng);
    DifferentiableFn f = [&](const Tensor64& x, Tensor64* g) {
      if (g) *g = l2_normalize_backward(x, w);
      return weighted(l2_normalize(x), w);
    };
    CHECK(finite_difference_check(f, random_tensor<double>({8}, rng)) < 1e-4);
  }
}

TEST_CASE("layer_norm") {
  const auto ones = Tensor::vector({1, 1, 1});
  const auto zeros = Tensor::vector({0, 0, 0});
  const auto y = layer_norm(Tensor::matrix({{2, 2, 2}}), ones, zeros, 1e-5f);
  for (float v : y.data()) CHECK(v == 0.0f);
  const auto z = layer_norm(Tensor64::matrix({{1, -1}}), Tensor64::vector({1, 1}),
                            Tensor64::vector({0, 0}), 1e-12);
  CHECK(z(0, 0) == doctest::Approx(1.0));
  CHECK(z(0, 1) == doctest::Approx(-1.0));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = substream(seed, "ln");
    const auto gamma = random_tensor<double>({6}, rng);
    const auto beta = random_tensor<double>({6}, rng);
    const auto w = random_tensor<double>({4, 6}, rng);
    DifferentiableFn fx = [&](const Tensor64& x, Tensor64* g) {
      LayerNormCache<double> cache;
      const Tensor64 in({4, 6}, x.storage());
      const auto out = layer_norm(in, gamma, beta, 1e-5, &cache);
      if (g) *g = Tensor64({24}, layer_norm_backward(cache, gamma, w).dx.storage());
      return weighted(out, w);
    };
    CHECK(finite_difference_check(fx, random_tensor<double>({24}, rng)) < 1e-4);
    const auto x = random_tensor<double>({4, 6}, rng);
    DifferentiableFn fg = [&](const Tensor64& gm, Tensor64* g) {
      LayerNormCache<double> cache;
      const auto out = layer_norm(x, gm, beta, 1e-5, &cache);
      if (g) *g = layer_norm_backward(cache, gm, w).dgamma;
      return weighted(out, w);
    };
    CHECK(finite_difference_check(fg, gamma) < 1e-4);
  }
}

TEST_CASE("softmax_rows") {
  const auto y = softmax_rows(Tensor::matrix({{2, 2, 2, 2}}));
  for (float v : y.data()) CHECK(v == doctest::Approx(0.25));
  const auto s = softmax_rows(Tensor::matrix({{0, 1000}}));
  CHECK(s(0, 0) == doctest::Approx(0.0));
  CHECK(s(0, 1) == doctest::Approx(1.0));
  CHECK(s.all_finite());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = substream(seed, "softmax");
    const auto x = random_tensor<double>({3, 5}, rng, 3.0);
    const auto p = softmax_rows(x);
    for (std::size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (double v : p.row(r)) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    const auto w = random_tensor<double>({3, 5}, rng);
    DifferentiableFn f = [&](const Tensor64& in, Tensor64* g) {
      const auto out = softmax_rows(Tensor64({3, 5}, in.storage()));
      if (g) *g = Tensor64({15}, softmax_rows_backward(out, w).storage());
      return weighted(out, w);
    };
    CHECK(finite_difference_check(f, Tensor64({15}, x.storage())) < 1e-4);
  }
}

TEST_CASE("gelu gradient") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = substream(seed, "gelu");
    const auto w = random_tensor<double>({10}, rng);
    DifferentiableFn f = [&](const Tensor64& x, Tensor64* g) {
      if (g) *g = gelu_backward(x, w);
      return weighted(gelu(x), w);
    };
    CHECK(finite_difference_check(f, random_tensor<double>({10}, rng, 2.0)) < 1e-4);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient is the identity") {
    ParamTensor<float> p(Tensor::vector({1.5f, -2.0f}));
    AdamState<float> st(p.value.shape());
    const auto before = p.value;
    adam_step(p, st, 0.1);
    CHECK(p.value == before);
    CHECK(st.step_count == 1);
  }
  SUBCASE("first step moves by lr * sign(g)") {
    ParamTensor<double> p(Tensor64::vector({0.0, 0.0, 0.0}), 10.0);
    p.grad = Tensor64::vector({3.0, -0.5, 1e-3});
    AdamState<double> st(p.value.shape());
    adam_step(p, st, 1e-3);
    CHECK(p.value[0] == doctest::Approx(-1e-2).epsilon(1e-6));
    CHECK(p.value[1] == doctest::Approx(1e-2).epsilon(1e-6));
    CHECK(p.value[2] == doctest::Approx(-1e-2).epsilon(1e-4));
  }
  SUBCASE("quadratic converges and matches a scalar recursion") {
    ParamTensor<double> p(Tensor64::vector({1.0, 1.0}));
    AdamState<double> st(p.value.shape());
    double w = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 200; ++t) {
      for (std::size_t i = 0; i < 2; ++i) p.grad[i] = 2.0 * p.value[i];
      adam_step(p, st, 0.1);
      const double g = 2.0 * w;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      w -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(std::hypot(p.value[0], p.value[1]) < 0.1);
    CHECK(p.value[0] == doctest::Approx(w).epsilon(1e-9));
  }
  SUBCASE("non-finite gradient is a numeric error and changes nothing") {
    ParamTensor<float> p(Tensor::vector({1.0f}));
    p.grad[0] = std::numeric_limits<float>::quiet_NaN();
    AdamState<float> st(p.value.shape());
    try {
      adam_step(p, st, 0.1);
      FAIL("expected a numeric error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kNumeric);
    }
    CHECK(p.value[0] == 1.0f);
    CHECK(st.step_count == 0);
  }
}

TEST_CASE("finite_difference_check on closed forms") {
  DifferentiableFn sum = [](const Tensor64& x, Tensor64* g) {
    if (g) *g = Tensor64(x.shape(), 1.0);
    double s = 0.0;
    for (double v : x.data()) s += v;
    return s;
  };
  DifferentiableFn sq = [](const Tensor64& x, Tensor64* g) {
    if (g) {
      *g = x;
      for (auto& v : g->storage()) v *= 2.0;
    }
    double s = 0.0;
    for (double v : x.data()) s += v * v;
    return s;
  };
  Rng rng(5);
  const auto x = random_tensor<double>({7}, rng);
  CHECK(finite_difference_check(sum, x) < 1e-8);
  CHECK(finite_difference_check(sq, x) < 1e-8);
}
