#include "cir/attention.hpp"

#include <cmath>

namespace cir {

const char* block_tensor_name(std::size_t slot) {
  static const char* kNames[kNumBlockTensors] = {
      "attn.wq", "attn.bq", "attn.wk", "attn.wv", "attn.bv",
      "attn.wo", "attn.bo", "ln1.gamma", "ln1.beta", "ffn.w1", "ffn.b1",
      "ffn.w2", "ffn.b2", "ln2.gamma", "ln2.beta", "pool.w", "pool.b"};
  return slot < kNumBlockTensors ? kNames[slot] : "?";
}

namespace {

template <typename T>
std::vector<std::size_t> slot_shape(const AttentionBlockParams<T>& b, std::size_t slot) {
  const std::size_t d = b.d_model, f = b.ffn_dim, o = b.out_dim;
  switch (slot) {
    case kWq: case kWk: case kWv: case kWo: return {d, d};
    case kW1: return {d, f};
    case kB1: return {f};
    case kW2: return {f, d};
    case kWpool: return {d, o};
    case kBpool: return {o};
    default: return {d};
  }
}

bool is_weight(std::size_t slot) {
  return slot == kWq || slot == kWk || slot == kWv || slot == kWo || slot == kW1 ||
         slot == kW2 || slot == kWpool;
}

// x W + b for x: L x in, W: in x out.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>& b) {
  BasicTensor<T> y = matmul(x, w);
  add_row_bias(y, b);
  return y;
}

// Accumulates dW, db and returns dx.
template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                               const BasicTensor<T>& dy, BasicTensor<T>& dw,
                               BasicTensor<T>& db) {
  matmul_accumulate(true, false, x, dy, dw);
  accumulate_column_sums(dy, db);
  return matmul_bt(dy, w);
}

template <typename T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t width) {
  BasicTensor<T> out({x.rows(), width});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = x(r, begin + c);
  }
  return out;
}

template <typename T>
void put_cols(BasicTensor<T>& dst, const BasicTensor<T>& src, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) = src(r, c);
  }
}

template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
BlockTensors<T> AttentionBlockParams<T>::zeros() const {
  BlockTensors<T> out;
  for (std::size_t i = 0; i < kNumBlockTensors; ++i) out[i] = BasicTensor<T>(p[i].value.shape());
  return out;
}

template <typename T>
AttentionBlockParams<T> init_attention_block(std::size_t d_model, std::size_t heads,
                                             std::size_t ffn_dim, std::size_t out_dim,
                                             Rng& rng, double init_std) {
  require(heads > 0 && d_model % heads == 0, ErrorKind::kConfig,
          "d_model must be divisible by the number of heads");
  require(ffn_dim > 0 && out_dim > 0, ErrorKind::kConfig, "block dims must be positive");
  AttentionBlockParams<T> b;
  b.d_model = d_model;
  b.heads = heads;
  b.ffn_dim = ffn_dim;
  b.out_dim = out_dim;
  for (std::size_t slot = 0; slot < kNumBlockTensors; ++slot) {
    BasicTensor<T> value(slot_shape(b, slot));
    if (is_weight(slot)) {
      for (auto& x : value.data()) x = static_cast<T>(standard_normal(rng) * init_std);
    } else if (slot == kLn1Gamma || slot == kLn2Gamma) {
      value.fill(T(1));
    }
    b.p[slot] = ParamTensor<T>(std::move(value));
  }
  return b;
}

template <typename T>
BasicTensor<T> attention_block(const AttentionBlockParams<T>& P, const BasicTensor<T>& seq,
                               BlockCache<T>* cache) {
  require(seq.rank() == 2 && seq.rows() >= 1, ErrorKind::kContract,
          "attention_block needs at least one token");
  require(seq.cols() == P.d_model, ErrorKind::kDimension,
          "attention_block token width " + std::to_string(seq.cols()) +
              " != d_model " + std::to_string(P.d_model));
  const std::size_t L = seq.rows(), hd = P.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  BasicTensor<T> q = linear(seq, P[kWq], P[kBq]);
  BasicTensor<T> k = matmul(seq, P[kWk]);
  BasicTensor<T> v = linear(seq, P[kWv], P[kBv]);
  BasicTensor<T> attn({L, P.d_model});
  std::vector<BasicTensor<T>> probs;
  probs.reserve(P.heads);
  for (std::size_t h = 0; h < P.heads; ++h) {
    const auto qh = slice_cols(q, h * hd, hd);
    const auto kh = slice_cols(k, h * hd, hd);
    const auto vh = slice_cols(v, h * hd, hd);
    BasicTensor<T> s = matmul_bt(qh, kh);
    for (auto& x : s.data()) x *= scale;
    BasicTensor<T> p = softmax_rows(s);
    put_cols(attn, matmul(p, vh), h * hd);
    probs.push_back(std::move(p));
  }
  BasicTensor<T> r1 = linear(attn, P[kWo], P[kBo]);
  add_into(r1, seq);
  LayerNormCache<T> ln1;
  BasicTensor<T> y1 = layer_norm(r1, P[kLn1Gamma], P[kLn1Beta], P.ln_eps, &ln1);
  BasicTensor<T> pre = linear(y1, P[kW1], P[kB1]);
  BasicTensor<T> act = gelu(pre);
  BasicTensor<T> r2 = linear(act, P[kW2], P[kB2]);
  add_into(r2, y1);
  LayerNormCache<T> ln2;
  BasicTensor<T> y2 = layer_norm(r2, P[kLn2Gamma], P[kLn2Beta], P.ln_eps, &ln2);
  if (cache) {
    cache->x = seq;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->attn = std::move(attn);
    cache->ln1 = std::move(ln1);
    cache->y1 = std::move(y1);
    cache->ffn_pre = std::move(pre);
    cache->ffn_act = std::move(act);
    cache->ln2 = std::move(ln2);
  }
  return y2;
}

template <typename T>
BasicTensor<T> attention_block_backward(const AttentionBlockParams<T>& P,
                                        const BlockCache<T>& C, const BasicTensor<T>& dy,
                                        BlockTensors<T>& g) {
  const std::size_t L = C.x.rows(), hd = P.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  auto ln2 = layer_norm_backward(C.ln2, P[kLn2Gamma], dy);
  add_into(g[kLn2Gamma], ln2.dgamma);
  add_into(g[kLn2Beta], ln2.dbeta);
  // r2 = y1 + W2(gelu(W1 y1))
  BasicTensor<T> dy1 = ln2.dx;
  BasicTensor<T> dact = linear_backward(C.ffn_act, P[kW2], ln2.dx, g[kW2], g[kB2]);
  BasicTensor<T> dpre = gelu_backward(C.ffn_pre, dact);
  add_into(dy1, linear_backward(C.y1, P[kW1], dpre, g[kW1], g[kB1]));

  auto ln1 = layer_norm_backward(C.ln1, P[kLn1Gamma], dy1);
  add_into(g[kLn1Gamma], ln1.dgamma);
  add_into(g[kLn1Beta], ln1.dbeta);
  // r1 = x + Wo(attn)
  BasicTensor<T> dx = ln1.dx;
  BasicTensor<T> dattn = linear_backward(C.attn, P[kWo], ln1.dx, g[kWo], g[kBo]);

  BasicTensor<T> dq({L, P.d_model}), dk({L, P.d_model}), dv({L, P.d_model});
  for (std::size_t h = 0; h < P.heads; ++h) {
    const auto qh = slice_cols(C.q, h * hd, hd);
    const auto kh = slice_cols(C.k, h * hd, hd);
    const auto vh = slice_cols(C.v, h * hd, hd);
    const auto doh = slice_cols(dattn, h * hd, hd);
    const auto& p = C.probs[h];
    BasicTensor<T> dp = matmul_bt(doh, vh);
    BasicTensor<T> dvh({L, hd});
    matmul_accumulate(true, false, p, doh, dvh);
    BasicTensor<T> ds = softmax_rows_backward(p, dp);
    for (auto& x : ds.data()) x *= scale;
    put_cols(dq, matmul(ds, kh), h * hd);
    BasicTensor<T> dkh({L, hd});
    matmul_accumulate(true, false, ds, qh, dkh);
    put_cols(dk, dkh, h * hd);
    put_cols(dv, dvh, h * hd);
  }
  add_into(dx, linear_backward(C.x, P[kWq], dq, g[kWq], g[kBq]));
  matmul_accumulate(true, false, C.x, dk, g[kWk]);
  add_into(dx, matmul_bt(dk, P[kWk]));
  add_into(dx, linear_backward(C.x, P[kWv], dv, g[kWv], g[kBv]));
  return dx;
}

template <typename T>
BasicTensor<T> pool(const AttentionBlockParams<T>& P, const BasicTensor<T>& seq) {
  require(seq.rank() == 2 && seq.rows() >= 1, ErrorKind::kContract,
          "pool needs at least one token");
  require(seq.cols() == P.d_model, ErrorKind::kDimension, "pool token width");
  BasicTensor<T> mean({1, P.d_model});
  for (std::size_t r = 0; r < seq.rows(); ++r) {
    for (std::size_t c = 0; c < P.d_model; ++c) mean(0, c) += seq(r, c);
  }
  for (auto& x : mean.data()) x /= static_cast<T>(seq.rows());
  BasicTensor<T> out = linear(mean, P[kWpool], P[kBpool]);
  return BasicTensor<T>({P.out_dim}, std::move(out.storage()));
}

template <typename T>
BasicTensor<T> pool_backward(const AttentionBlockParams<T>& P, const BasicTensor<T>& seq,
                             const BasicTensor<T>& dout, BlockTensors<T>& g) {
  require_shape(dout, {P.out_dim}, "pool_backward upstream");
  const std::size_t L = seq.rows();
  BasicTensor<T> mean({1, P.d_model});
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < P.d_model; ++c) mean(0, c) += seq(r, c);
  }
  for (auto& x : mean.data()) x /= static_cast<T>(L);
  const BasicTensor<T> d2({1, P.out_dim}, dout.storage());
  const BasicTensor<T> dmean = linear_backward(mean, P[kWpool], d2, g[kWpool], g[kBpool]);
  BasicTensor<T> dseq(seq.shape());
  for (std::size_t r = 0; r < L; ++r) {
    for (std::size_t c = 0; c < P.d_model; ++c) dseq(r, c) = dmean(0, c) / static_cast<T>(L);
  }
  return dseq;
}

#define CIR_INSTANTIATE(T)                                                          \
  template struct AttentionBlockParams<T>;                                          \
  template AttentionBlockParams<T> init_attention_block<T>(                         \
      std::size_t, std::size_t, std::size_t, std::size_t, Rng&, double);            \
  template BasicTensor<T> attention_block(const AttentionBlockParams<T>&,           \
                                          const BasicTensor<T>&, BlockCache<T>*);   \
  template BasicTensor<T> attention_block_backward(                                 \
      const AttentionBlockParams<T>&, const BlockCache<T>&, const BasicTensor<T>&,  \
      BlockTensors<T>&);                                                            \
  template BasicTensor<T> pool(const AttentionBlockParams<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> pool_backward(const AttentionBlockParams<T>&,             \
                                        const BasicTensor<T>&, const BasicTensor<T>&, \
                                        BlockTensors<T>&);

CIR_INSTANTIATE(float)
CIR_INSTANTIATE(double)
#undef CIR_INSTANTIATE

}  // namespace cir
