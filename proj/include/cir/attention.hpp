#pragma once

#include <array>
#include <vector>

#include "cir/adam.hpp"
#include "cir/ops.hpp"
#include "cir/rng.hpp"

namespace cir {

// Parameter slots of the fusion block. Weights are stored input-major
// (y = x W + b). Keys carry no bias.
enum BlockTensor : std::size_t {
  kWq, kBq, kWk, kWv, kBv, kWo, kBo,
  kLn1Gamma, kLn1Beta,
  kW1, kB1, kW2, kB2,
  kLn2Gamma, kLn2Beta,
  kWpool, kBpool,
  kNumBlockTensors
};

const char* block_tensor_name(std::size_t slot);

template <typename T>
using BlockTensors = std::array<BasicTensor<T>, kNumBlockTensors>;

// One post-norm Transformer encoder layer (multi-head self-attention, GELU
// feed-forward) followed by mean pooling and a linear projection to the
// embedding dimension. No positional encoding.
template <typename T>
struct AttentionBlockParams {
  std::size_t d_model = 0;
  std::size_t heads = 0;
  std::size_t ffn_dim = 0;
  std::size_t out_dim = 0;
  T ln_eps = T(1e-5);
  std::array<ParamTensor<T>, kNumBlockTensors> p;

  const BasicTensor<T>& operator[](std::size_t slot) const { return p[slot].value; }
  BasicTensor<T>& operator[](std::size_t slot) { return p[slot].value; }
  std::size_t head_dim() const { return d_model / heads; }

  // Shapes for every slot, zero-filled.
  BlockTensors<T> zeros() const;

  template <typename U>
  AttentionBlockParams<U> cast() const {
    AttentionBlockParams<U> out;
    out.d_model = d_model;
    out.heads = heads;
    out.ffn_dim = ffn_dim;
    out.out_dim = out_dim;
    out.ln_eps = static_cast<U>(ln_eps);
    for (std::size_t i = 0; i < kNumBlockTensors; ++i) {
      out.p[i] = ParamTensor<U>(p[i].value.template cast<U>(),
                                static_cast<U>(p[i].lr_multiplier));
    }
    return out;
  }
};

// Weights ~ N(0, init_std^2), biases 0, layer norms identity.
template <typename T>
AttentionBlockParams<T> init_attention_block(std::size_t d_model, std::size_t heads,
                                             std::size_t ffn_dim, std::size_t out_dim,
                                             Rng& rng, double init_std = 0.02);

template <typename T>
struct BlockCache {
  BasicTensor<T> x;
  BasicTensor<T> q, k, v;
  std::vector<BasicTensor<T>> probs;  // one L x L matrix per head
  BasicTensor<T> attn;                // concatenated head outputs
  LayerNormCache<T> ln1;
  BasicTensor<T> y1;
  BasicTensor<T> ffn_pre;
  BasicTensor<T> ffn_act;
  LayerNormCache<T> ln2;
};

// seq: L x d_model with L >= 1. Returns L x d_model.
template <typename T>
BasicTensor<T> attention_block(const AttentionBlockParams<T>& params,
                               const BasicTensor<T>& seq,
                               BlockCache<T>* cache = nullptr);

// Accumulates parameter gradients into grads and returns d(seq).
template <typename T>
BasicTensor<T> attention_block_backward(const AttentionBlockParams<T>& params,
                                        const BlockCache<T>& cache,
                                        const BasicTensor<T>& dy,
                                        BlockTensors<T>& grads);

// Mean over tokens, then the pooling projection: returns [out_dim].
template <typename T>
BasicTensor<T> pool(const AttentionBlockParams<T>& params, const BasicTensor<T>& seq);

template <typename T>
BasicTensor<T> pool_backward(const AttentionBlockParams<T>& params,
                             const BasicTensor<T>& seq, const BasicTensor<T>& dout,
                             BlockTensors<T>& grads);

}  // namespace cir
