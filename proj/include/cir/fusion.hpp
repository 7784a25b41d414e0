#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cir/attention.hpp"

namespace cir {

enum class FusionMode { kVA, kAF, kRAF, kImageOnly, kTextOnly };

const char* to_string(FusionMode mode);
FusionMode parse_fusion_mode(const std::string& s);
bool uses_block(FusionMode mode);

inline constexpr double kMinInverseTemperature = 1.0;
inline constexpr double kMaxInverseTemperature = 100.0;

// Composition function plus the contrastive inverse temperature. Embeddings
// are unit-norm, so ranking by dot product equals ranking by cosine.
template <typename T>
struct FusionModel {
  FusionMode mode = FusionMode::kVA;
  double alpha = 0.01;  // residual multiplier, fixed during training
  std::size_t dim = 0;
  std::optional<AttentionBlockParams<T>> block;  // AF and RAF only
  ParamTensor<T> log_inv_temperature;            // shape [1]

  // exp(log_inv_temperature) clamped to [1, 100].
  T inverse_temperature() const;
  // False when the clamp is active, so the temperature gets no gradient.
  bool temperature_free() const;

  // Every trainable tensor with a stable name, block first.
  std::vector<std::pair<std::string, ParamTensor<T>*>> named_parameters();
  std::vector<std::pair<std::string, const ParamTensor<T>*>> named_parameters() const;

  template <typename U>
  FusionModel<U> cast() const {
    FusionModel<U> out;
    out.mode = mode;
    out.alpha = alpha;
    out.dim = dim;
    if (block) out.block = block->template cast<U>();
    out.log_inv_temperature =
        ParamTensor<U>(log_inv_temperature.value.template cast<U>(),
                       static_cast<U>(log_inv_temperature.lr_multiplier));
    return out;
  }
};

struct FusionConfig {
  FusionMode mode = FusionMode::kRAF;
  double alpha = 0.01;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t ffn_multiplier = 4;
  double init_std = 0.02;
  double inverse_temperature_init = 14.3;
  double block_lr_multiplier = 10.0;
  std::uint64_t seed = 0;
};

template <typename T>
FusionModel<T> make_fusion_model(const FusionConfig& config);

// Gradient sink mirroring FusionModel's trainable tensors.
template <typename T>
struct FusionGrads {
  std::optional<BlockTensors<T>> block;
  T log_inv_temperature = T(0);

  static FusionGrads zeros_like(const FusionModel<T>& model);
  void add(const FusionGrads& other);
};

template <typename T>
struct FuseCache {
  BasicTensor<T> composed;  // pre-normalization sum
  BasicTensor<T> seq;       // concatenated tokens fed to the block
  BlockCache<T> block;
  BasicTensor<T> block_out;
};

// VA: n(i + t); AF: n(pool(block([I; T]))); RAF: n(i + t + alpha pool(...));
// image/text only: n(i), n(t). n is l2 normalization.
template <typename T>
BasicTensor<T> fuse(const FusionModel<T>& model, const BasicTensor<T>& img_pooled,
                    const BasicTensor<T>& txt_pooled, const BasicTensor<T>& img_tokens,
                    const BasicTensor<T>& txt_tokens, FuseCache<T>* cache = nullptr);

template <typename T>
struct FuseInputGrads {
  BasicTensor<T> img_pooled;
  BasicTensor<T> txt_pooled;
  BasicTensor<T> img_tokens;
  BasicTensor<T> txt_tokens;
};

// Accumulates parameter gradients into grads; returns input gradients.
template <typename T>
FuseInputGrads<T> fuse_backward(const FusionModel<T>& model,
                                const BasicTensor<T>& img_pooled,
                                const BasicTensor<T>& txt_pooled,
                                const BasicTensor<T>& img_tokens,
                                const BasicTensor<T>& txt_tokens, const FuseCache<T>& cache,
                                const BasicTensor<T>& dv, FusionGrads<T>& grads);

// Catalog-side embedding: the query path with an empty caption. Image-only
// and text-only models embed catalog items as n(i).
template <typename T>
BasicTensor<T> embed_catalog_item(const FusionModel<T>& model,
                                  const BasicTensor<T>& img_pooled,
                                  const BasicTensor<T>& img_tokens,
                                  FuseCache<T>* cache = nullptr);

template <typename T>
FuseInputGrads<T> embed_catalog_item_backward(const FusionModel<T>& model,
                                              const BasicTensor<T>& img_pooled,
                                              const BasicTensor<T>& img_tokens,
                                              const FuseCache<T>& cache,
                                              const BasicTensor<T>& dv,
                                              FusionGrads<T>& grads);

// s_c = <query, catalog_c>. Contract error when any input norm is off 1 by
// more than 1e-3.
std::vector<float> score(std::span<const float> query,
                         const std::vector<std::span<const float>>& catalog);

}  // namespace cir
