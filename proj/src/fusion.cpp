#include "cir/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace cir {

const char* to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kVA: return "va";
    case FusionMode::kAF: return "af";
    case FusionMode::kRAF: return "raf";
    case FusionMode::kImageOnly: return "image_only";
    case FusionMode::kTextOnly: return "text_only";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "va") return FusionMode::kVA;
  if (s == "af") return FusionMode::kAF;
  if (s == "raf") return FusionMode::kRAF;
  if (s == "image_only") return FusionMode::kImageOnly;
  if (s == "text_only") return FusionMode::kTextOnly;
  fail(ErrorKind::kConfig, "unknown fusion mode '" + s + "' (va|af|raf|image_only|text_only)");
}

bool uses_block(FusionMode mode) {
  return mode == FusionMode::kAF || mode == FusionMode::kRAF;
}

template <typename T>
T FusionModel<T>::inverse_temperature() const {
  const double tau = std::exp(static_cast<double>(log_inv_temperature.value[0]));
  return static_cast<T>(std::clamp(tau, kMinInverseTemperature, kMaxInverseTemperature));
}

template <typename T>
bool FusionModel<T>::temperature_free() const {
  const double tau = std::exp(static_cast<double>(log_inv_temperature.value[0]));
  return tau > kMinInverseTemperature && tau < kMaxInverseTemperature;
}

template <typename T>
std::vector<std::pair<std::string, ParamTensor<T>*>> FusionModel<T>::named_parameters() {
  std::vector<std::pair<std::string, ParamTensor<T>*>> out;
  if (block) {
    for (std::size_t i = 0; i < kNumBlockTensors; ++i) {
      out.emplace_back(block_tensor_name(i), &block->p[i]);
    }
  }
  out.emplace_back("log_inv_temperature", &log_inv_temperature);
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const ParamTensor<T>*>>
FusionModel<T>::named_parameters() const {
  std::vector<std::pair<std::string, const ParamTensor<T>*>> out;
  for (auto& [name, p] : const_cast<FusionModel*>(this)->named_parameters()) {
    out.emplace_back(name, p);
  }
  return out;
}

template <typename T>
FusionModel<T> make_fusion_model(const FusionConfig& config) {
  require(config.alpha >= 0.0, ErrorKind::kConfig, "alpha must be non-negative");
  require(config.dim > 0, ErrorKind::kConfig, "embedding dim must be positive");
  require(config.inverse_temperature_init >= kMinInverseTemperature &&
              config.inverse_temperature_init <= kMaxInverseTemperature,
          ErrorKind::kConfig, "initial inverse temperature outside [1, 100]");
  FusionModel<T> model;
  model.mode = config.mode;
  model.alpha = config.alpha;
  model.dim = config.dim;
  if (uses_block(config.mode)) {
    Rng rng = substream(config.seed, "fusion/init");
    model.block = init_attention_block<T>(config.dim, config.heads,
                                          config.dim * config.ffn_multiplier, config.dim,
                                          rng, config.init_std);
    for (auto& p : model.block->p) p.lr_multiplier = static_cast<T>(config.block_lr_multiplier);
  }
  model.log_inv_temperature = ParamTensor<T>(
      BasicTensor<T>({1}, {static_cast<T>(std::log(config.inverse_temperature_init))}));
  return model;
}

template <typename T>
FusionGrads<T> FusionGrads<T>::zeros_like(const FusionModel<T>& model) {
  FusionGrads g;
  if (model.block) g.block = model.block->zeros();
  return g;
}

template <typename T>
void FusionGrads<T>::add(const FusionGrads& other) {
  if (block && other.block) {
    for (std::size_t i = 0; i < kNumBlockTensors; ++i) {
      auto& dst = (*block)[i];
      const auto& src = (*other.block)[i];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
  log_inv_temperature += other.log_inv_temperature;
}

namespace {

template <typename T>
BasicTensor<T> concat_rows(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t d = a.cols();
  std::vector<T> data(a.storage());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return BasicTensor<T>({a.rows() + b.rows(), d}, std::move(data));
}

template <typename T>
bool is_zero(const BasicTensor<T>& v) {
  return std::all_of(v.data().begin(), v.data().end(), [](T x) { return x == T(0); });
}

template <typename T>
void check_inputs(const FusionModel<T>& model, const BasicTensor<T>& img_pooled,
                  const BasicTensor<T>& txt_pooled, const BasicTensor<T>& img_tokens,
                  const BasicTensor<T>& txt_tokens) {
  require_shape(img_pooled, {model.dim}, "image embedding");
  require_shape(txt_pooled, {model.dim}, "text embedding");
  if (!uses_block(model.mode)) return;
  require(model.block.has_value(), ErrorKind::kConfig,
          std::string(to_string(model.mode)) + " model has no attention block");
  require(img_tokens.rank() == 2 && img_tokens.rows() >= 1, ErrorKind::kConfig,
          "attention fusion needs the image token sequence");
  require(img_tokens.cols() == model.block->d_model, ErrorKind::kDimension,
          "image token width does not match the block");
  const bool has_text_tokens = txt_tokens.rank() == 2 && txt_tokens.rows() >= 1;
  require(has_text_tokens || is_zero(txt_pooled), ErrorKind::kConfig,
          "attention fusion needs the text token sequence");
  if (has_text_tokens) {
    require(txt_tokens.cols() == model.block->d_model, ErrorKind::kDimension,
            "text token width does not match the block");
  }
}

template <typename T>
BasicTensor<T> fuse_impl(const FusionModel<T>& model, FusionMode mode,
                         const BasicTensor<T>& img_pooled, const BasicTensor<T>& txt_pooled,
                         const BasicTensor<T>& img_tokens, const BasicTensor<T>& txt_tokens,
                         FuseCache<T>* cache) {
  check_inputs(model, img_pooled, txt_pooled, img_tokens, txt_tokens);
  BasicTensor<T> z;
  switch (mode) {
    case FusionMode::kImageOnly: z = img_pooled; break;
    case FusionMode::kTextOnly: z = txt_pooled; break;
    case FusionMode::kVA:
    case FusionMode::kRAF:
      z = img_pooled;
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += txt_pooled[i];
      break;
    case FusionMode::kAF: z = BasicTensor<T>({model.dim}); break;
  }
  if (uses_block(mode)) {
    const auto& block = *model.block;
    BasicTensor<T> seq = txt_tokens.rank() == 2 && txt_tokens.rows() > 0
                             ? concat_rows(img_tokens, txt_tokens)
                             : img_tokens;
    BlockCache<T> block_cache;
    BasicTensor<T> out = attention_block(block, seq, cache ? &block_cache : nullptr);
    const BasicTensor<T> pooled = pool(block, out);
    if (mode == FusionMode::kAF) {
      z = pooled;
    } else {
      const T alpha = static_cast<T>(model.alpha);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += alpha * pooled[i];
    }
    if (cache) {
      cache->seq = std::move(seq);
      cache->block = std::move(block_cache);
      cache->block_out = std::move(out);
    }
  }
  BasicTensor<T> v = l2_normalize(z);
  if (cache) cache->composed = std::move(z);
  return v;
}

template <typename T>
FuseInputGrads<T> fuse_backward_impl(const FusionModel<T>& model, FusionMode mode,
                                     const BasicTensor<T>& img_pooled,
                                     const BasicTensor<T>& img_tokens,
                                     const BasicTensor<T>& txt_tokens,
                                     const FuseCache<T>& cache, const BasicTensor<T>& dv,
                                     FusionGrads<T>& grads) {
  const BasicTensor<T> dz = l2_normalize_backward(cache.composed, dv);
  FuseInputGrads<T> out{BasicTensor<T>(img_pooled.shape()), BasicTensor<T>(img_pooled.shape()),
                        BasicTensor<T>(img_tokens.shape()), BasicTensor<T>(txt_tokens.shape())};
  switch (mode) {
    case FusionMode::kImageOnly: out.img_pooled = dz; break;
    case FusionMode::kTextOnly: out.txt_pooled = dz; break;
    case FusionMode::kVA:
    case FusionMode::kRAF:
      out.img_pooled = dz;
      out.txt_pooled = dz;
      break;
    case FusionMode::kAF: break;
  }
  if (uses_block(mode)) {
    const auto& block = *model.block;
    require(grads.block.has_value(), ErrorKind::kContract, "gradient sink has no block slots");
    BasicTensor<T> dpool = dz;
    if (mode == FusionMode::kRAF) {
      const T alpha = static_cast<T>(model.alpha);
      for (auto& x : dpool.data()) x *= alpha;
    }
    const BasicTensor<T> dout = pool_backward(block, cache.block_out, dpool, *grads.block);
    const BasicTensor<T> dseq = attention_block_backward(block, cache.block, dout, *grads.block);
    const std::size_t d = block.d_model;
    const std::size_t li = img_tokens.rows();
    std::copy_n(dseq.data().begin(), li * d, out.img_tokens.data().begin());
    if (txt_tokens.size() > 0) {
      std::copy_n(dseq.data().begin() + static_cast<std::ptrdiff_t>(li * d), txt_tokens.size(),
                  out.txt_tokens.data().begin());
    }
  }
  return out;
}

FusionMode catalog_mode(FusionMode mode) {
  return mode == FusionMode::kTextOnly ? FusionMode::kImageOnly : mode;
}

}  // namespace

template <typename T>
BasicTensor<T> fuse(const FusionModel<T>& model, const BasicTensor<T>& img_pooled,
                    const BasicTensor<T>& txt_pooled, const BasicTensor<T>& img_tokens,
                    const BasicTensor<T>& txt_tokens, FuseCache<T>* cache) {
  return fuse_impl(model, model.mode, img_pooled, txt_pooled, img_tokens, txt_tokens, cache);
}

template <typename T>
FuseInputGrads<T> fuse_backward(const FusionModel<T>& model, const BasicTensor<T>& img_pooled,
                                const BasicTensor<T>&, const BasicTensor<T>& img_tokens,
                                const BasicTensor<T>& txt_tokens, const FuseCache<T>& cache,
                                const BasicTensor<T>& dv, FusionGrads<T>& grads) {
  return fuse_backward_impl(model, model.mode, img_pooled, img_tokens, txt_tokens, cache, dv,
                            grads);
}

template <typename T>
BasicTensor<T> embed_catalog_item(const FusionModel<T>& model, const BasicTensor<T>& img_pooled,
                                  const BasicTensor<T>& img_tokens, FuseCache<T>* cache) {
  const BasicTensor<T> no_text({model.dim});
  const BasicTensor<T> no_tokens({0, img_tokens.rank() == 2 ? img_tokens.cols() : model.dim});
  return fuse_impl(model, catalog_mode(model.mode), img_pooled, no_text, img_tokens, no_tokens,
                   cache);
}

template <typename T>
FuseInputGrads<T> embed_catalog_item_backward(const FusionModel<T>& model,
                                              const BasicTensor<T>& img_pooled,
                                              const BasicTensor<T>& img_tokens,
                                              const FuseCache<T>& cache,
                                              const BasicTensor<T>& dv, FusionGrads<T>& grads) {
  const BasicTensor<T> no_tokens({0, img_tokens.rank() == 2 ? img_tokens.cols() : model.dim});
  return fuse_backward_impl(model, catalog_mode(model.mode), img_pooled, img_tokens, no_tokens,
                            cache, dv, grads);
}

std::vector<float> score(std::span<const float> query,
                         const std::vector<std::span<const float>>& catalog) {
  auto check = [](std::span<const float> v, const char* what) {
    const double n = std::sqrt(dot<float>(v, v));
    require(std::abs(n - 1.0) <= 1e-3, ErrorKind::kContract,
            std::string(what) + " embedding is not unit-norm (norm " + std::to_string(n) + ")");
  };
  check(query, "query");
  std::vector<float> out;
  out.reserve(catalog.size());
  for (const auto& c : catalog) {
    require(c.size() == query.size(), ErrorKind::kDimension, "catalog embedding width");
    check(c, "catalog");
    out.push_back(dot<float>(query, c));
  }
  return out;
}

#define CIR_INSTANTIATE(T)                                                                 \
  template struct FusionModel<T>;                                                          \
  template struct FusionGrads<T>;                                                          \
  template FusionModel<T> make_fusion_model<T>(const FusionConfig&);                       \
  template BasicTensor<T> fuse(const FusionModel<T>&, const BasicTensor<T>&,               \
                               const BasicTensor<T>&, const BasicTensor<T>&,               \
                               const BasicTensor<T>&, FuseCache<T>*);                      \
  template FuseInputGrads<T> fuse_backward(                                                \
      const FusionModel<T>&, const BasicTensor<T>&, const BasicTensor<T>&,                 \
      const BasicTensor<T>&, const BasicTensor<T>&, const FuseCache<T>&,                   \
      const BasicTensor<T>&, FusionGrads<T>&);                                             \
  template BasicTensor<T> embed_catalog_item(const FusionModel<T>&, const BasicTensor<T>&, \
                                             const BasicTensor<T>&, FuseCache<T>*);        \
  template FuseInputGrads<T> embed_catalog_item_backward(                                  \
      const FusionModel<T>&, const BasicTensor<T>&, const BasicTensor<T>&,                 \
      const FuseCache<T>&, const BasicTensor<T>&, FusionGrads<T>&);

CIR_INSTANTIATE(float)
CIR_INSTANTIATE(double)
#undef CIR_INSTANTIATE

}  // namespace cir
