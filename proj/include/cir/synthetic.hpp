#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cir/attributes.hpp"
#include "cir/feature_store.hpp"
#include "cir/tensor.hpp"
#include "cir/weaksup.hpp"

namespace cir {

struct AttributeGroup {
  std::string name;
  std::vector<std::string> values;
};

struct WorldItem {
  std::string id;
  std::vector<std::size_t> values;  // one value index per group
};

// Desk-scale attribute-labelled catalog. Every (group, value) owns a fixed
// random unit vector in concept space; an item's concept is the mean of its
// value vectors.
struct SyntheticWorld {
  std::vector<AttributeGroup> groups;
  std::vector<WorldItem> items;
  std::size_t concept_dim = 32;
  std::uint64_t seed = 0;
  Tensor value_vectors;               // (total values) x concept_dim
  std::vector<std::size_t> group_offset;  // first value_vectors row per group

  const WorldItem& item(const std::string& id) const;
  std::span<const float> value_vector(std::size_t group, std::size_t value) const;
  Tensor item_concept(const WorldItem& item) const;
  // Signed caption concept: (to - from) / 2, to / 2 or -from / 2.
  Tensor caption_concept(const Change& change) const;
  std::size_t group_index(const std::string& name) const;
  std::size_t value_index(std::size_t group, const std::string& value) const;

  // Rebuilds the id lookup after items change.
  void index_items();

 private:
  std::unordered_map<std::string, std::size_t> item_index_;
};

struct WorldConfig {
  std::size_t items = 64;
  std::size_t groups = 8;
  std::size_t values_per_group = 2;
  std::size_t concept_dim = 32;
  std::uint64_t seed = 0;
};

// Items are distinct attribute combinations drawn uniformly without
// replacement.
SyntheticWorld make_world(const WorldConfig& config);

AttributeSchema world_schema(const SyntheticWorld& world);
AttributeCatalog world_catalog(const SyntheticWorld& world);

struct SyntheticEncoder {
  std::size_t concept_dim = 32;
  std::size_t dim = 64;
  Tensor w_img;  // dim x concept_dim
  Tensor w_txt;  // dim x concept_dim
  std::size_t token_count_img = 50;
  std::size_t token_count_txt = 8;
  double noise_sigma = 0.05;
  std::vector<std::size_t> channel_perm;  // empty means identity
  std::uint64_t seed = 0;

  bool aligned() const;
};

struct EncoderConfig {
  std::size_t concept_dim = 32;
  std::size_t dim = 64;
  double noise_sigma = 0.05;
  std::size_t token_count_img = 50;
  std::size_t token_count_txt = 8;
  std::uint64_t seed = 0;
};

// Aligned encoder: w_txt == w_img, identity channel order.
SyntheticEncoder make_encoder(const EncoderConfig& config);

struct Encoded {
  Tensor pooled;  // [d]
  Tensor tokens;  // [L x d]
};

// pooled = normalize(W_img c + noise); tokens = token_count_img - 1 noisy
// draws of W_img c followed by the pooled vector.
Encoded encode_image(const SyntheticWorld& world, const SyntheticEncoder& enc,
                     const std::string& item_id);

// No change means the empty caption: zero pooled vector, no tokens.
Encoded encode_text(const SyntheticWorld& world, const SyntheticEncoder& enc,
                    const std::optional<Change>& caption);

// Text channels permuted by a seeded random permutation (replaces any prior
// permutation). The image side is untouched.
SyntheticEncoder scramble_text_channels(const SyntheticEncoder& enc, std::uint64_t seed);
SyntheticEncoder with_channel_perm(const SyntheticEncoder& enc,
                                   std::vector<std::size_t> perm);

// Text projection resampled independently of the image projection.
SyntheticEncoder mismatch_text_module(const SyntheticEncoder& enc, std::uint64_t new_seed);

Json encoder_to_json(const SyntheticEncoder& enc);
SyntheticEncoder encoder_from_json(const Json& j);
Json world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const Json& j);

// Source of backbone features for training and retrieval.
class EmbeddingSource {
 public:
  virtual ~EmbeddingSource() = default;
  virtual std::size_t dim() const = 0;
  virtual Encoded image(const std::string& id) const = 0;
  // The empty caption yields a zero pooled vector and no tokens.
  virtual Encoded text(const std::string& caption) const = 0;
};

// Precomputed stores; text ids are caption strings.
class StoreSource : public EmbeddingSource {
 public:
  StoreSource(FeatureStore images, FeatureStore texts);
  std::size_t dim() const override { return images_.dim(); }
  Encoded image(const std::string& id) const override;
  Encoded text(const std::string& caption) const override;
  const FeatureStore& images() const { return images_; }
  const FeatureStore& texts() const { return texts_; }

 private:
  FeatureStore images_;
  FeatureStore texts_;
};

// On-the-fly synthetic encodings; captions are parsed back into changes.
class SyntheticSource : public EmbeddingSource {
 public:
  SyntheticSource(SyntheticWorld world, SyntheticEncoder encoder);
  std::size_t dim() const override { return encoder_.dim; }
  Encoded image(const std::string& id) const override;
  Encoded text(const std::string& caption) const override;
  const SyntheticWorld& world() const { return world_; }
  const SyntheticEncoder& encoder() const { return encoder_; }

 private:
  SyntheticWorld world_;
  SyntheticEncoder encoder_;
  ValueVocabulary vocab_;
};

// Image store over every world item; text store over every caption (default
// and paraphrase templates) of every swap/add/remove change in the vocabulary.
FeatureStore build_image_store(const SyntheticWorld& world, const SyntheticEncoder& enc);
FeatureStore build_text_store(const SyntheticWorld& world, const SyntheticEncoder& enc);

}  // namespace cir
