#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cir/tensor.hpp"
#include "cir/util.hpp"

namespace cir {

enum class Modality { kImage, kText };

const char* to_string(Modality m);
Modality parse_modality(const std::string& s);

// Id-addressed pooled embeddings, optionally with a fixed-length token
// sequence per id. Insertion order is preserved and defines the on-disk row
// order.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(std::size_t dim, std::size_t token_len, Modality modality);

  // tokens must be token_len x dim when token_len > 0 and is ignored
  // otherwise. Duplicate ids are a format error.
  void add(const std::string& id, std::span<const float> pooled,
           const Tensor* tokens = nullptr);

  std::size_t dim() const { return dim_; }
  std::size_t token_len() const { return token_len_; }
  Modality modality() const { return modality_; }
  std::size_t count() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  bool contains(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;  // lookup error if absent

  std::span<const float> pooled_row(std::size_t index) const;
  Tensor pooled(const std::string& id) const;
  Tensor tokens(const std::string& id) const;  // token_len x dim
  Tensor tokens_at(std::size_t index) const;

  std::span<const float> pooled_data() const { return pooled_; }
  std::span<const float> token_data() const { return tokens_; }

  bool operator==(const FeatureStore& other) const;

 private:
  std::size_t dim_ = 0;
  std::size_t token_len_ = 0;
  Modality modality_ = Modality::kImage;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> pooled_;
  std::vector<float> tokens_;
};

// Manifest JSON next to a raw f32le payload: pooled rows in id order, then
// token blocks in the same order.
FeatureStore load_feature_store(const fs::path& manifest_path);
void save_feature_store(const FeatureStore& store, const fs::path& manifest_path,
                        const std::string& config_hash = "");

}  // namespace cir
