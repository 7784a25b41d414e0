#include "cir/feature_store.hpp"

#include <algorithm>

namespace cir {

const char* to_string(Modality m) {
  return m == Modality::kImage ? "image" : "text";
}

Modality parse_modality(const std::string& s) {
  if (s == "image") return Modality::kImage;
  if (s == "text") return Modality::kText;
  fail(ErrorKind::kFormat, "unknown modality '" + s + "'");
}

FeatureStore::FeatureStore(std::size_t dim, std::size_t token_len,
                           Modality modality)
    : dim_(dim), token_len_(token_len), modality_(modality) {
  require(dim > 0, ErrorKind::kFormat, "feature store dim must be positive");
}

void FeatureStore::add(const std::string& id, std::span<const float> pooled,
                       const Tensor* tokens) {
  require(!index_.contains(id), ErrorKind::kFormat, "duplicate id '" + id + "'");
  require(pooled.size() == dim_, ErrorKind::kDimension,
          "pooled vector for '" + id + "' has dimension " +
              std::to_string(pooled.size()) + ", store dim is " +
              std::to_string(dim_));
  if (token_len_ > 0) {
    require(tokens != nullptr, ErrorKind::kFormat,
            "missing token sequence for '" + id + "'");
    require_shape(*tokens, {token_len_, dim_}, "token sequence");
    tokens_.insert(tokens_.end(), tokens->data().begin(), tokens->data().end());
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  pooled_.insert(pooled_.end(), pooled.begin(), pooled.end());
}

bool FeatureStore::contains(const std::string& id) const {
  return index_.contains(id);
}

std::size_t FeatureStore::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::kLookup, "unknown id '" + id + "'");
  return it->second;
}

std::span<const float> FeatureStore::pooled_row(std::size_t index) const {
  return std::span<const float>(pooled_).subspan(index * dim_, dim_);
}

Tensor FeatureStore::pooled(const std::string& id) const {
  const auto row = pooled_row(index_of(id));
  return Tensor({dim_}, std::vector<float>(row.begin(), row.end()));
}

Tensor FeatureStore::tokens_at(std::size_t index) const {
  const std::size_t block = token_len_ * dim_;
  const auto begin = tokens_.begin() + static_cast<std::ptrdiff_t>(index * block);
  return Tensor({token_len_, dim_}, std::vector<float>(begin, begin + block));
}

Tensor FeatureStore::tokens(const std::string& id) const {
  return tokens_at(index_of(id));
}

bool FeatureStore::operator==(const FeatureStore& other) const {
  return dim_ == other.dim_ && token_len_ == other.token_len_ &&
         modality_ == other.modality_ && ids_ == other.ids_ &&
         pooled_ == other.pooled_ && tokens_ == other.tokens_;
}

FeatureStore load_feature_store(const fs::path& manifest_path) {
  const Json m = read_json_file(manifest_path);
  std::size_t dim = 0, token_len = 0;
  std::string modality, payload, dtype;
  std::vector<std::string> ids;
  try {
    dim = m.at("dim").get<std::size_t>();
    token_len = m.at("token_len").get<std::size_t>();
    modality = m.at("modality").get<std::string>();
    ids = m.at("ids").get<std::vector<std::string>>();
    payload = m.at("payload").get<std::string>();
    dtype = m.value("dtype", std::string("f32le"));
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, manifest_path.string() + ": " + e.what());
  }
  require(dtype == "f32le", ErrorKind::kFormat, "unsupported dtype '" + dtype + "'");
  if (m.contains("count")) {
    require(m["count"].get<std::size_t>() == ids.size(), ErrorKind::kFormat,
            "manifest count disagrees with its id list");
  }
  const auto values = read_f32le(manifest_path.parent_path() / payload);
  const std::size_t expected = ids.size() * dim * (1 + token_len);
  require(values.size() == expected, ErrorKind::kFormat,
          manifest_path.string() + ": payload holds " +
              std::to_string(values.size()) + " floats, manifest implies " +
              std::to_string(expected));

  FeatureStore store(dim, token_len, parse_modality(modality));
  const std::span<const float> all(values);
  const std::size_t pooled_len = ids.size() * dim;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto pooled = all.subspan(i * dim, dim);
    if (token_len > 0) {
      const auto block = all.subspan(pooled_len + i * token_len * dim,
                                     token_len * dim);
      Tensor toks({token_len, dim}, std::vector<float>(block.begin(), block.end()));
      store.add(ids[i], pooled, &toks);
    } else {
      store.add(ids[i], pooled);
    }
  }
  return store;
}

void save_feature_store(const FeatureStore& store, const fs::path& manifest_path,
                        const std::string& config_hash) {
  const std::string payload = manifest_path.stem().string() + ".bin";
  Json m = {{"dim", store.dim()},
            {"token_len", store.token_len()},
            {"modality", to_string(store.modality())},
            {"count", store.count()},
            {"ids", store.ids()},
            {"payload", payload},
            {"dtype", "f32le"}};
  if (!config_hash.empty()) m["config_hash"] = config_hash;
  std::vector<float> values(store.pooled_data().begin(), store.pooled_data().end());
  values.insert(values.end(), store.token_data().begin(), store.token_data().end());
  write_f32le(manifest_path.parent_path() / payload, values);
  write_json_file(manifest_path, m);
}

}  // namespace cir
