#include "cir/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cir/ops.hpp"
#include "cir/rng.hpp"

namespace cir {
namespace {

struct NamedGroup {
  const char* name;
  std::vector<const char*> values;
};

const std::vector<NamedGroup>& default_groups() {
  static const std::vector<NamedGroup> kGroups = {
      {"color", {"red", "black", "blue", "white", "green", "yellow"}},
      {"pattern", {"floral", "solid", "striped", "plaid", "dotted"}},
      {"material", {"lace", "denim", "cotton", "silk", "leather"}},
      {"sleeve", {"long", "short", "sleeveless", "cap"}},
      {"neckline", {"vneck", "crew", "collar", "halter"}},
      {"length", {"mini", "maxi", "midi", "knee"}},
      {"fit", {"slim", "loose", "regular", "oversized"}},
      {"closure", {"zip", "button", "tie", "pullover"}},
  };
  return kGroups;
}

Tensor random_projection(std::size_t dim, std::size_t concept_dim, Rng& rng) {
  Tensor w({dim, concept_dim});
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& x : w.data()) x = static_cast<float>(standard_normal(rng) * scale);
  return w;
}

// Isotropic noise with expected norm about sigma.
void add_noise(std::span<float> v, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  const double scale = sigma / std::sqrt(static_cast<double>(v.size()));
  for (auto& x : v) x += static_cast<float>(standard_normal(rng) * scale);
}

Tensor project(const Tensor& w, const Tensor& concept_vec) {
  Tensor out({w.rows()});
  for (std::size_t r = 0; r < w.rows(); ++r) {
    out[r] = dot<float>(w.row(r), concept_vec.data());
  }
  return out;
}

Tensor permute(const Tensor& v, const std::vector<std::size_t>& perm) {
  if (perm.empty()) return v;
  Tensor out(v.shape());
  for (std::size_t i = 0; i < perm.size(); ++i) out[i] = v[perm[i]];
  return out;
}

}  // namespace

void SyntheticWorld::index_items() {
  item_index_.clear();
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(item_index_.emplace(items[i].id, i).second, ErrorKind::kData,
            "duplicate world item '" + items[i].id + "'");
  }
}

const WorldItem& SyntheticWorld::item(const std::string& id) const {
  auto it = item_index_.find(id);
  if (it == item_index_.end()) fail(ErrorKind::kLookup, "unknown item '" + id + "'");
  return items[it->second];
}

std::span<const float> SyntheticWorld::value_vector(std::size_t group,
                                                    std::size_t value) const {
  return value_vectors.row(group_offset[group] + value);
}

Tensor SyntheticWorld::item_concept(const WorldItem& it) const {
  Tensor c({concept_dim});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    axpy<float>(1.0f, value_vector(g, it.values[g]), c.data());
  }
  for (auto& x : c.data()) x /= static_cast<float>(groups.size());
  return c;
}

std::size_t SyntheticWorld::group_index(const std::string& name) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].name == name) return g;
  }
  fail(ErrorKind::kLookup, "unknown attribute group '" + name + "'");
}

std::size_t SyntheticWorld::value_index(std::size_t group, const std::string& value) const {
  const auto& vs = groups.at(group).values;
  auto it = std::find(vs.begin(), vs.end(), value);
  if (it == vs.end()) {
    fail(ErrorKind::kLookup,
         "unknown value '" + value + "' in group '" + groups[group].name + "'");
  }
  return static_cast<std::size_t>(it - vs.begin());
}

Tensor SyntheticWorld::caption_concept(const Change& change) const {
  const std::size_t g = group_index(change.group);
  Tensor c({concept_dim});
  if (change.kind != ChangeKind::kRemove) {
    axpy<float>(0.5f, value_vector(g, value_index(g, change.to)), c.data());
  }
  if (change.kind != ChangeKind::kAdd) {
    axpy<float>(-0.5f, value_vector(g, value_index(g, change.from)), c.data());
  }
  return c;
}

SyntheticWorld make_world(const WorldConfig& config) {
  require(config.items > 0 && config.groups > 0 && config.values_per_group >= 2 &&
              config.concept_dim > 0,
          ErrorKind::kConfig, "synthetic world needs items, groups, >=2 values, k>0");
  // Number of distinct combinations, saturating.
  double combos = std::pow(static_cast<double>(config.values_per_group),
                           static_cast<double>(config.groups));
  require(static_cast<double>(config.items) <= combos, ErrorKind::kConfig,
          "more items requested than distinct attribute combinations");

  SyntheticWorld world;
  world.concept_dim = config.concept_dim;
  world.seed = config.seed;
  const auto& names = default_groups();
  std::size_t total = 0;
  for (std::size_t g = 0; g < config.groups; ++g) {
    AttributeGroup group;
    group.name = g < names.size() ? names[g].name : "group" + std::to_string(g);
    for (std::size_t v = 0; v < config.values_per_group; ++v) {
      if (g < names.size() && v < names[g].values.size()) {
        group.values.emplace_back(names[g].values[v]);
      } else {
        group.values.push_back(group.name + "_v" + std::to_string(v));
      }
    }
    world.group_offset.push_back(total);
    total += group.values.size();
    world.groups.push_back(std::move(group));
  }

  Rng concepts = substream(config.seed, "world/concepts");
  world.value_vectors = Tensor({total, config.concept_dim});
  for (std::size_t r = 0; r < total; ++r) {
    auto row = world.value_vectors.row(r);
    for (auto& x : row) x = static_cast<float>(standard_normal(concepts));
    const float n = norm2<float>(row);
    for (auto& x : row) x /= n;
  }

  Rng items = substream(config.seed, "world/items");
  std::set<std::vector<std::size_t>> seen;
  while (world.items.size() < config.items) {
    std::vector<std::size_t> values(config.groups);
    for (auto& v : values) v = uniform_index(items, config.values_per_group);
    if (!seen.insert(values).second) continue;
    char id[32];
    std::snprintf(id, sizeof(id), "item_%04zu", world.items.size());
    world.items.push_back({id, std::move(values)});
  }
  world.index_items();
  return world;
}

AttributeSchema world_schema(const SyntheticWorld& world) {
  AttributeSchema schema;
  for (const auto& g : world.groups) schema.groups[g.name] = g.values;
  return schema;
}

AttributeCatalog world_catalog(const SyntheticWorld& world) {
  AttributeCatalog catalog(world_schema(world));
  for (const auto& it : world.items) {
    AttributeSet attrs;
    for (std::size_t g = 0; g < world.groups.size(); ++g) {
      attrs[world.groups[g].name].insert(world.groups[g].values[it.values[g]]);
    }
    catalog.add(it.id, attrs);
  }
  return catalog;
}

bool SyntheticEncoder::aligned() const {
  if (w_txt != w_img) return false;
  for (std::size_t i = 0; i < channel_perm.size(); ++i) {
    if (channel_perm[i] != i) return false;
  }
  return true;
}

SyntheticEncoder make_encoder(const EncoderConfig& config) {
  require(config.dim > 0 && config.concept_dim > 0 && config.token_count_img >= 1 &&
              config.token_count_txt >= 1 && config.noise_sigma >= 0.0,
          ErrorKind::kConfig, "invalid synthetic encoder configuration");
  SyntheticEncoder enc;
  enc.concept_dim = config.concept_dim;
  enc.dim = config.dim;
  enc.noise_sigma = config.noise_sigma;
  enc.token_count_img = config.token_count_img;
  enc.token_count_txt = config.token_count_txt;
  enc.seed = config.seed;
  Rng rng = substream(config.seed, "encoder/projection");
  enc.w_img = random_projection(config.dim, config.concept_dim, rng);
  enc.w_txt = enc.w_img;
  return enc;
}

Encoded encode_image(const SyntheticWorld& world, const SyntheticEncoder& enc,
                     const std::string& item_id) {
  require(world.concept_dim == enc.concept_dim, ErrorKind::kConfig,
          "world and encoder disagree on concept dimension");
  const Tensor clean = project(enc.w_img, world.item_concept(world.item(item_id)));
  Rng rng = substream(enc.seed, "noise/image/" + item_id);
  Tensor pooled = clean;
  add_noise(pooled.data(), enc.noise_sigma, rng);
  pooled = l2_normalize(pooled);

  const std::size_t d = enc.dim;
  Tensor tokens({enc.token_count_img, d});
  for (std::size_t t = 0; t + 1 < enc.token_count_img; ++t) {
    auto row = tokens.row(t);
    std::copy(clean.data().begin(), clean.data().end(), row.begin());
    add_noise(row, enc.noise_sigma, rng);
  }
  auto last = tokens.row(enc.token_count_img - 1);
  std::copy(pooled.data().begin(), pooled.data().end(), last.begin());
  return {std::move(pooled), std::move(tokens)};
}

Encoded encode_text(const SyntheticWorld& world, const SyntheticEncoder& enc,
                    const std::optional<Change>& caption) {
  const std::size_t d = enc.dim;
  if (!caption) return {Tensor({d}), Tensor({0, d})};
  const Tensor clean = project(enc.w_txt, world.caption_concept(*caption));
  Rng rng = substream(enc.seed, "noise/text/" + to_string(*caption));
  Tensor pooled = clean;
  add_noise(pooled.data(), enc.noise_sigma, rng);
  pooled = l2_normalize(permute(pooled, enc.channel_perm));

  Tensor tokens({enc.token_count_txt, d});
  for (std::size_t t = 0; t < enc.token_count_txt; ++t) {
    Tensor tok = clean;
    add_noise(tok.data(), enc.noise_sigma, rng);
    tok = permute(tok, enc.channel_perm);
    std::copy(tok.data().begin(), tok.data().end(), tokens.row(t).begin());
  }
  return {std::move(pooled), std::move(tokens)};
}

SyntheticEncoder with_channel_perm(const SyntheticEncoder& enc,
                                   std::vector<std::size_t> perm) {
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    require(sorted[i] == i, ErrorKind::kConfig, "channel_perm is not a permutation");
  }
  require(perm.empty() || perm.size() == enc.dim, ErrorKind::kConfig,
          "channel_perm length must equal the embedding dimension");
  SyntheticEncoder out = enc;
  out.channel_perm = std::move(perm);
  return out;
}

SyntheticEncoder scramble_text_channels(const SyntheticEncoder& enc, std::uint64_t seed) {
  std::vector<std::size_t> perm(enc.dim);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = substream(seed, "encoder/scramble");
  shuffle(perm.begin(), perm.end(), rng);
  return with_channel_perm(enc, std::move(perm));
}

SyntheticEncoder mismatch_text_module(const SyntheticEncoder& enc, std::uint64_t new_seed) {
  SyntheticEncoder out = enc;
  Rng rng = substream(new_seed, "encoder/mismatch");
  out.w_txt = random_projection(enc.dim, enc.concept_dim, rng);
  return out;
}

namespace {
Json tensor_to_json(const Tensor& t) {
  return Json{{"shape", t.shape()}, {"data", t.storage()}};
}
Tensor tensor_from_json(const Json& j) {
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                j.at("data").get<std::vector<float>>());
}
}  // namespace

Json encoder_to_json(const SyntheticEncoder& enc) {
  return Json{{"concept_dim", enc.concept_dim},
              {"dim", enc.dim},
              {"token_count_img", enc.token_count_img},
              {"token_count_txt", enc.token_count_txt},
              {"noise_sigma", enc.noise_sigma},
              {"channel_perm", enc.channel_perm},
              {"seed", enc.seed},
              {"w_img", tensor_to_json(enc.w_img)},
              {"w_txt", tensor_to_json(enc.w_txt)}};
}

SyntheticEncoder encoder_from_json(const Json& j) {
  try {
    SyntheticEncoder enc;
    enc.concept_dim = j.at("concept_dim").get<std::size_t>();
    enc.dim = j.at("dim").get<std::size_t>();
    enc.token_count_img = j.at("token_count_img").get<std::size_t>();
    enc.token_count_txt = j.at("token_count_txt").get<std::size_t>();
    enc.noise_sigma = j.at("noise_sigma").get<double>();
    enc.channel_perm = j.at("channel_perm").get<std::vector<std::size_t>>();
    enc.seed = j.at("seed").get<std::uint64_t>();
    enc.w_img = tensor_from_json(j.at("w_img"));
    enc.w_txt = tensor_from_json(j.at("w_txt"));
    return enc;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bad encoder description: ") + e.what());
  }
}

Json world_to_json(const SyntheticWorld& world) {
  Json groups = Json::array();
  for (const auto& g : world.groups) groups.push_back({{"name", g.name}, {"values", g.values}});
  Json items = Json::array();
  for (const auto& it : world.items) items.push_back({{"id", it.id}, {"values", it.values}});
  return Json{{"concept_dim", world.concept_dim},
              {"seed", world.seed},
              {"groups", groups},
              {"items", items},
              {"group_offset", world.group_offset},
              {"value_vectors", tensor_to_json(world.value_vectors)}};
}

SyntheticWorld world_from_json(const Json& j) {
  try {
    SyntheticWorld world;
    world.concept_dim = j.at("concept_dim").get<std::size_t>();
    world.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& g : j.at("groups")) {
      world.groups.push_back({g.at("name").get<std::string>(),
                              g.at("values").get<std::vector<std::string>>()});
    }
    for (const auto& it : j.at("items")) {
      world.items.push_back({it.at("id").get<std::string>(),
                             it.at("values").get<std::vector<std::size_t>>()});
    }
    world.group_offset = j.at("group_offset").get<std::vector<std::size_t>>();
    world.value_vectors = tensor_from_json(j.at("value_vectors"));
    world.index_items();
    return world;
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bad world description: ") + e.what());
  }
}

StoreSource::StoreSource(FeatureStore images, FeatureStore texts)
    : images_(std::move(images)), texts_(std::move(texts)) {
  require(images_.dim() == texts_.dim(), ErrorKind::kConfig,
          "image and text stores have different dimensions");
}

Encoded StoreSource::image(const std::string& id) const {
  const std::size_t i = images_.index_of(id);
  const auto row = images_.pooled_row(i);
  Tensor pooled({images_.dim()}, std::vector<float>(row.begin(), row.end()));
  return {std::move(pooled), images_.tokens_at(i)};
}

Encoded StoreSource::text(const std::string& caption) const {
  if (caption.empty()) return {Tensor({texts_.dim()}), Tensor({0, texts_.dim()})};
  const std::size_t i = texts_.index_of(caption);
  const auto row = texts_.pooled_row(i);
  Tensor pooled({texts_.dim()}, std::vector<float>(row.begin(), row.end()));
  return {std::move(pooled), texts_.tokens_at(i)};
}

namespace {
std::map<std::string, std::vector<std::string>> world_group_values(const SyntheticWorld& w) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& g : w.groups) out[g.name] = g.values;
  return out;
}
}  // namespace

SyntheticSource::SyntheticSource(SyntheticWorld world, SyntheticEncoder encoder)
    : world_(std::move(world)),
      encoder_(std::move(encoder)),
      vocab_(value_vocabulary(world_group_values(world_))) {}

Encoded SyntheticSource::image(const std::string& id) const {
  return encode_image(world_, encoder_, id);
}

Encoded SyntheticSource::text(const std::string& caption) const {
  if (caption.empty()) return encode_text(world_, encoder_, std::nullopt);
  return encode_text(world_, encoder_, parse_caption(caption, vocab_));
}

FeatureStore build_image_store(const SyntheticWorld& world, const SyntheticEncoder& enc) {
  FeatureStore store(enc.dim, enc.token_count_img, Modality::kImage);
  for (const auto& it : world.items) {
    const Encoded e = encode_image(world, enc, it.id);
    store.add(it.id, e.pooled.data(), &e.tokens);
  }
  return store;
}

FeatureStore build_text_store(const SyntheticWorld& world, const SyntheticEncoder& enc) {
  FeatureStore store(enc.dim, enc.token_count_txt, Modality::kText);
  Rng unused(0);
  const auto all = CaptionTemplates::with_paraphrases();
  auto put = [&](const Change& c) {
    const auto& patterns = c.kind == ChangeKind::kSwap  ? all.swap
                           : c.kind == ChangeKind::kAdd ? all.add
                                                        : all.remove;
    const Encoded e = encode_text(world, enc, c);
    for (const auto& pattern : patterns) {
      CaptionTemplates one;
      one.swap = one.add = one.remove = {pattern};
      const std::string caption = generate_caption(c, one, unused);
      if (!store.contains(caption)) store.add(caption, e.pooled.data(), &e.tokens);
    }
  };
  for (const auto& g : world.groups) {
    for (const auto& from : g.values) {
      for (const auto& to : g.values) {
        if (from != to) put(Change::swap(g.name, from, to));
      }
    }
    for (const auto& v : g.values) {
      put(Change::add(g.name, v));
      put(Change::remove(g.name, v));
    }
  }
  return store;
}

}  // namespace cir
