#include "cir/checkpoint.hpp"

namespace cir {

void save_checkpoint(const FusionModel<float>& model, const fs::path& manifest_path,
                     const Json& extra) {
  const std::string payload = manifest_path.stem().string() + ".bin";
  Json tensors = Json::array();
  std::vector<float> values;
  for (const auto& [name, p] : model.named_parameters()) {
    tensors.push_back({{"name", name},
                       {"shape", p->value.shape()},
                       {"offset", values.size()},
                       {"lr_multiplier", p->lr_multiplier}});
    values.insert(values.end(), p->value.data().begin(), p->value.data().end());
  }
  Json m = {{"format", "cir-checkpoint"},
            {"version", 1},
            {"mode", to_string(model.mode)},
            {"alpha", model.alpha},
            {"dim", model.dim},
            {"tensors", tensors},
            {"payload", payload},
            {"dtype", "f32le"}};
  if (model.block) {
    m["d_model"] = model.block->d_model;
    m["heads"] = model.block->heads;
    m["ffn_dim"] = model.block->ffn_dim;
    m["ln_eps"] = model.block->ln_eps;
  }
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_f32le(manifest_path.parent_path() / payload, values);
  write_json_file(manifest_path, m);
}

Json read_checkpoint_manifest(const fs::path& manifest_path) {
  const Json m = read_json_file(manifest_path);
  require(m.value("format", std::string()) == "cir-checkpoint", ErrorKind::kFormat,
          manifest_path.string() + " is not a checkpoint manifest");
  return m;
}

FusionModel<float> load_checkpoint(const fs::path& manifest_path) {
  const Json m = read_checkpoint_manifest(manifest_path);
  FusionModel<float> model;
  try {
    model.mode = parse_fusion_mode(m.at("mode").get<std::string>());
    model.alpha = m.at("alpha").get<double>();
    model.dim = m.at("dim").get<std::size_t>();
    if (uses_block(model.mode)) {
      AttentionBlockParams<float> b;
      b.d_model = m.at("d_model").get<std::size_t>();
      b.heads = m.at("heads").get<std::size_t>();
      b.ffn_dim = m.at("ffn_dim").get<std::size_t>();
      b.out_dim = model.dim;
      b.ln_eps = m.at("ln_eps").get<float>();
      model.block = std::move(b);
    }
    const auto values = read_f32le(manifest_path.parent_path() /
                                   m.at("payload").get<std::string>());
    auto params = model.named_parameters();
    const auto& tensors = m.at("tensors");
    require(tensors.size() == params.size(), ErrorKind::kFormat,
            "checkpoint tensor count does not match its mode");
    std::size_t expected_total = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      require(t.at("name").get<std::string>() == params[i].first, ErrorKind::kFormat,
              "checkpoint tensor " + std::to_string(i) + " is '" +
                  t.at("name").get<std::string>() + "', expected '" + params[i].first + "'");
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t n = shape_product(shape);
      require(offset + n <= values.size(), ErrorKind::kFormat,
              "checkpoint payload too short for '" + params[i].first + "'");
      std::vector<float> data(values.begin() + static_cast<std::ptrdiff_t>(offset),
                              values.begin() + static_cast<std::ptrdiff_t>(offset + n));
      *params[i].second = ParamTensor<float>(Tensor(shape, std::move(data)),
                                             t.value("lr_multiplier", 1.0f));
      expected_total += n;
    }
    require(expected_total == values.size(), ErrorKind::kFormat,
            "checkpoint payload length disagrees with its tensor index");
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, manifest_path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace cir
