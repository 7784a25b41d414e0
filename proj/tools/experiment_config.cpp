#include "experiment_config.hpp"

#include <algorithm>
#include <cstdlib>

#include "cir/error.hpp"

namespace cir::cli {

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::kScramble: return "scramble";
    case Ablation::kMismatch: return "mismatch";
    case Ablation::kImageOnly: return "image_only";
    case Ablation::kTextOnly: return "text_only";
  }
  return "?";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "scramble") return Ablation::kScramble;
  if (s == "mismatch") return Ablation::kMismatch;
  if (s == "image_only") return Ablation::kImageOnly;
  if (s == "text_only") return Ablation::kTextOnly;
  fail(ErrorKind::kConfig,
       "unknown ablation '" + s + "' (scramble|mismatch|image_only|text_only)");
}

void ExperimentConfig::propagate_seed() {
  world.seed = seed;
  encoder.seed = seed;
  fusion.seed = seed;
  train.seed = seed;
}

void ExperimentConfig::validate() const {
  auto has = [&](Ablation a) {
    return std::find(ablations.begin(), ablations.end(), a) != ablations.end();
  };
  require(!(has(Ablation::kScramble) && has(Ablation::kMismatch)), ErrorKind::kConfig,
          "ablations scramble and mismatch cannot be combined");
  require(!(has(Ablation::kImageOnly) && has(Ablation::kTextOnly)), ErrorKind::kConfig,
          "ablations image_only and text_only cannot be combined");
  for (std::size_t i = 0; i < ablations.size(); ++i) {
    for (std::size_t j = i + 1; j < ablations.size(); ++j) {
      require(ablations[i] != ablations[j], ErrorKind::kConfig,
              std::string("ablation '") + to_string(ablations[i]) + "' given twice");
    }
  }
  require(held_out_fraction >= 0.0 && held_out_fraction < 1.0, ErrorKind::kConfig,
          "held_out_fraction must be in [0, 1)");
  require(fusion.alpha >= 0.0, ErrorKind::kConfig, "alpha must be non-negative");
  require(fusion.dim == encoder.dim, ErrorKind::kConfig,
          "fusion.dim must equal encoder.dim");
  require(world.concept_dim == encoder.concept_dim, ErrorKind::kConfig,
          "world.concept_dim must equal encoder.concept_dim");
  train.validate();
}

std::string ExperimentConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  return it == paths.end() ? std::string() : it->second;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("world")) {
      const auto& w = j["world"];
      c.world.items = w.value("items", c.world.items);
      c.world.groups = w.value("groups", c.world.groups);
      c.world.values_per_group = w.value("values_per_group", c.world.values_per_group);
      c.world.concept_dim = w.value("concept_dim", c.world.concept_dim);
    }
    if (j.contains("encoder")) {
      const auto& e = j["encoder"];
      c.encoder.concept_dim = e.value("concept_dim", c.encoder.concept_dim);
      c.encoder.dim = e.value("dim", c.encoder.dim);
      c.encoder.noise_sigma = e.value("noise_sigma", c.encoder.noise_sigma);
      c.encoder.token_count_img = e.value("token_count_img", c.encoder.token_count_img);
      c.encoder.token_count_txt = e.value("token_count_txt", c.encoder.token_count_txt);
    }
    if (j.contains("fusion")) {
      const auto& f = j["fusion"];
      if (f.contains("mode")) c.fusion.mode = parse_fusion_mode(f["mode"].get<std::string>());
      c.fusion.alpha = f.value("alpha", c.fusion.alpha);
      c.fusion.dim = f.value("dim", c.fusion.dim);
      c.fusion.heads = f.value("heads", c.fusion.heads);
      c.fusion.ffn_multiplier = f.value("ffn_multiplier", c.fusion.ffn_multiplier);
      c.fusion.init_std = f.value("init_std", c.fusion.init_std);
      c.fusion.inverse_temperature_init =
          f.value("inverse_temperature_init", c.fusion.inverse_temperature_init);
      c.fusion.block_lr_multiplier = f.value("block_lr_multiplier", c.fusion.block_lr_multiplier);
    }
    if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
    for (const auto& a : j.value("ablations", std::vector<std::string>{})) {
      c.ablations.push_back(parse_ablation(a));
    }
    c.held_out_fraction = j.value("held_out_fraction", c.held_out_fraction);
    c.train_examples = j.value("train_examples", c.train_examples);
    if (j.contains("pair_mode")) c.pair_mode = parse_pair_mode(j["pair_mode"].get<std::string>());
    c.paraphrases = j.value("paraphrases", c.paraphrases);
    c.paths = j.value("paths", std::map<std::string, std::string>{});
  } catch (const Json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad config: ") + e.what());
  }
  c.propagate_seed();
  return c;
}

Json experiment_config_to_json(const ExperimentConfig& c) {
  Json ablations = Json::array();
  for (auto a : c.ablations) ablations.push_back(to_string(a));
  return Json{
      {"seed", c.seed},
      {"world",
       {{"items", c.world.items},
        {"groups", c.world.groups},
        {"values_per_group", c.world.values_per_group},
        {"concept_dim", c.world.concept_dim}}},
      {"encoder",
       {{"concept_dim", c.encoder.concept_dim},
        {"dim", c.encoder.dim},
        {"noise_sigma", c.encoder.noise_sigma},
        {"token_count_img", c.encoder.token_count_img},
        {"token_count_txt", c.encoder.token_count_txt}}},
      {"fusion",
       {{"mode", to_string(c.fusion.mode)},
        {"alpha", c.fusion.alpha},
        {"dim", c.fusion.dim},
        {"heads", c.fusion.heads},
        {"ffn_multiplier", c.fusion.ffn_multiplier},
        {"init_std", c.fusion.init_std},
        {"inverse_temperature_init", c.fusion.inverse_temperature_init},
        {"block_lr_multiplier", c.fusion.block_lr_multiplier}}},
      {"train", train_config_to_json(c.train)},
      {"ablations", ablations},
      {"held_out_fraction", c.held_out_fraction},
      {"train_examples", c.train_examples},
      {"pair_mode", c.pair_mode == PairMode::kSwap ? "swap" : "toggle"},
      {"paraphrases", c.paraphrases}};
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::string chosen = path;
  if (chosen.empty()) {
    if (const char* env = std::getenv("CIR_CONFIG")) chosen = env;
  }
  if (chosen.empty()) {
    ExperimentConfig c;
    c.propagate_seed();
    return c;
  }
  require(fs::exists(chosen), ErrorKind::kConfig, "config file not found: " + chosen);
  Json j;
  try {
    j = read_json_file(chosen);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  return experiment_config_from_json(j);
}

}  // namespace cir::cli
