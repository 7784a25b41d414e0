#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cir/fusion.hpp"
#include "cir/synthetic.hpp"
#include "cir/training.hpp"
#include "cir/util.hpp"

namespace cir::cli {

enum class Ablation { kScramble, kMismatch, kImageOnly, kTextOnly };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  WorldConfig world;
  EncoderConfig encoder;
  FusionConfig fusion;
  TrainConfig train;
  std::vector<Ablation> ablations;
  double held_out_fraction = 0.25;
  std::size_t train_examples = 1024;
  PairMode pair_mode = PairMode::kSwap;
  bool paraphrases = false;
  // Named input paths (images, texts, catalog, judgments, queries, ...).
  std::map<std::string, std::string> paths;

  // Pushes the single seed into every component config.
  void propagate_seed();
  // Config error on incoherent settings.
  void validate() const;
  std::string path(const std::string& key) const;  // empty when unset
};

// Starts from defaults, then the file (when given), then the env default.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_json(const Json& j);
// Paths excluded, so the hash describes the computation only.
Json experiment_config_to_json(const ExperimentConfig& c);

}  // namespace cir::cli
