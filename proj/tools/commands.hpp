#pragma once

#include <optional>
#include <string>
#include <vector>

#include "experiment_config.hpp"

namespace cir::cli {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool force = false;
};

struct SynthArgs {
  std::string out_dir;
  std::optional<std::size_t> items;
};

struct GenCaptionsArgs {
  std::string catalog;
  std::size_t count = 1024;
  std::string out;
  std::optional<std::string> mode;
  bool paraphrases = false;
};

struct TrainArgs {
  std::string data_dir;
  std::string images, texts, examples, catalog;
  bool online = false;  // sample iMFQ-style examples from the catalog each epoch
  std::string resume_from;
  std::string out;
  std::string log;
  std::optional<std::size_t> epochs;
  std::optional<std::string> schedule;
  std::optional<std::string> mode;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<double> alpha;
};

struct EmbedArgs {
  std::string checkpoint, images, out;
};

struct RetrieveArgs {
  std::string checkpoint, images, texts, queries, catalog_embeddings, out, scores_out;
  std::size_t k = 10;
  std::optional<std::string> ablation;
};

struct EvalArgs {
  std::string suite;
  std::string scores, judgments, queries, catalog, recalls;
  std::string checkpoint, images, texts;
  std::string out_dir;
};

struct AblateArgs {
  std::vector<std::string> modes;
  std::string data_dir;
  std::string checkpoint;
  bool train = false;
  std::optional<std::size_t> epochs;
  std::string out;
};

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string out;
};

ExperimentConfig resolve_config(const Common& common);

void cmd_synth(const Common& c, const SynthArgs& a);
void cmd_gen_captions(const Common& c, const GenCaptionsArgs& a);
void cmd_train(const Common& c, const TrainArgs& a);
void cmd_embed(const Common& c, const EmbedArgs& a);
void cmd_retrieve(const Common& c, const RetrieveArgs& a);
void cmd_eval(const Common& c, const EvalArgs& a);
void cmd_ablate(const Common& c, const AblateArgs& a);
void cmd_report(const Common& c, const ReportArgs& a);

}  // namespace cir::cli
