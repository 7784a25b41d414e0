#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "cir/attributes.hpp"
#include "cir/fusion.hpp"
#include "cir/synthetic.hpp"
#include "cir/weaksup.hpp"

namespace cir {

enum class Schedule {
  kFiq,   // drop by 10x after half the epochs
  kImfq,  // drop by 10x after every epoch
};

const char* to_string(Schedule s);
Schedule parse_schedule(const std::string& s);

struct TrainConfig {
  double base_lr = 1e-3;
  std::size_t epochs_fiq = 14;
  std::size_t epochs_imfq = 3;
  std::size_t epochs_disrupted = 42;
  std::size_t batch_size = 32;
  double fusion_lr_multiplier = 10.0;
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::kFiq;
  // Overrides the schedule's epoch count when set; may be zero.
  std::optional<std::size_t> epochs;

  std::size_t epoch_count() const;
  void validate() const;
};

Json train_config_to_json(const TrainConfig& c);
// Missing fields keep their defaults.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

double lr_schedule(const TrainConfig& config, std::size_t epoch_index);

// Shuffled batches of example indices. Duplicate targets inside a batch are
// repaired by swapping in later examples; a batch that cannot be repaired and
// the short tail are dropped. Data error when no full batch is possible.
std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<TrainingExample>& dataset, std::size_t batch_size,
    std::uint64_t seed);

// Backbone features of one batch, already cast to the working precision.
template <typename T>
struct BatchInputs {
  std::vector<BasicTensor<T>> query_img;
  std::vector<BasicTensor<T>> query_img_tokens;
  std::vector<BasicTensor<T>> query_txt;
  std::vector<BasicTensor<T>> query_txt_tokens;
  std::vector<BasicTensor<T>> target_img;
  std::vector<BasicTensor<T>> target_img_tokens;

  std::size_t size() const { return query_img.size(); }
};

template <typename T>
BatchInputs<T> gather_batch(const std::vector<TrainingExample>& batch,
                            const EmbeddingSource& source);

template <typename T>
struct BatchInputGrads {
  std::vector<FuseInputGrads<T>> queries;
  std::vector<FuseInputGrads<T>> targets;
};

// Batch-wise softmax cross-entropy, query -> target direction:
// mean_i CE(tau * <q_i, t_j>_j, i). When grads is set, parameter gradients
// are accumulated into it; when input_grads is set, per-input gradients are
// returned there. Per-example work runs in parallel and is reduced in index
// order, so results do not depend on the thread count.
template <typename T>
T contrastive_loss(const FusionModel<T>& model, const BatchInputs<T>& inputs,
                   FusionGrads<T>* grads = nullptr,
                   BatchInputGrads<T>* input_grads = nullptr);

// Batch-construction error when two examples share a target.
template <typename T>
T batch_loss(const FusionModel<T>& model, const std::vector<TrainingExample>& batch,
             const EmbeddingSource& source, FusionGrads<T>* grads = nullptr);

struct TrainStep {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double tau = 0.0;
};

struct TrainLog {
  std::vector<TrainStep> steps;
  std::vector<double> epoch_lr;
  double wall_seconds = 0.0;

  // step,epoch,lr,loss,tau
  std::string to_csv() const;
};

// A fixed dataset (FIQ-style) or an attribute index sampled online each
// epoch (iMFQ-style, items / batch_size batches per epoch).
using TrainingData = std::variant<std::vector<TrainingExample>, AttributeIndex>;

struct TrainResult {
  FusionModel<float> model;
  TrainLog log;
};

TrainResult train(FusionModel<float> model, const TrainingData& data,
                  const EmbeddingSource& source, const TrainConfig& config);

}  // namespace cir
