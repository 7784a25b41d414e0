#include "cir/training.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cir/kernels.hpp"

namespace cir {

const char* to_string(Schedule s) { return s == Schedule::kFiq ? "fiq" : "imfq"; }

Schedule parse_schedule(const std::string& s) {
  if (s == "fiq") return Schedule::kFiq;
  if (s == "imfq") return Schedule::kImfq;
  fail(ErrorKind::kConfig, "unknown schedule '" + s + "' (fiq|imfq)");
}

std::size_t TrainConfig::epoch_count() const {
  if (epochs) return *epochs;
  return schedule == Schedule::kFiq ? epochs_fiq : epochs_imfq;
}

void TrainConfig::validate() const {
  require(base_lr > 0.0, ErrorKind::kConfig, "base_lr must be positive");
  require(epochs_fiq > 0 && epochs_imfq > 0 && epochs_disrupted > 0, ErrorKind::kConfig,
          "epoch counts must be positive");
  require(batch_size >= 2, ErrorKind::kConfig, "batch_size must be at least 2");
  require(fusion_lr_multiplier > 0.0, ErrorKind::kConfig,
          "fusion_lr_multiplier must be positive");
}

Json train_config_to_json(const TrainConfig& c) {
  Json j = {{"base_lr", c.base_lr},
            {"epochs_fiq", c.epochs_fiq},
            {"epochs_imfq", c.epochs_imfq},
            {"epochs_disrupted", c.epochs_disrupted},
            {"batch_size", c.batch_size},
            {"fusion_lr_multiplier", c.fusion_lr_multiplier},
            {"seed", c.seed},
            {"schedule", to_string(c.schedule)}};
  if (c.epochs) j["epochs"] = *c.epochs;
  return j;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  try {
    c.base_lr = j.value("base_lr", c.base_lr);
    c.epochs_fiq = j.value("epochs_fiq", c.epochs_fiq);
    c.epochs_imfq = j.value("epochs_imfq", c.epochs_imfq);
    c.epochs_disrupted = j.value("epochs_disrupted", c.epochs_disrupted);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.fusion_lr_multiplier = j.value("fusion_lr_multiplier", c.fusion_lr_multiplier);
    c.seed = j.value("seed", c.seed);
    if (j.contains("schedule")) c.schedule = parse_schedule(j["schedule"].get<std::string>());
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kConfig, std::string("bad training config: ") + e.what());
  }
  return c;
}

double lr_schedule(const TrainConfig& config, std::size_t epoch_index) {
  const std::size_t total = config.epoch_count();
  require(epoch_index < total, ErrorKind::kContract,
          "epoch index " + std::to_string(epoch_index) + " outside schedule of " +
              std::to_string(total) + " epochs");
  if (config.schedule == Schedule::kFiq) {
    const std::size_t half = (total + 1) / 2;
    return epoch_index < half ? config.base_lr : config.base_lr / 10.0;
  }
  return config.base_lr / std::pow(10.0, static_cast<double>(epoch_index));
}

std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<TrainingExample>& dataset, std::size_t batch_size,
    std::uint64_t seed) {
  require(batch_size >= 2, ErrorKind::kConfig, "batch_size must be at least 2");
  require(dataset.size() >= batch_size, ErrorKind::kData,
          "dataset of " + std::to_string(dataset.size()) +
              " examples is smaller than one batch of " + std::to_string(batch_size));
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start + batch_size <= order.size(); start += batch_size) {
    std::unordered_set<std::string> targets;
    bool complete = true;
    for (std::size_t pos = start; pos < start + batch_size; ++pos) {
      std::size_t pick = pos;
      while (pick < order.size() && targets.contains(dataset[order[pick]].target_id)) ++pick;
      if (pick == order.size()) {
        complete = false;
        break;
      }
      std::swap(order[pos], order[pick]);
      targets.insert(dataset[order[pos]].target_id);
    }
    if (!complete) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  }
  require(!batches.empty(), ErrorKind::kData,
          "no duplicate-free batch of " + std::to_string(batch_size) + " could be formed");
  return batches;
}

template <typename T>
BatchInputs<T> gather_batch(const std::vector<TrainingExample>& batch,
                            const EmbeddingSource& source) {
  BatchInputs<T> in;
  const std::size_t n = batch.size();
  in.query_img.resize(n);
  in.query_img_tokens.resize(n);
  in.query_txt.resize(n);
  in.query_txt_tokens.resize(n);
  in.target_img.resize(n);
  in.target_img_tokens.resize(n);
  kernels::parallel_for(n, [&](std::size_t i) {
    const Encoded q = source.image(batch[i].query_id);
    const Encoded t = source.text(batch[i].caption);
    const Encoded g = source.image(batch[i].target_id);
    in.query_img[i] = q.pooled.cast<T>();
    in.query_img_tokens[i] = q.tokens.cast<T>();
    in.query_txt[i] = t.pooled.cast<T>();
    in.query_txt_tokens[i] = t.tokens.cast<T>();
    in.target_img[i] = g.pooled.cast<T>();
    in.target_img_tokens[i] = g.tokens.cast<T>();
  });
  return in;
}

template <typename T>
T contrastive_loss(const FusionModel<T>& model, const BatchInputs<T>& in,
                   FusionGrads<T>* grads, BatchInputGrads<T>* input_grads) {
  const std::size_t B = in.size();
  require(B >= 2, ErrorKind::kContract, "contrastive loss needs a batch of at least 2");
  const bool backward = grads != nullptr || input_grads != nullptr;

  std::vector<BasicTensor<T>> emb(2 * B);
  std::vector<FuseCache<T>> caches(backward ? 2 * B : 0);
  kernels::parallel_for(2 * B, [&](std::size_t i) {
    FuseCache<T>* cache = backward ? &caches[i] : nullptr;
    if (i < B) {
      emb[i] = fuse(model, in.query_img[i], in.query_txt[i], in.query_img_tokens[i],
                    in.query_txt_tokens[i], cache);
    } else {
      const std::size_t j = i - B;
      emb[i] = embed_catalog_item(model, in.target_img[j], in.target_img_tokens[j], cache);
    }
  });

  const T tau = model.inverse_temperature();
  // sims[i][j] = <q_i, t_j>
  BasicTensor<T> sims({B, B});
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) {
      sims(i, j) = dot<T>(emb[i].data(), emb[B + j].data());
    }
  }
  BasicTensor<T> logits = sims;
  for (auto& x : logits.data()) x *= tau;
  const BasicTensor<T> probs = softmax_rows(logits);
  T loss = T(0);
  for (std::size_t i = 0; i < B; ++i) {
    const auto row = logits.row(i);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = T(0);
    for (auto x : row) sum += std::exp(x - mx);
    loss += mx + std::log(sum) - row[i];
  }
  loss /= static_cast<T>(B);
  if (!backward) return loss;

  // d loss / d logits = (softmax - onehot) / B
  BasicTensor<T> dlogits = probs;
  for (std::size_t i = 0; i < B; ++i) dlogits(i, i) -= T(1);
  for (auto& x : dlogits.data()) x /= static_cast<T>(B);
  T dtau = T(0);
  for (std::size_t i = 0; i < dlogits.size(); ++i) dtau += dlogits[i] * sims[i];

  std::vector<BasicTensor<T>> demb(2 * B, BasicTensor<T>({model.dim}));
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) {
      const T ds = tau * dlogits(i, j);
      axpy<T>(ds, emb[B + j].data(), demb[i].data());
      axpy<T>(ds, emb[i].data(), demb[B + j].data());
    }
  }

  std::vector<FusionGrads<T>> local(2 * B);
  std::vector<FuseInputGrads<T>> dinputs(2 * B);
  kernels::parallel_for(2 * B, [&](std::size_t i) {
    local[i] = FusionGrads<T>::zeros_like(model);
    if (i < B) {
      dinputs[i] = fuse_backward(model, in.query_img[i], in.query_txt[i],
                                 in.query_img_tokens[i], in.query_txt_tokens[i], caches[i],
                                 demb[i], local[i]);
    } else {
      const std::size_t j = i - B;
      dinputs[i] = embed_catalog_item_backward(model, in.target_img[j], in.target_img_tokens[j],
                                               caches[i], demb[i], local[i]);
    }
  });
  if (grads) {
    for (const auto& g : local) grads->add(g);
    if (model.temperature_free()) grads->log_inv_temperature += dtau * tau;
  }
  if (input_grads) {
    input_grads->queries.assign(std::make_move_iterator(dinputs.begin()),
                                std::make_move_iterator(dinputs.begin() + B));
    input_grads->targets.assign(std::make_move_iterator(dinputs.begin() + B),
                                std::make_move_iterator(dinputs.end()));
  }
  return loss;
}

template <typename T>
T batch_loss(const FusionModel<T>& model, const std::vector<TrainingExample>& batch,
             const EmbeddingSource& source, FusionGrads<T>* grads) {
  std::set<std::string> targets;
  for (const auto& e : batch) {
    require(targets.insert(e.target_id).second, ErrorKind::kData,
            "batch holds target '" + e.target_id + "' twice");
  }
  return contrastive_loss(model, gather_batch<T>(batch, source), grads);
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "step,epoch,lr,loss,tau\n";
  for (const auto& s : steps) {
    out << s.step << ',' << s.epoch << ',' << s.lr << ',' << s.loss << ',' << s.tau << '\n';
  }
  return out.str();
}

TrainResult train(FusionModel<float> model, const TrainingData& data,
                  const EmbeddingSource& source, const TrainConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (const auto* dataset = std::get_if<std::vector<TrainingExample>>(&data)) {
    require(!dataset->empty(), ErrorKind::kData, "training dataset is empty");
  }
  if (model.block) {
    for (auto& p : model.block->p) p.lr_multiplier = static_cast<float>(config.fusion_lr_multiplier);
  }
  model.log_inv_temperature.lr_multiplier = 1.0f;

  auto params = model.named_parameters();
  std::vector<AdamState<float>> states;
  for (auto& [name, p] : params) states.emplace_back(p->value.shape());

  TrainLog log;
  std::size_t step = 0;
  const float max_log_tau = static_cast<float>(std::log(kMaxInverseTemperature));
  for (std::size_t epoch = 0; epoch < config.epoch_count(); ++epoch) {
    const double lr = lr_schedule(config, epoch);
    log.epoch_lr.push_back(lr);
    const std::string tag = "epoch" + std::to_string(epoch);

    std::vector<TrainingExample> sampled;
    const std::vector<TrainingExample>* examples = nullptr;
    if (const auto* dataset = std::get_if<std::vector<TrainingExample>>(&data)) {
      examples = dataset;
    } else {
      const auto& index = std::get<AttributeIndex>(data);
      const std::size_t batches =
          std::max<std::size_t>(1, index.item_ids().size() / config.batch_size);
      sampled = generate_epoch(index, batches * config.batch_size,
                               substream_seed(config.seed, "imfq/" + tag));
      examples = &sampled;
    }
    const auto batches =
        make_batches(*examples, config.batch_size, substream_seed(config.seed, "batches/" + tag));

    for (const auto& batch_idx : batches) {
      std::vector<TrainingExample> batch;
      batch.reserve(batch_idx.size());
      for (auto i : batch_idx) batch.push_back((*examples)[i]);

      auto grads = FusionGrads<float>::zeros_like(model);
      const float tau = model.inverse_temperature();
      const float loss = batch_loss(model, batch, source, &grads);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(step) +
                                      " (epoch " + std::to_string(epoch) + ")");
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto* p = params[i].second;
        if (model.block && i < kNumBlockTensors) {
          p->grad = (*grads.block)[i];
        } else {
          p->grad = Tensor({1}, {grads.log_inv_temperature});
        }
        adam_step(*p, states[i], lr);
      }
      auto& log_tau = model.log_inv_temperature.value[0];
      log_tau = std::clamp(log_tau, 0.0f, max_log_tau);
      log.steps.push_back({step, epoch, lr, loss, tau});
      ++step;
    }
  }
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(log)};
}

#define CIR_INSTANTIATE(T)                                                               \
  template BatchInputs<T> gather_batch<T>(const std::vector<TrainingExample>&,           \
                                          const EmbeddingSource&);                       \
  template T contrastive_loss(const FusionModel<T>&, const BatchInputs<T>&,              \
                              FusionGrads<T>*, BatchInputGrads<T>*);                     \
  template T batch_loss(const FusionModel<T>&, const std::vector<TrainingExample>&,      \
                        const EmbeddingSource&, FusionGrads<T>*);

CIR_INSTANTIATE(float)
CIR_INSTANTIATE(double)
#undef CIR_INSTANTIATE

}  // namespace cir
