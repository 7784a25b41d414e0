#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <cmath>
#include <vector>

#include "cir/attributes.hpp"
#include "cir/experiment.hpp"
#include "cir/fusion.hpp"
#include "cir/gradcheck.hpp"
#include "cir/rng.hpp"
#include "cir/synthetic.hpp"
#include "cir/training.hpp"

namespace support {

using namespace cir;

template <typename T>
BasicTensor<T> random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(scale * standard_normal(rng));
  return t;
}

template <typename T>
BasicTensor<T> random_unit(std::size_t d, Rng& rng) {
  BasicTensor<T> t = random_tensor<T>({d}, rng);
  double n = 0.0;
  for (auto v : t.storage()) n += double(v) * double(v);
  for (auto& v : t.storage()) v = static_cast<T>(v / std::sqrt(n));
  return t;
}

// Small model and batch for end-to-end gradient checks.
struct GradProblem {
  FusionModel<double> model;
  BatchInputs<double> inputs;
};

inline GradProblem make_grad_problem(FusionMode mode, std::uint64_t seed, std::size_t batch = 4,
                                     std::size_t dim = 8, double alpha = 0.01) {
  FusionConfig fc;
  fc.mode = mode;
  fc.alpha = alpha;
  fc.dim = dim;
  fc.heads = 2;
  fc.init_std = 0.3;
  fc.inverse_temperature_init = 5.0;
  fc.seed = seed;
  GradProblem p{make_fusion_model<double>(fc), {}};
  Rng rng = substream(seed, "gradcheck/inputs");
  for (std::size_t i = 0; i < batch; ++i) {
    p.inputs.query_img.push_back(random_unit<double>(dim, rng));
    p.inputs.query_img_tokens.push_back(random_tensor<double>({3, dim}, rng));
    p.inputs.query_txt.push_back(random_unit<double>(dim, rng));
    p.inputs.query_txt_tokens.push_back(random_tensor<double>({2, dim}, rng));
    p.inputs.target_img.push_back(random_unit<double>(dim, rng));
    p.inputs.target_img_tokens.push_back(random_tensor<double>({3, dim}, rng));
  }
  return p;
}

// Every trainable scalar followed by every input scalar.
inline std::vector<BasicTensor<double>*> slots(GradProblem& p) {
  std::vector<BasicTensor<double>*> out;
  for (auto& [name, param] : p.model.named_parameters()) out.push_back(&param->value);
  for (auto* group : {&p.inputs.query_img, &p.inputs.query_img_tokens, &p.inputs.query_txt,
                      &p.inputs.query_txt_tokens, &p.inputs.target_img,
                      &p.inputs.target_img_tokens}) {
    for (auto& t : *group) out.push_back(&t);
  }
  return out;
}

inline Tensor64 pack(GradProblem& p) {
  std::vector<double> flat;
  for (auto* t : slots(p)) flat.insert(flat.end(), t->storage().begin(), t->storage().end());
  const std::size_t n = flat.size();
  return Tensor64({n}, std::move(flat));
}

inline void unpack(GradProblem& p, const Tensor64& x) {
  std::size_t at = 0;
  for (auto* t : slots(p)) {
    for (auto& v : t->storage()) v = x[at++];
  }
}

// Max relative error of the analytic batch-loss gradient (parameters and
// inputs) against central differences.
inline double batch_loss_gradcheck(FusionMode mode, std::uint64_t seed, double alpha = 0.01) {
  GradProblem base = make_grad_problem(mode, seed, 4, 8, alpha);
  const Tensor64 x0 = pack(base);
  DifferentiableFn f = [&](const Tensor64& x, Tensor64* grad) {
    GradProblem p = base;
    unpack(p, x);
    if (!grad) return contrastive_loss(p.model, p.inputs);
    auto grads = FusionGrads<double>::zeros_like(p.model);
    BatchInputGrads<double> in;
    const double loss = contrastive_loss(p.model, p.inputs, &grads, &in);
    std::vector<double> flat;
    if (grads.block) {
      for (const auto& t : *grads.block) flat.insert(flat.end(), t.storage().begin(), t.storage().end());
    }
    flat.push_back(grads.log_inv_temperature);
    auto put = [&](const BasicTensor<double>& t) {
      flat.insert(flat.end(), t.storage().begin(), t.storage().end());
    };
    for (const auto& q : in.queries) put(q.img_pooled);
    for (const auto& q : in.queries) put(q.img_tokens);
    for (const auto& q : in.queries) put(q.txt_pooled);
    for (const auto& q : in.queries) put(q.txt_tokens);
    for (const auto& t : in.targets) put(t.img_pooled);
    for (const auto& t : in.targets) put(t.img_tokens);
    const std::size_t n = flat.size();
    *grad = Tensor64({n}, std::move(flat));
    return loss;
  };
  return finite_difference_check(f, x0);
}

// Catalog with one value per group (color has 3 values, the rest 2), plus an
// optional "trim" label on some items when toggles is set. Small enough that
// many items share attribute sets.
inline AttributeCatalog random_catalog(std::size_t items, std::uint64_t seed, bool toggles = false) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> groups = {
      {"color", {"red", "black", "blue"}},
      {"pattern", {"floral", "plain"}},
      {"material", {"lace", "cotton"}}};
  Rng rng = substream(seed, "support/catalog");
  AttributeCatalog cat;
  for (std::size_t i = 0; i < items; ++i) {
    AttributeSet a;
    for (const auto& [g, vals] : groups) a[g].insert(vals[uniform_index(rng, vals.size())]);
    if (toggles && uniform_index(rng, 2) == 0) a["trim"].insert("bow");
    cat.add("img" + std::to_string(100 + i), a);
  }
  return cat;
}

// Default synthetic world with a held-out split of its swap pairs.
struct SyntheticSetup {
  SyntheticSource source;
  PairSplit split;
  std::vector<TrainingExample> train;
  std::vector<HeldOutQuery> held_out;
  std::vector<std::string> catalog;
};

inline SyntheticSetup make_setup(std::uint64_t seed, std::size_t examples = 1024) {
  WorldConfig wc;
  wc.seed = seed;
  EncoderConfig ec;
  ec.seed = seed;
  SyntheticWorld world = make_world(wc);
  const AttributeIndex index = AttributeIndex::build(world_catalog(world));
  PairSplit split = split_pairs(index, 0.25, seed);
  auto train = examples_from_pairs(split.train, examples, seed);
  auto held = queries_from_pairs(split.held_out);
  std::vector<std::string> catalog;
  for (const auto& it : world.items) catalog.push_back(it.id);
  return {SyntheticSource(std::move(world), make_encoder(ec)), std::move(split), std::move(train),
          std::move(held), std::move(catalog)};
}

inline FusionConfig fusion_config(FusionMode mode, std::uint64_t seed) {
  FusionConfig fc;
  fc.mode = mode;
  fc.seed = seed;
  return fc;
}

}  // namespace support
