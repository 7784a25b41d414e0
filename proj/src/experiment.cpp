#include "cir/experiment.hpp"

#include <algorithm>
#include <cstdio>

#include "cir/error.hpp"
#include "cir/rng.hpp"

namespace cir {

PairSplit split_pairs(const AttributeIndex& index, double held_out_fraction,
                      std::uint64_t seed, PairMode mode) {
  require(held_out_fraction >= 0.0 && held_out_fraction < 1.0, ErrorKind::kConfig,
          "held-out fraction must be in [0, 1)");
  auto pairs = enumerate_pairs(index, mode);
  require(!pairs.empty(), ErrorKind::kData, "catalog has no valid pairs");
  Rng rng = substream(seed, "split");
  shuffle(pairs.begin(), pairs.end(), rng);
  const auto n_held = static_cast<std::size_t>(held_out_fraction * static_cast<double>(pairs.size()));
  PairSplit split;
  split.held_out.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_held));
  split.train.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_held), pairs.end());
  require(!split.train.empty(), ErrorKind::kData, "no training pairs left after the split");
  return split;
}

std::vector<TrainingExample> examples_from_pairs(const std::vector<SampledPair>& pairs,
                                                 std::size_t count, std::uint64_t seed,
                                                 const CaptionTemplates& templates) {
  require(!pairs.empty(), ErrorKind::kData, "no pairs to draw examples from");
  Rng pick = substream(seed, "examples");
  Rng captions = substream(seed, "captions");
  std::vector<TrainingExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = pairs[uniform_index(pick, pairs.size())];
    out.push_back({p.query_id, generate_caption(p.change, templates, captions), p.target_id,
                   ExampleSource::kSynthetic, p.change});
  }
  return out;
}

std::vector<HeldOutQuery> queries_from_pairs(const std::vector<SampledPair>& pairs) {
  const CaptionTemplates templates;
  Rng unused = substream(0, "unused");
  std::vector<HeldOutQuery> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "q%04zu", i);
    out.push_back({{id, pairs[i].query_id, generate_caption(pairs[i].change, templates, unused)},
                   pairs[i].target_id});
  }
  return out;
}

std::vector<std::string> all_captions(const Change& change, const CaptionTemplates& templates) {
  const auto& patterns = change.kind == ChangeKind::kSwap  ? templates.swap
                         : change.kind == ChangeKind::kAdd ? templates.add
                                                           : templates.remove;
  Rng unused(0);
  std::vector<std::string> out;
  for (const auto& pattern : patterns) {
    CaptionTemplates one;
    one.swap = one.add = one.remove = {pattern};
    out.push_back(generate_caption(change, one, unused));
  }
  return out;
}

Encoded MaskedSource::image(const std::string& id) const {
  Encoded e = base_.image(id);
  if (drop_image_) {
    e.pooled.fill(0.0f);
    e.tokens.fill(0.0f);
  }
  return e;
}

Encoded MaskedSource::text(const std::string& caption) const {
  return base_.text(drop_text_ ? std::string() : caption);
}

RecallSummary evaluate_recall(const FusionModel<float>& model, const EmbeddingSource& source,
                              const std::vector<std::string>& catalog,
                              const std::vector<HeldOutQuery>& queries,
                              const EmbeddingSource* query_source) {
  require(!queries.empty(), ErrorKind::kData, "no held-out queries");
  std::vector<RetrievalQuery> rq;
  for (const auto& q : queries) rq.push_back(q.query);
  const Tensor c = embed_catalog(model, source, catalog);
  const Tensor s = score_matrix(embed_queries(model, query_source ? *query_source : source, rq), c);
  RecallSummary out{0.0, 0.0, 0.0, queries.size(), catalog.size()};
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto ranking = rank_ids(s.row(i), catalog);
    const auto pos = std::find(ranking.begin(), ranking.end(), queries[i].target_id) - ranking.begin();
    require(static_cast<std::size_t>(pos) < ranking.size(), ErrorKind::kData,
            "target '" + queries[i].target_id + "' not in catalog");
    out.r1 += pos < 1 ? 1.0 : 0.0;
    out.r10 += pos < 10 ? 1.0 : 0.0;
    out.query_image_top1 += ranking.front() == queries[i].query.image_id ? 1.0 : 0.0;
  }
  out.query_image_top1 /= static_cast<double>(queries.size());
  out.r1 /= static_cast<double>(queries.size());
  out.r10 /= static_cast<double>(queries.size());
  return out;
}

}  // namespace cir
