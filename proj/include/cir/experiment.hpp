#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cir/fusion.hpp"
#include "cir/retrieval.hpp"
#include "cir/training.hpp"
#include "cir/weaksup.hpp"

namespace cir {

struct HeldOutQuery {
  RetrievalQuery query;
  std::string target_id;
};

// Valid swap pairs split into training and held-out parts.
struct PairSplit {
  std::vector<SampledPair> train;
  std::vector<SampledPair> held_out;
};

PairSplit split_pairs(const AttributeIndex& index, double held_out_fraction,
                      std::uint64_t seed, PairMode mode = PairMode::kSwap);

// count examples drawn uniformly (with replacement) from the given pairs,
// captions from the templates.
std::vector<TrainingExample> examples_from_pairs(const std::vector<SampledPair>& pairs,
                                                 std::size_t count, std::uint64_t seed,
                                                 const CaptionTemplates& templates = {});

// One query per pair, default captions, ids "q%04zu".
std::vector<HeldOutQuery> queries_from_pairs(const std::vector<SampledPair>& pairs);

// Every caption the templates can produce for a change, in template order.
std::vector<std::string> all_captions(const Change& change, const CaptionTemplates& templates);

// Query-side view of a source with the image (pooled and tokens) or the
// caption zeroed out.
class MaskedSource : public EmbeddingSource {
 public:
  MaskedSource(const EmbeddingSource& base, bool drop_image, bool drop_text)
      : base_(base), drop_image_(drop_image), drop_text_(drop_text) {}
  std::size_t dim() const override { return base_.dim(); }
  Encoded image(const std::string& id) const override;
  Encoded text(const std::string& caption) const override;

 private:
  const EmbeddingSource& base_;
  bool drop_image_;
  bool drop_text_;
};

struct RecallSummary {
  double r1 = 0.0;   // fractions in [0, 1]
  double r10 = 0.0;
  double query_image_top1 = 0.0;  // top hit is the query image itself
  std::size_t queries = 0;
  std::size_t catalog = 0;
};

// Catalog embedded from source; queries from query_source when given.
RecallSummary evaluate_recall(const FusionModel<float>& model, const EmbeddingSource& source,
                              const std::vector<std::string>& catalog,
                              const std::vector<HeldOutQuery>& queries,
                              const EmbeddingSource* query_source = nullptr);

}  // namespace cir
