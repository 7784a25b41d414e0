#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cir/attributes.hpp"
#include "cir/rng.hpp"

namespace cir {

// Caption patterns with {from} and {to} placeholders. The first entry of
// each list is the default phrasing.
struct CaptionTemplates {
  std::vector<std::string> swap{"{to} not {from}"};
  std::vector<std::string> add{"with {to}"};
  std::vector<std::string> remove{"not {from}"};

  static CaptionTemplates defaults() { return {}; }
  static CaptionTemplates with_paraphrases();
};

// Draws from rng only when the relevant list holds more than one template.
std::string generate_caption(const Change& change, const CaptionTemplates& templates,
                             Rng& rng);

// value -> groups that contain it.
using ValueVocabulary = std::map<std::string, std::vector<std::string>>;
ValueVocabulary value_vocabulary(const std::map<std::string, std::vector<std::string>>& group_values);

// Inverse of generate_caption. Lookup error when the caption matches no
// template or names values outside the vocabulary; data error when the group
// is ambiguous.
Change parse_caption(const std::string& caption, const ValueVocabulary& vocab,
                     const CaptionTemplates& templates = CaptionTemplates::with_paraphrases());

struct SampledPair {
  std::string query_id;
  std::string target_id;
  Change change;
};

// Uniform query, then uniform applicable change, then uniform target among
// items carrying the edited attribute set. nullopt when that set is absent
// from the catalog.
std::optional<SampledPair> sample_pair(const AttributeIndex& index, Rng& rng,
                                       PairMode mode = PairMode::kSwap);

// All ordered (query, target) pairs reachable by sample_pair, in sorted order.
std::vector<SampledPair> enumerate_pairs(const AttributeIndex& index,
                                         PairMode mode = PairMode::kSwap);

// Independent set-difference check: swap mode requires the symmetric
// difference to be {(g, a), (g, b)} for a single group g; toggle mode
// requires exactly one differing label.
bool differs_by_one_label(const AttributeSet& a, const AttributeSet& b, PairMode mode);

enum class ExampleSource { kFiq, kImfq, kSynthetic };

const char* to_string(ExampleSource s);
ExampleSource parse_example_source(const std::string& s);

struct TrainingExample {
  std::string query_id;
  std::string caption;
  std::string target_id;
  ExampleSource source = ExampleSource::kImfq;
  std::optional<Change> change;

  bool operator==(const TrainingExample&) const = default;
};

Json example_to_json(const TrainingExample& e);
TrainingExample example_from_json(const Json& j);
std::vector<TrainingExample> load_examples(const fs::path& path);
void save_examples(const std::vector<TrainingExample>& examples, const fs::path& path);

struct EpochOptions {
  PairMode mode = PairMode::kSwap;
  CaptionTemplates templates = CaptionTemplates::defaults();
  std::size_t max_retries = 1000;
  ExampleSource source = ExampleSource::kImfq;
};

// count examples sampled online from the index. Deterministic in seed. Data
// error after max_retries consecutive failed draws.
std::vector<TrainingExample> generate_epoch(const AttributeIndex& index,
                                            std::size_t count, std::uint64_t seed,
                                            const EpochOptions& options = {});

}  // namespace cir
