#include "cir/weaksup.hpp"

#include <algorithm>
#include <regex>

#include "cir/error.hpp"

namespace cir {

CaptionTemplates CaptionTemplates::with_paraphrases() {
  CaptionTemplates t;
  t.swap = {"{to} not {from}", "{to} instead of {from}", "change {from} to {to}"};
  t.add = {"with {to}", "add {to}"};
  t.remove = {"not {from}", "without {from}"};
  return t;
}

namespace {

std::string fill_template(std::string pattern, const Change& c) {
  auto replace = [&](const std::string& key, const std::string& value) {
    for (std::size_t pos; (pos = pattern.find(key)) != std::string::npos;) {
      pattern.replace(pos, key.size(), value);
    }
  };
  replace("{from}", c.from);
  replace("{to}", c.to);
  return pattern;
}

const std::vector<std::string>& templates_for(ChangeKind kind,
                                              const CaptionTemplates& t) {
  switch (kind) {
    case ChangeKind::kSwap: return t.swap;
    case ChangeKind::kAdd: return t.add;
    case ChangeKind::kRemove: return t.remove;
  }
  return t.swap;
}

std::string regex_escape(const std::string& s) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(s, special, R"(\$&)");
}

// Builds a regex for a template; captures appear in placeholder order.
std::regex template_regex(const std::string& pattern, std::vector<std::string>& slots) {
  std::string re;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const auto open = pattern.find('{', pos);
    if (open == std::string::npos) {
      re += regex_escape(pattern.substr(pos));
      break;
    }
    const auto close = pattern.find('}', open);
    re += regex_escape(pattern.substr(pos, open - pos));
    slots.push_back(pattern.substr(open + 1, close - open - 1));
    re += "(.+?)";
    pos = close + 1;
  }
  return std::regex("^" + re + "$");
}

}  // namespace

std::string generate_caption(const Change& change, const CaptionTemplates& templates,
                             Rng& rng) {
  const auto& options = templates_for(change.kind, templates);
  require(!options.empty(), ErrorKind::kConfig, "empty caption template list");
  const std::size_t pick = options.size() > 1 ? uniform_index(rng, options.size()) : 0;
  return fill_template(options[pick], change);
}

ValueVocabulary value_vocabulary(
    const std::map<std::string, std::vector<std::string>>& group_values) {
  ValueVocabulary vocab;
  for (const auto& [g, values] : group_values) {
    for (const auto& v : values) vocab[v].push_back(g);
  }
  return vocab;
}

Change parse_caption(const std::string& caption, const ValueVocabulary& vocab,
                     const CaptionTemplates& templates) {
  const std::string text = normalize_label(caption);
  const std::pair<ChangeKind, const std::vector<std::string>*> kinds[] = {
      {ChangeKind::kSwap, &templates.swap},
      {ChangeKind::kAdd, &templates.add},
      {ChangeKind::kRemove, &templates.remove}};
  for (const auto& [kind, list] : kinds) {
    for (const auto& pattern : *list) {
      std::vector<std::string> slots;
      const std::regex re = template_regex(pattern, slots);
      std::smatch m;
      if (!std::regex_match(text, m, re)) continue;
      std::string from, to;
      for (std::size_t i = 0; i < slots.size(); ++i) {
        (slots[i] == "from" ? from : to) = m[i + 1].str();
      }
      // Candidate groups: those containing every named value.
      std::optional<std::vector<std::string>> groups;
      bool known = true;
      for (const auto& value : {from, to}) {
        if (value.empty()) continue;
        auto it = vocab.find(value);
        if (it == vocab.end()) {
          known = false;
          break;
        }
        if (!groups) {
          groups = it->second;
          continue;
        }
        std::erase_if(*groups, [&](const std::string& g) {
          return std::find(it->second.begin(), it->second.end(), g) == it->second.end();
        });
      }
      if (!known || !groups || groups->empty()) continue;
      require(groups->size() == 1, ErrorKind::kData,
              "caption '" + caption + "' is ambiguous across attribute groups");
      return Change{kind, groups->front(), from, to};
    }
  }
  fail(ErrorKind::kLookup, "caption '" + caption + "' matches no template");
}

std::optional<SampledPair> sample_pair(const AttributeIndex& index, Rng& rng,
                                       PairMode mode) {
  const auto& ids = index.item_ids();
  if (ids.empty()) return std::nullopt;
  const std::string& query = ids[uniform_index(rng, ids.size())];
  const AttributeSet& attrs = index.attributes(query);
  const auto changes = index.applicable_changes(attrs, mode);
  if (changes.empty()) return std::nullopt;
  const Change& change = changes[uniform_index(rng, changes.size())];
  const auto& targets = index.ids_for_key(canonical_key(apply_change(attrs, change)));
  if (targets.empty()) return std::nullopt;
  return SampledPair{query, targets[uniform_index(rng, targets.size())], change};
}

std::vector<SampledPair> enumerate_pairs(const AttributeIndex& index, PairMode mode) {
  std::vector<SampledPair> pairs;
  for (const auto& query : index.item_ids()) {
    const AttributeSet& attrs = index.attributes(query);
    for (const auto& change : index.applicable_changes(attrs, mode)) {
      for (const auto& target :
           index.ids_for_key(canonical_key(apply_change(attrs, change)))) {
        pairs.push_back({query, target, change});
      }
    }
  }
  return pairs;
}

bool differs_by_one_label(const AttributeSet& a, const AttributeSet& b, PairMode mode) {
  const auto diff = symmetric_difference(a, b);
  if (mode == PairMode::kToggle) return diff.size() == 1;
  if (diff.size() != 2) return false;
  const auto& first = *diff.begin();
  const auto& second = *std::next(diff.begin());
  if (first.first != second.first) return false;
  // One side of the swap in each set.
  auto holds = [](const AttributeSet& s, const std::pair<std::string, std::string>& l) {
    auto it = s.find(l.first);
    return it != s.end() && it->second.contains(l.second);
  };
  return holds(a, first) != holds(a, second);
}

const char* to_string(ExampleSource s) {
  switch (s) {
    case ExampleSource::kFiq: return "fiq";
    case ExampleSource::kImfq: return "imfq";
    case ExampleSource::kSynthetic: return "synthetic";
  }
  return "?";
}

ExampleSource parse_example_source(const std::string& s) {
  if (s == "fiq") return ExampleSource::kFiq;
  if (s == "imfq") return ExampleSource::kImfq;
  if (s == "synthetic") return ExampleSource::kSynthetic;
  fail(ErrorKind::kFormat, "unknown example source '" + s + "'");
}

Json example_to_json(const TrainingExample& e) {
  Json j = {{"query_id", e.query_id},
            {"caption", e.caption},
            {"target_id", e.target_id},
            {"source", to_string(e.source)}};
  if (e.change) j["change"] = change_to_json(*e.change);
  return j;
}

TrainingExample example_from_json(const Json& j) {
  TrainingExample e;
  try {
    e.query_id = j.at("query_id").get<std::string>();
    e.caption = j.at("caption").get<std::string>();
    e.target_id = j.at("target_id").get<std::string>();
    e.source = parse_example_source(j.value("source", std::string("fiq")));
    if (j.contains("change")) e.change = change_from_json(j["change"]);
  } catch (const Json::exception& ex) {
    fail(ErrorKind::kFormat, std::string("bad training example: ") + ex.what());
  }
  require(e.query_id != e.target_id, ErrorKind::kData,
          "training example with query == target ('" + e.query_id + "')");
  return e;
}

std::vector<TrainingExample> load_examples(const fs::path& path) {
  std::vector<TrainingExample> out;
  for (const auto& row : read_jsonl_file(path)) out.push_back(example_from_json(row));
  return out;
}

void save_examples(const std::vector<TrainingExample>& examples, const fs::path& path) {
  std::vector<Json> rows;
  rows.reserve(examples.size());
  for (const auto& e : examples) rows.push_back(example_to_json(e));
  write_jsonl_file(path, rows);
}

std::vector<TrainingExample> generate_epoch(const AttributeIndex& index,
                                            std::size_t count, std::uint64_t seed,
                                            const EpochOptions& options) {
  require(count > 0, ErrorKind::kConfig, "generate_epoch: count must be positive");
  Rng sampler = substream(seed, "sampler");
  Rng captions = substream(seed, "captions");
  std::vector<TrainingExample> out;
  out.reserve(count);
  std::size_t misses = 0;
  while (out.size() < count) {
    auto pair = sample_pair(index, sampler, options.mode);
    if (!pair) {
      if (++misses >= options.max_retries) {
        fail(ErrorKind::kData, "sampling starved: no valid pair in " +
                                   std::to_string(options.max_retries) +
                                   " consecutive draws");
      }
      continue;
    }
    misses = 0;
    out.push_back({pair->query_id,
                   generate_caption(pair->change, options.templates, captions),
                   pair->target_id, options.source, pair->change});
  }
  return out;
}

}  // namespace cir
