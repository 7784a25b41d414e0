#pragma once

// Evaluation fixtures shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cir/judgments.hpp"
#include "cir/metrics.hpp"
#include "cir/retrieval.hpp"
#include "cir/rng.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace cir;

// Two queries, four phrasings, six catalog items, judged by hand.
struct HandFixture {
  std::vector<JudgmentRecord> records;
  ScoreMatrix scores;
  // Expected percentages as exact fractions, computed by hand.
  double accuracy = 4405.0 / 72.0;
  double reasonableness = 8531.0 / 96.0;
  double relevance = 715.0 / 12.0;
};

inline HandFixture hand_fixture() {
  using Triple = std::array<int, 3>;
  struct Row {
    const char* query;
    const char* item;
    Triple acc, reas;
  };
  const std::vector<Row> rows = {
      {"A", "c1", {1, 1, 1}, {1, 1, 0}},       {"A", "c2", {1, 0, -1}, {0, -1, -1}},
      {"A", "c3", {1, 1, -1}, {-1, -1, -1}},   {"A", "c4", {-1, -1, -1}, {1, 1, 1}},
      {"A", "c5", {1, 1, 0}, {0, -1, -1}},     {"A", "c6", {0, 0, -1}, {0, 0, 0}},
      {"B", "c1", {-1, 1, 0}, {1, 1, 1}},      {"B", "c2", {1, 1, 1}, {1, 0, 0}},
      {"B", "c3", {-1, -1, 0}, {-1, -1, 0}},   {"B", "c4", {-1, -1, -1}, {-1, -1, -1}},
      {"B", "c5", {0, 0, 1}, {-1, -1, -1}},    {"B", "c6", {-1, -1, -1}, {0, -1, -1}},
  };
  HandFixture f;
  for (const auto& r : rows) {
    f.records.push_back({r.query, r.item, Question::kAccurate, r.acc});
    f.records.push_back({r.query, r.item, Question::kReasonable, r.reas});
  }
  const std::vector<std::string> cols = {"c1", "c2", "c3", "c4", "c5", "c6"};
  // Rankings per phrasing; an empty ranking means every score ties.
  const std::vector<std::pair<std::string, std::vector<std::string>>> orders = {
      {"A", {"c1", "c2", "c3", "c4", "c5", "c6"}},
      {"A", {"c6", "c5", "c4", "c3", "c2", "c1"}},
      {"A", {"c5", "c1", "c6", "c2", "c3", "c4"}},
      {"A", {}},
      {"B", {"c6", "c5", "c4", "c3", "c2", "c1"}},
      {"B", {"c2", "c1", "c3", "c4", "c5", "c6"}},
      {"B", {"c3", "c2", "c1", "c6", "c5", "c4"}},
      {"B", {"c1", "c3", "c5", "c2", "c4", "c6"}},
  };
  std::vector<ScoreMatrix::RowKey> keys;
  for (std::size_t i = 0; i < orders.size(); ++i) keys.push_back({orders[i].first, i % 4});
  f.scores = ScoreMatrix(keys, cols);
  for (std::size_t i = 0; i < orders.size(); ++i) {
    std::vector<float> s(cols.size(), 0.5f);
    const auto& order = orders[i].second;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto c = std::find(cols.begin(), cols.end(), order[pos]) - cols.begin();
      s[static_cast<std::size_t>(c)] = static_cast<float>(order.size() - pos);
    }
    f.scores.set_row(i, s);
  }
  return f;
}

// Largest absolute gap between library metrics and the brute-force oracles.
struct OracleGaps {
  double ap = 0.0, ndcg = 0.0, recall = 0.0, imfq = 0.0;
  std::size_t catalogs = 0;
  double max() const { return std::max({ap, ndcg, recall, imfq}); }
};

// Random catalogs of 2..8 items. Scores are quantized so ties occur.
inline OracleGaps metric_oracle_trials(std::size_t trials, std::uint64_t seed) {
  Rng rng = substream(seed, "fixtures/oracle");
  OracleGaps gaps;
  const std::vector<std::string> colors = {"red", "black", "blue"};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 7);
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<float> fscores;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back("id" + std::to_string((i * 7 + t) % 10) + "_" + std::to_string(i));
      const float s = static_cast<float>(uniform_index(rng, 5)) / 4.0f;
      fscores.push_back(s);
      scores.push_back(s);
    }
    const auto ranking = rank_ids(fscores, ids);

    std::vector<bool> labels(n);
    std::map<std::string, bool> label_map;
    std::vector<double> rel(n);
    std::map<std::string, double> rel_map;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = uniform_index(rng, 3) == 0;
      label_map[ids[i]] = labels[i];
      rel[i] = graded_relevance(
          (static_cast<double>(uniform_index(rng, 7)) - 3.0) / 3.0,
          (static_cast<double>(uniform_index(rng, 7)) - 3.0) / 3.0);
      rel_map[ids[i]] = rel[i];
    }
    const auto ap_lib = average_precision(ranking, label_map);
    const auto ap_ref = oracle::ap(oracle::ranked_labels(scores, ids, labels));
    if (ap_lib.has_value() != ap_ref.has_value()) return {1, 1, 1, 1, t};
    if (ap_lib) gaps.ap = std::max(gaps.ap, std::abs(*ap_lib - *ap_ref));

    std::vector<double> ranked_rel(n);
    for (std::size_t i = 0; i < n; ++i) ranked_rel[oracle::rank_of(scores, ids, i)] = rel[i];
    const auto nd_lib = ndcg(ranking, rel_map);
    const auto nd_ref = oracle::ndcg(ranked_rel);
    if (nd_lib.has_value() != nd_ref.has_value()) return {1, 1, 1, 1, t};
    if (nd_lib) gaps.ndcg = std::max(gaps.ndcg, std::abs(*nd_lib - *nd_ref));

    // Three queries sharing the catalog, one target each.
    std::vector<std::vector<double>> qs;
    std::vector<std::vector<std::string>> rankings;
    std::vector<std::size_t> targets;
    std::vector<std::string> target_ids;
    for (int q = 0; q < 3; ++q) {
      std::vector<double> s;
      std::vector<float> fs;
      for (std::size_t i = 0; i < n; ++i) {
        fs.push_back(static_cast<float>(uniform_index(rng, 5)) / 4.0f);
        s.push_back(fs.back());
      }
      qs.push_back(s);
      rankings.push_back(rank_ids(fs, ids));
      targets.push_back(uniform_index(rng, n));
      target_ids.push_back(ids[targets.back()]);
    }
    for (std::size_t k : {1u, 2u, 5u}) {
      gaps.recall = std::max(gaps.recall, std::abs(recall_at_k(rankings, target_ids, k) -
                                                   oracle::recall_at_k(qs, ids, targets, k)));
    }

    // Attribute-match AP with colour swaps and sleeve toggles.
    AttributeCatalog cat;
    std::vector<oracle::Attrs> items;
    for (std::size_t i = 0; i < n; ++i) {
      oracle::Attrs a;
      a["color"].insert(colors[uniform_index(rng, colors.size())]);
      if (uniform_index(rng, 2) == 0) a["sleeve"].insert("long");
      items.push_back(a);
      cat.add(ids[i], a);
    }
    const std::size_t qi = uniform_index(rng, n);
    const oracle::Attrs& qa = items[qi];
    const std::string from = *qa.at("color").begin();
    std::string group = "color", ofrom = from, oto;
    Change change;
    switch (uniform_index(rng, 3)) {
      case 0:
        oto = colors[(std::find(colors.begin(), colors.end(), from) - colors.begin() + 1) % 3];
        change = Change::swap("color", from, oto);
        break;
      default:
        group = "sleeve";
        if (qa.contains("sleeve")) {
          ofrom = "long";
          change = Change::remove("sleeve", "long");
        } else {
          ofrom = "";
          oto = "long";
          change = Change::add("sleeve", "long");
        }
    }
    ScoreMatrix sm({{"q", 0}}, ids);
    sm.set_row(0, fscores);
    QuerySpec spec;
    spec.query_id = "q";
    spec.image_id = ids[qi];
    spec.phrasings = {"x"};
    spec.change = change;
    const MapResult lib = imfq_map(sm, cat, {spec});
    const auto ref = oracle::imfq_ap(items, ids, scores, qa, group, ofrom, oto);
    if (lib.per_query[0].ap.has_value() != ref.has_value()) return {1, 1, 1, 1, t};
    if (ref) gaps.imfq = std::max(gaps.imfq, std::abs(*lib.per_query[0].ap - *ref));
    ++gaps.catalogs;
  }
  return gaps;
}

struct RandomApResult {
  double mean_ap = 0.0;
  double expected = 0.0;     // exhaustive over permutations
  double fraction = 0.0;     // reported random baseline
};

// Random scorer over an 8-item judged catalog with 3 relevant items.
inline RandomApResult random_ap_trials(std::size_t trials, std::uint64_t seed) {
  const std::vector<bool> relevant = {true, false, false, true, false, false, true, false};
  std::vector<JudgmentRecord> records;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    ids.push_back("c" + std::to_string(i));
    const std::array<int, 3> a = relevant[i] ? std::array<int, 3>{1, 1, 1} : std::array<int, 3>{-1, -1, -1};
    records.push_back({"q", ids[i], Question::kAccurate, a});
    records.push_back({"q", ids[i], Question::kReasonable, {1, 1, 1}});
  }
  const GradedJudgments judged = aggregate_judgments(records);
  Rng rng = substream(seed, "fixtures/random_ap");
  RandomApResult r;
  for (std::size_t t = 0; t < trials; ++t) {
    ScoreMatrix sm({{"q", 0}}, ids);
    std::vector<float> s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      s.push_back(static_cast<float>(uniform_index(rng, 1u << 24)));
    }
    sm.set_row(0, s);
    const auto rows = per_query_report(sm, judged, Question::kRelevant);
    r.mean_ap += *rows[0].ap;
    r.fraction = rows[0].fraction_positive;
  }
  r.mean_ap /= static_cast<double>(trials);
  r.expected = oracle::expected_random_ap(relevant);
  return r;
}

}  // namespace fixtures
