#pragma once

#include <array>
#include <span>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cir/attributes.hpp"
#include "cir/kernels.hpp"
#include "cir/metrics.hpp"
#include "cir/util.hpp"

namespace cir {

enum class Question { kAccurate, kReasonable, kRelevant };

const char* to_string(Question q);
Question parse_question(const std::string& s);

// Three annotator answers mapped to -1 / 0 / +1.
struct JudgmentRecord {
  std::string query_id;
  std::string catalog_id;
  Question question = Question::kAccurate;  // accurate or reasonable
  std::array<int, 3> judgments{};
};

std::vector<JudgmentRecord> load_judgments(const fs::path& path);
void save_judgments(const std::vector<JudgmentRecord>& records, const fs::path& path);

struct GradedPair {
  double accurate = 0.0;    // mean of the three answers, in [-1, 1]
  double reasonable = 0.0;
};

// query id -> catalog id -> graded answers. The catalog of a query is the set
// of ids judged for it.
using GradedJudgments = std::map<std::string, std::map<std::string, GradedPair>>;

// Data error on duplicate records or on a pair judged for only one question.
GradedJudgments aggregate_judgments(const std::vector<JudgmentRecord>& records);

struct Thresholds {
  double accurate = 0.0;            // positive iff score > threshold
  double reasonable = -2.0 / 3.0;   // positive iff score >= threshold
};

bool binarize(double score, Question question, const Thresholds& t = {});
// Relevant is the conjunction of accurate and reasonable.
bool is_positive(const GradedPair& g, Question question, const Thresholds& t = {});

struct QuerySpec {
  std::string query_id;
  std::string image_id;
  std::string category;
  std::vector<std::string> phrasings;
  std::vector<std::string> caption_types;
  std::optional<std::string> target_id;
  std::optional<Change> change;
};

Json query_to_json(const QuerySpec& q);
QuerySpec query_from_json(const Json& j);
std::vector<QuerySpec> load_queries(const fs::path& path);
void save_queries(const std::vector<QuerySpec>& queries, const fs::path& path);

// Scores s_{q,c}: one row per (query, phrasing), one column per catalog id.
class ScoreMatrix {
 public:
  struct RowKey {
    std::string query_id;
    std::size_t phrasing = 0;
    bool operator==(const RowKey&) const = default;
  };

  ScoreMatrix() = default;
  ScoreMatrix(std::vector<RowKey> rows, std::vector<std::string> cols);

  void set_row(std::size_t row, std::span<const float> values);
  float at(std::size_t row, std::size_t col) const { return data_[row * cols_.size() + col]; }
  std::span<const float> row(std::size_t r) const;
  const std::vector<RowKey>& rows() const { return rows_; }
  const std::vector<std::string>& cols() const { return cols_; }
  const std::vector<float>& data() const { return data_; }

  // Row indices for a query in phrasing order; data error when absent.
  const std::vector<std::size_t>& rows_for(const std::string& query_id) const;
  bool has_query(const std::string& query_id) const { return by_query_.contains(query_id); }
  std::size_t col_index(const std::string& catalog_id) const;  // data error if absent

  bool operator==(const ScoreMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::vector<RowKey> rows_;
  std::vector<std::string> cols_;
  std::vector<float> data_;
  std::map<std::string, std::vector<std::size_t>> by_query_;
  std::map<std::string, std::size_t> col_index_;
};

ScoreMatrix load_score_matrix(const fs::path& manifest_path);
void save_score_matrix(const ScoreMatrix& scores, const fs::path& manifest_path,
                       const std::string& config_hash = "");

struct QueryAP {
  std::string query_id;
  std::size_t catalog_size = 0;
  std::size_t positives = 0;
  std::optional<double> ap;  // mean over phrasings; nullopt when no positives
};

struct MapResult {
  double map = 0.0;  // percent
  std::size_t queries_used = 0;
  std::vector<std::string> skipped;  // queries with no positive label
  std::vector<QueryAP> per_query;
};

// Per query: AP of each phrasing's ranking of the judged catalog against the
// binarized labels, averaged over phrasings. mAP averages queries with at
// least one positive label.
MapResult map_cfq(const ScoreMatrix& scores, const GradedJudgments& judgments,
                  Question question, const Thresholds& thresholds = {},
                  Exec exec = Exec::kParallel);

// Mean over queries and phrasings of nDCG with relevance
// accuracy + reasonableness + 2.
double ndcg_cfq(const ScoreMatrix& scores, const GradedJudgments& judgments,
                Exec exec = Exec::kParallel);

struct PerQueryRow {
  std::string query_id;
  std::size_t catalog_size = 0;
  double fraction_positive = 0.0;  // also the expected AP of a random ranking
  std::optional<double> ap;
};

std::vector<PerQueryRow> per_query_report(const ScoreMatrix& scores,
                                          const GradedJudgments& judgments,
                                          Question question = Question::kRelevant,
                                          const Thresholds& thresholds = {});
std::string per_query_csv(const std::vector<PerQueryRow>& rows);

struct CaptionTypeRow {
  std::string caption_type;
  std::size_t queries = 0;
  double map = 0.0;
};

struct CaptionTypeReport {
  std::vector<CaptionTypeRow> rows;
  std::vector<std::string> notes;  // omitted empty groups
};

// Accuracy mAP restricted to queries carrying each tag. Tags overlap.
CaptionTypeReport caption_type_report(const ScoreMatrix& scores,
                                      const GradedJudgments& judgments,
                                      const std::vector<QuerySpec>& queries,
                                      const std::vector<std::string>& tags,
                                      const Thresholds& thresholds = {});
std::string caption_type_csv(const CaptionTypeReport& report);

// Canonical caption-type tags.
const std::vector<std::string>& caption_types();

struct SweepRow {
  Question question = Question::kAccurate;
  double threshold = 0.0;
  std::size_t positives = 0;
  double map = 0.0;
};

// mAP as the question's own threshold moves over the given values (the other
// threshold stays at its default; relevance sweeps the accuracy threshold).
std::vector<SweepRow> threshold_sweep(const ScoreMatrix& scores,
                                      const GradedJudgments& judgments, Question question,
                                      const std::vector<double>& thresholds);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Attribute-match mAP: positives are catalog items whose attribute set equals
// the query image's set with the caption's change applied.
MapResult imfq_map(const ScoreMatrix& scores, const AttributeCatalog& catalog,
                   const std::vector<QuerySpec>& queries, Exec exec = Exec::kParallel);

// Per-category R@10 and R@50 over queries with targets; every phrasing row is
// one retrieval.
std::vector<CategoryRecall> fiq_recalls(const ScoreMatrix& scores,
                                        const std::vector<QuerySpec>& queries);

}  // namespace cir
