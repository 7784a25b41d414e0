#include "cir/judgments.hpp"

#include "cir/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace cir {

const char* to_string(Question q) {
  switch (q) {
    case Question::kAccurate: return "accurate";
    case Question::kReasonable: return "reasonable";
    case Question::kRelevant: return "relevant";
  }
  return "?";
}

Question parse_question(const std::string& s) {
  if (s == "accurate") return Question::kAccurate;
  if (s == "reasonable") return Question::kReasonable;
  if (s == "relevant") return Question::kRelevant;
  fail(ErrorKind::kFormat, "unknown question '" + s + "'");
}

std::vector<JudgmentRecord> load_judgments(const fs::path& path) {
  std::vector<JudgmentRecord> out;
  for (const auto& row : read_jsonl_file(path)) {
    JudgmentRecord r;
    try {
      r.query_id = row.at("query_id").get<std::string>();
      r.catalog_id = row.at("catalog_id").get<std::string>();
      r.question = parse_question(row.at("question").get<std::string>());
      const auto values = row.at("judgments").get<std::vector<int>>();
      require(values.size() == 3, ErrorKind::kData,
              "judgment for (" + r.query_id + ", " + r.catalog_id + ") needs exactly 3 values");
      for (std::size_t i = 0; i < 3; ++i) {
        require(values[i] >= -1 && values[i] <= 1, ErrorKind::kData,
                "judgment values must be -1, 0 or +1");
        r.judgments[i] = values[i];
      }
    } catch (const Json::exception& e) {
      fail(ErrorKind::kFormat, path.string() + ": " + e.what());
    }
    require(r.question != Question::kRelevant, ErrorKind::kData,
            "judgment records carry 'accurate' or 'reasonable' only");
    out.push_back(r);
  }
  return out;
}

void save_judgments(const std::vector<JudgmentRecord>& records, const fs::path& path) {
  std::vector<Json> rows;
  for (const auto& r : records) {
    rows.push_back({{"query_id", r.query_id},
                    {"catalog_id", r.catalog_id},
                    {"question", to_string(r.question)},
                    {"judgments", r.judgments}});
  }
  write_jsonl_file(path, rows);
}

GradedJudgments aggregate_judgments(const std::vector<JudgmentRecord>& records) {
  struct Seen {
    std::optional<double> accurate, reasonable;
  };
  std::map<std::string, std::map<std::string, Seen>> seen;
  for (const auto& r : records) {
    require(r.question != Question::kRelevant, ErrorKind::kData,
            "relevance is derived, not judged");
    for (int j : r.judgments) {
      require(j >= -1 && j <= 1, ErrorKind::kData,
              "judgment value " + std::to_string(j) + " for (" + r.query_id + ", " +
                  r.catalog_id + ") outside {-1, 0, 1}");
    }
    auto& slot = seen[r.query_id][r.catalog_id];
    auto& value = r.question == Question::kAccurate ? slot.accurate : slot.reasonable;
    require(!value.has_value(), ErrorKind::kData,
            "duplicate " + std::string(to_string(r.question)) + " judgment for (" + r.query_id +
                ", " + r.catalog_id + ")");
    value = (r.judgments[0] + r.judgments[1] + r.judgments[2]) / 3.0;
  }
  GradedJudgments out;
  for (const auto& [q, items] : seen) {
    for (const auto& [c, s] : items) {
      require(s.accurate && s.reasonable, ErrorKind::kData,
              "missing " + std::string(s.accurate ? "reasonable" : "accurate") +
                  " judgment for (" + q + ", " + c + ")");
      out[q][c] = GradedPair{*s.accurate, *s.reasonable};
    }
  }
  return out;
}

namespace {
// Graded scores are thirds; compare with slack so -2/3 is not lost to rounding.
constexpr double kSlack = 1e-9;
}  // namespace

bool binarize(double score, Question question, const Thresholds& t) {
  switch (question) {
    case Question::kAccurate: return score > t.accurate + kSlack;
    case Question::kReasonable: return score >= t.reasonable - kSlack;
    case Question::kRelevant: break;
  }
  fail(ErrorKind::kContract, "binarize a relevance label via is_positive");
}

bool is_positive(const GradedPair& g, Question question, const Thresholds& t) {
  switch (question) {
    case Question::kAccurate: return binarize(g.accurate, Question::kAccurate, t);
    case Question::kReasonable: return binarize(g.reasonable, Question::kReasonable, t);
    case Question::kRelevant:
      return binarize(g.accurate, Question::kAccurate, t) &&
             binarize(g.reasonable, Question::kReasonable, t);
  }
  return false;
}

Json query_to_json(const QuerySpec& q) {
  Json j = {{"query_id", q.query_id},
            {"image_id", q.image_id},
            {"category", q.category},
            {"phrasings", q.phrasings},
            {"caption_types", q.caption_types}};
  if (q.target_id) j["target_id"] = *q.target_id;
  if (q.change) j["change"] = change_to_json(*q.change);
  return j;
}

QuerySpec query_from_json(const Json& j) {
  QuerySpec q;
  try {
    q.query_id = j.at("query_id").get<std::string>();
    q.image_id = j.at("image_id").get<std::string>();
    q.category = j.value("category", std::string());
    q.phrasings = j.at("phrasings").get<std::vector<std::string>>();
    q.caption_types = j.value("caption_types", std::vector<std::string>{});
    if (j.contains("target_id") && !j["target_id"].is_null()) {
      q.target_id = j["target_id"].get<std::string>();
    }
    if (j.contains("change") && !j["change"].is_null()) q.change = change_from_json(j["change"]);
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bad query: ") + e.what());
  }
  require(!q.phrasings.empty(), ErrorKind::kData,
          "query '" + q.query_id + "' has no phrasings");
  return q;
}

std::vector<QuerySpec> load_queries(const fs::path& path) {
  std::vector<QuerySpec> out;
  std::set<std::string> ids;
  for (const auto& row : read_jsonl_file(path)) {
    out.push_back(query_from_json(row));
    require(ids.insert(out.back().query_id).second, ErrorKind::kData,
            "duplicate query id '" + out.back().query_id + "'");
  }
  return out;
}

void save_queries(const std::vector<QuerySpec>& queries, const fs::path& path) {
  std::vector<Json> rows;
  for (const auto& q : queries) rows.push_back(query_to_json(q));
  write_jsonl_file(path, rows);
}

ScoreMatrix::ScoreMatrix(std::vector<RowKey> rows, std::vector<std::string> cols)
    : rows_(std::move(rows)), cols_(std::move(cols)), data_(rows_.size() * cols_.size()) {
  for (std::size_t c = 0; c < cols_.size(); ++c) {
    require(col_index_.emplace(cols_[c], c).second, ErrorKind::kFormat,
            "duplicate catalog column '" + cols_[c] + "'");
  }
  std::set<std::pair<std::string, std::size_t>> keys;
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    require(keys.emplace(rows_[r].query_id, rows_[r].phrasing).second, ErrorKind::kFormat,
            "duplicate score row (" + rows_[r].query_id + ", " +
                std::to_string(rows_[r].phrasing) + ")");
    by_query_[rows_[r].query_id].push_back(r);
  }
  for (auto& [q, idx] : by_query_) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return rows_[a].phrasing < rows_[b].phrasing;
    });
  }
}

void ScoreMatrix::set_row(std::size_t row, std::span<const float> values) {
  require(values.size() == cols_.size(), ErrorKind::kDimension, "score row width");
  for (float v : values) {
    require(std::isfinite(v), ErrorKind::kNumeric, "non-finite score");
  }
  std::copy(values.begin(), values.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(row * cols_.size()));
}

std::span<const float> ScoreMatrix::row(std::size_t r) const {
  return std::span<const float>(data_).subspan(r * cols_.size(), cols_.size());
}

const std::vector<std::size_t>& ScoreMatrix::rows_for(const std::string& query_id) const {
  auto it = by_query_.find(query_id);
  if (it == by_query_.end()) fail(ErrorKind::kData, "no scores for query '" + query_id + "'");
  return it->second;
}

std::size_t ScoreMatrix::col_index(const std::string& catalog_id) const {
  auto it = col_index_.find(catalog_id);
  if (it == col_index_.end()) {
    fail(ErrorKind::kData, "no score column for catalog item '" + catalog_id + "'");
  }
  return it->second;
}

ScoreMatrix load_score_matrix(const fs::path& manifest_path) {
  const Json m = read_json_file(manifest_path);
  std::vector<ScoreMatrix::RowKey> rows;
  std::vector<std::string> cols;
  std::string payload;
  try {
    for (const auto& r : m.at("rows")) {
      rows.push_back({r.at("query_id").get<std::string>(), r.at("phrasing").get<std::size_t>()});
    }
    cols = m.at("cols").get<std::vector<std::string>>();
    payload = m.at("payload").get<std::string>();
    require(m.value("dtype", std::string("f32le")) == "f32le", ErrorKind::kFormat,
            "unsupported score dtype");
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, manifest_path.string() + ": " + e.what());
  }
  const auto values = read_f32le(manifest_path.parent_path() / payload);
  require(values.size() == rows.size() * cols.size(), ErrorKind::kFormat,
          manifest_path.string() + ": payload holds " + std::to_string(values.size()) +
              " scores, manifest implies " + std::to_string(rows.size() * cols.size()));
  ScoreMatrix s(std::move(rows), std::move(cols));
  for (std::size_t r = 0; r < s.rows().size(); ++r) {
    s.set_row(r, std::span<const float>(values).subspan(r * s.cols().size(), s.cols().size()));
  }
  return s;
}

void save_score_matrix(const ScoreMatrix& scores, const fs::path& manifest_path,
                       const std::string& config_hash) {
  const std::string payload = manifest_path.stem().string() + ".bin";
  Json rows = Json::array();
  for (const auto& r : scores.rows()) rows.push_back({{"query_id", r.query_id}, {"phrasing", r.phrasing}});
  Json m = {{"rows", rows}, {"cols", scores.cols()}, {"payload", payload}, {"dtype", "f32le"}};
  if (!config_hash.empty()) m["config_hash"] = config_hash;
  write_f32le(manifest_path.parent_path() / payload, scores.data());
  write_json_file(manifest_path, m);
}

namespace {

// Catalog ids ordered by descending score, ties by ascending id.
std::vector<std::string> rank_catalog(const ScoreMatrix& scores, std::size_t row,
                                      const std::vector<std::string>& catalog) {
  std::vector<std::pair<float, const std::string*>> scored;
  scored.reserve(catalog.size());
  for (const auto& id : catalog) scored.emplace_back(scores.at(row, scores.col_index(id)), &id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (const auto& [s, id] : scored) out.push_back(*id);
  return out;
}

template <typename Body>
void for_each_query(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::kParallel) {
    kernels::parallel_for(n, body);
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

// Per query, the AP averaged over phrasings; nullopt when no label is positive.
QueryAP query_ap(const ScoreMatrix& scores, const std::string& query_id,
                 const std::map<std::string, bool>& labels) {
  QueryAP out{query_id, labels.size(), 0, std::nullopt};
  std::vector<std::string> catalog;
  for (const auto& [id, positive] : labels) {
    catalog.push_back(id);
    out.positives += positive ? 1 : 0;
  }
  if (out.positives == 0) return out;
  const auto& rows = scores.rows_for(query_id);
  double sum = 0.0;
  for (auto r : rows) sum += *average_precision(rank_catalog(scores, r, catalog), labels);
  out.ap = sum / static_cast<double>(rows.size());
  return out;
}

MapResult summarize(std::vector<QueryAP> per_query) {
  MapResult result;
  double sum = 0.0;
  for (const auto& q : per_query) {
    if (q.ap) {
      sum += *q.ap;
      ++result.queries_used;
    } else {
      result.skipped.push_back(q.query_id);
    }
  }
  result.map = result.queries_used ? 100.0 * sum / static_cast<double>(result.queries_used) : 0.0;
  result.per_query = std::move(per_query);
  return result;
}

std::map<std::string, bool> labels_for(const std::map<std::string, GradedPair>& items,
                                       Question question, const Thresholds& t) {
  std::map<std::string, bool> labels;
  for (const auto& [id, g] : items) labels[id] = is_positive(g, question, t);
  return labels;
}

}  // namespace

MapResult map_cfq(const ScoreMatrix& scores, const GradedJudgments& judgments,
                  Question question, const Thresholds& thresholds, Exec exec) {
  std::vector<const std::string*> ids;
  for (const auto& [q, items] : judgments) ids.push_back(&q);
  std::vector<QueryAP> per_query(ids.size());
  for_each_query(ids.size(), exec, [&](std::size_t i) {
    per_query[i] = query_ap(scores, *ids[i],
                            labels_for(judgments.at(*ids[i]), question, thresholds));
  });
  return summarize(std::move(per_query));
}

double ndcg_cfq(const ScoreMatrix& scores, const GradedJudgments& judgments, Exec exec) {
  std::vector<const std::string*> ids;
  for (const auto& [q, items] : judgments) ids.push_back(&q);
  std::vector<std::optional<double>> per_query(ids.size());
  for_each_query(ids.size(), exec, [&](std::size_t i) {
    const auto& items = judgments.at(*ids[i]);
    std::map<std::string, double> relevance;
    std::vector<std::string> catalog;
    for (const auto& [id, g] : items) {
      relevance[id] = graded_relevance(g.accurate, g.reasonable);
      catalog.push_back(id);
    }
    const auto& rows = scores.rows_for(*ids[i]);
    double sum = 0.0;
    for (auto r : rows) {
      const auto v = ndcg(rank_catalog(scores, r, catalog), relevance);
      if (!v) return;
      sum += *v;
    }
    per_query[i] = sum / static_cast<double>(rows.size());
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : per_query) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

std::vector<PerQueryRow> per_query_report(const ScoreMatrix& scores,
                                          const GradedJudgments& judgments, Question question,
                                          const Thresholds& thresholds) {
  const MapResult r = map_cfq(scores, judgments, question, thresholds);
  std::vector<PerQueryRow> rows;
  for (const auto& q : r.per_query) {
    rows.push_back({q.query_id, q.catalog_size,
                    q.catalog_size ? static_cast<double>(q.positives) /
                                         static_cast<double>(q.catalog_size)
                                   : 0.0,
                    q.ap});
  }
  return rows;
}

namespace {
std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}
}  // namespace

std::string per_query_csv(const std::vector<PerQueryRow>& rows) {
  std::string out = "query_id,catalog_size,fraction_relevant,ap,random_baseline\n";
  for (const auto& r : rows) {
    out += r.query_id + "," + std::to_string(r.catalog_size) + "," + fmt(r.fraction_positive) +
           "," + (r.ap ? fmt(*r.ap) : "") + "," + fmt(r.fraction_positive) + "\n";
  }
  return out;
}

const std::vector<std::string>& caption_types() {
  static const std::vector<std::string> kTypes = {"elements",    "pattern",  "shape",
                                                  "color",       "conjunction", "negation",
                                                  "modification", "relative"};
  return kTypes;
}

CaptionTypeReport caption_type_report(const ScoreMatrix& scores,
                                      const GradedJudgments& judgments,
                                      const std::vector<QuerySpec>& queries,
                                      const std::vector<std::string>& tags,
                                      const Thresholds& thresholds) {
  CaptionTypeReport report;
  for (const auto& tag : tags) {
    GradedJudgments subset;
    for (const auto& q : queries) {
      if (std::find(q.caption_types.begin(), q.caption_types.end(), tag) ==
          q.caption_types.end()) {
        continue;
      }
      auto it = judgments.find(q.query_id);
      if (it != judgments.end()) subset.emplace(it->first, it->second);
    }
    const MapResult r = subset.empty()
                            ? MapResult{}
                            : map_cfq(scores, subset, Question::kAccurate, thresholds);
    if (r.queries_used == 0) {
      report.notes.push_back("caption type '" + tag + "' has no scorable queries; row omitted");
      continue;
    }
    report.rows.push_back({tag, r.queries_used, r.map});
  }
  return report;
}

std::string caption_type_csv(const CaptionTypeReport& report) {
  std::string out = "caption_type,queries,accuracy_map\n";
  for (const auto& r : report.rows) {
    out += r.caption_type + "," + std::to_string(r.queries) + "," + fmt(r.map) + "\n";
  }
  for (const auto& n : report.notes) out += "# " + n + "\n";
  return out;
}

std::vector<SweepRow> threshold_sweep(const ScoreMatrix& scores,
                                      const GradedJudgments& judgments, Question question,
                                      const std::vector<double>& thresholds) {
  std::vector<SweepRow> rows;
  for (double value : thresholds) {
    Thresholds t;
    if (question == Question::kReasonable) {
      t.reasonable = value;
    } else {
      t.accurate = value;
    }
    std::size_t positives = 0;
    for (const auto& [q, items] : judgments) {
      for (const auto& [c, g] : items) positives += is_positive(g, question, t) ? 1 : 0;
    }
    rows.push_back({question, value, positives, map_cfq(scores, judgments, question, t).map});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "question,threshold,positives,map\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.question)) + "," + fmt(r.threshold) + "," +
           std::to_string(r.positives) + "," + fmt(r.map) + "\n";
  }
  return out;
}

MapResult imfq_map(const ScoreMatrix& scores, const AttributeCatalog& catalog,
                   const std::vector<QuerySpec>& queries, Exec exec) {
  std::vector<std::string> keys(scores.cols().size());
  for (std::size_t c = 0; c < keys.size(); ++c) {
    keys[c] = canonical_key(catalog.attributes(scores.cols()[c]));
  }
  std::vector<QueryAP> per_query(queries.size());
  for_each_query(queries.size(), exec, [&](std::size_t i) {
    const auto& q = queries[i];
    require(q.change.has_value(), ErrorKind::kData,
            "query '" + q.query_id + "' has no change descriptor");
    const std::string target = canonical_key(apply_change(catalog.attributes(q.image_id), *q.change));
    std::map<std::string, bool> labels;
    for (std::size_t c = 0; c < keys.size(); ++c) labels[scores.cols()[c]] = keys[c] == target;
    per_query[i] = query_ap(scores, q.query_id, labels);
  });
  return summarize(std::move(per_query));
}

std::vector<CategoryRecall> fiq_recalls(const ScoreMatrix& scores,
                                        const std::vector<QuerySpec>& queries) {
  std::map<std::string, std::pair<std::vector<std::vector<std::string>>, std::vector<std::string>>>
      by_category;
  for (const auto& q : queries) {
    if (!q.target_id) continue;
    auto& [rankings, targets] = by_category[q.category];
    for (auto r : scores.rows_for(q.query_id)) {
      rankings.push_back(rank_catalog(scores, r, scores.cols()));
      targets.push_back(*q.target_id);
    }
  }
  require(!by_category.empty(), ErrorKind::kData, "no queries with targets");
  std::vector<CategoryRecall> out;
  for (const auto& [category, rt] : by_category) {
    out.push_back({category, recall_at_k(rt.first, rt.second, 10),
                   recall_at_k(rt.first, rt.second, 50)});
  }
  return out;
}

}  // namespace cir
