#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cir/error.hpp"
#include "cir/judgments.hpp"
#include "cir/metrics.hpp"
#include "fixtures.hpp"

using namespace cir;

namespace {

GradedJudgments fixture_judgments() { return aggregate_judgments(fixtures::hand_fixture().records); }

// Graded label of a question as a score, per (query, phrasing) row.
ScoreMatrix oracle_scores(const ScoreMatrix& like, const GradedJudgments& g, Question q) {
  ScoreMatrix out(like.rows(), like.cols());
  for (std::size_t r = 0; r < like.rows().size(); ++r) {
    std::vector<float> s;
    for (const auto& c : like.cols()) {
      const GradedPair& p = g.at(like.rows()[r].query_id).at(c);
      s.push_back(q == Question::kAccurate     ? float(p.accurate)
                  : q == Question::kReasonable ? float(p.reasonable)
                                               : float(is_positive(p, q)));
    }
    out.set_row(r, s);
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate_judgments") {
  const std::vector<JudgmentRecord> recs = {
      {"q", "a", Question::kAccurate, {1, 1, 1}},
      {"q", "a", Question::kReasonable, {0, -1, -1}},
      {"q", "b", Question::kAccurate, {1, 0, -1}},
      {"q", "b", Question::kReasonable, {-1, -1, -1}},
  };
  const auto g = aggregate_judgments(recs);
  CHECK(g.at("q").at("a").accurate == 1.0);
  CHECK(g.at("q").at("a").reasonable == doctest::Approx(-2.0 / 3.0));
  CHECK(g.at("q").at("b").accurate == 0.0);

  auto dup = recs;
  dup.push_back(recs[0]);
  CHECK_THROWS_AS(aggregate_judgments(dup), Error);
  auto missing = recs;
  missing.pop_back();
  CHECK_THROWS_AS(aggregate_judgments(missing), Error);
  auto bad = recs;
  bad[0].judgments = {1, 2, 0};
  CHECK_THROWS_AS(aggregate_judgments(bad), Error);
  bad = recs;
  bad[0].question = Question::kRelevant;
  CHECK_THROWS_AS(aggregate_judgments(bad), Error);
}

TEST_CASE("binarize thresholds") {
  CHECK_FALSE(binarize(0.0, Question::kAccurate));
  CHECK(binarize(1.0 / 3.0, Question::kAccurate));
  CHECK(binarize(-2.0 / 3.0, Question::kReasonable));
  CHECK(binarize((0.0 - 1.0 - 1.0) / 3.0, Question::kReasonable));
  CHECK_FALSE(binarize(-1.0, Question::kReasonable));
  CHECK(is_positive({1.0 / 3.0, -2.0 / 3.0}, Question::kRelevant));
  CHECK_FALSE(is_positive({0.0, 1.0}, Question::kRelevant));
  CHECK_FALSE(is_positive({1.0, -1.0}, Question::kRelevant));
}

TEST_CASE("average precision") {
  CHECK(*average_precision(std::vector<bool>{true, false}) == 1.0);
  CHECK(*average_precision(std::vector<bool>{false, true}) == 0.5);
  CHECK_FALSE(average_precision(std::vector<bool>{false, false}));
  CHECK(*average_precision(std::vector<bool>{true, true, false, false}) == 1.0);
  CHECK(*average_precision(std::vector<bool>{true, false, true, false}) < 1.0);
  CHECK_THROWS_AS(average_precision({"a", "b"}, {{"a", true}}), Error);
}

TEST_CASE("ndcg") {
  CHECK(*ndcg(std::vector<double>{3, 2, 2, 0}) == doctest::Approx(1.0));
  CHECK(*ndcg(std::vector<double>{0, 2}) == doctest::Approx(2.0 / std::log2(3.0) / 2.0));
  CHECK(*ndcg(std::vector<double>{0, 2}) == doctest::Approx(0.6309).epsilon(1e-4));
  CHECK_FALSE(ndcg(std::vector<double>{0, 0}));
  CHECK(graded_relevance(1.0, -1.0) == 2.0);
}

TEST_CASE("recall at k") {
  const std::vector<std::vector<std::string>> r = {{"a", "b"}, {"b", "a"}, {"b", "a"}, {"b", "a"}};
  CHECK(recall_at_k(r, {"a", "a", "a", "a"}, 1) == 25.0);
  CHECK(recall_at_k(r, {"a", "a", "a", "a"}, 2) == 100.0);
}

TEST_CASE("random scorer recall at 10 on 100 items") {
  Rng rng = substream(5, "r10");
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("i" + std::to_string(1000 + i));
  std::vector<std::vector<std::string>> rankings;
  std::vector<std::string> targets;
  for (int t = 0; t < 10000; ++t) {
    std::vector<float> s;
    for (int i = 0; i < 100; ++i) s.push_back(float(uniform_index(rng, 1u << 24)));
    rankings.push_back(rank_ids(s, ids));
    targets.push_back(ids[uniform_index(rng, 100)]);
  }
  CHECK(std::abs(recall_at_k(rankings, targets, 10) - 10.0) < 1.0);
}

TEST_CASE("fiq score") {
  const std::vector<CategoryRecall> va = {
      {"dress", 16.5, 35.2}, {"toptee", 21.7, 41.9}, {"shirt", 19.5, 35.7}};
  CHECK(std::abs(fiq_score(va) - 28.4) < 0.05);
  CHECK(fiq_score(va) == doctest::Approx(170.5 / 6.0));
  const std::vector<CategoryRecall> ft = {
      {"dress", 31.1, 57.1}, {"toptee", 39.5, 67.2}, {"shirt", 34.4, 59.7}};
  CHECK(std::abs(fiq_score(ft) - 48.2) < 0.05);
  CHECK(fiq_score({{"a", 0, 0}, {"b", 0, 0}, {"c", 0, 0}}) == 0.0);
  std::vector<CategoryRecall> sum = va;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    sum[i].r10 += ft[i].r10;
    sum[i].r50 += ft[i].r50;
  }
  CHECK(fiq_score(sum) == doctest::Approx(fiq_score(va) + fiq_score(ft)));
}

TEST_CASE("metrics match brute-force oracles on random small catalogs") {
  const auto gaps = fixtures::metric_oracle_trials(200, 1);
  CHECK(gaps.catalogs == 200);
  CHECK(gaps.ap <= 1e-9);
  CHECK(gaps.ndcg <= 1e-9);
  CHECK(gaps.recall <= 1e-9);
  CHECK(gaps.imfq <= 1e-9);
}

TEST_CASE("hand fixture") {
  const auto f = fixtures::hand_fixture();
  const auto g = aggregate_judgments(f.records);
  const auto acc = map_cfq(f.scores, g, Question::kAccurate);
  const auto reas = map_cfq(f.scores, g, Question::kReasonable);
  const auto rel = map_cfq(f.scores, g, Question::kRelevant);
  CHECK(std::abs(acc.map - f.accuracy) < 1e-9);
  CHECK(std::abs(reas.map - f.reasonableness) < 1e-9);
  CHECK(std::abs(rel.map - f.relevance) < 1e-9);
  CHECK(rel.queries_used == 2);
  REQUIRE(rel.per_query.size() == 2);
  CHECK(std::abs(*rel.per_query[0].ap - (0.7 + 5.0 / 12.0 + 1.0 + 0.7) / 4.0) < 1e-12);
  CHECK(std::abs(*rel.per_query[1].ap - (0.2 + 1.0 + 0.5 + 0.25) / 4.0) < 1e-12);
  CHECK(std::abs(ndcg_cfq(f.scores, g) - 0.8674585850812274) < 1e-9);
  CHECK(map_cfq(f.scores, g, Question::kRelevant, {}, Exec::kSerial).map == rel.map);
  CHECK(ndcg_cfq(f.scores, g, Exec::kSerial) == ndcg_cfq(f.scores, g));

  // Scoring by the graded labels is optimal.
  for (Question q : {Question::kAccurate, Question::kReasonable, Question::kRelevant}) {
    CHECK(map_cfq(oracle_scores(f.scores, g, q), g, q).map == doctest::Approx(100.0));
  }
}

TEST_CASE("queries without positives are skipped") {
  std::vector<JudgmentRecord> recs;
  for (const char* c : {"a", "b"}) {
    recs.push_back({"none", c, Question::kAccurate, {-1, -1, -1}});
    recs.push_back({"none", c, Question::kReasonable, {1, 1, 1}});
    recs.push_back({"some", c, Question::kAccurate, {1, 1, 1}});
    recs.push_back({"some", c, Question::kReasonable, {1, 1, 1}});
  }
  ScoreMatrix sm({{"none", 0}, {"some", 0}}, {"a", "b"});
  sm.set_row(0, std::vector<float>{1, 0});
  sm.set_row(1, std::vector<float>{1, 0});
  const auto r = map_cfq(sm, aggregate_judgments(recs), Question::kAccurate);
  CHECK(r.queries_used == 1);
  CHECK(r.skipped == std::vector<std::string>{"none"});
  CHECK(r.map == 100.0);
}

TEST_CASE("rankings are invariant under increasing score transforms") {
  const auto f = fixtures::hand_fixture();
  const auto g = aggregate_judgments(f.records);
  ScoreMatrix warped(f.scores.rows(), f.scores.cols());
  for (std::size_t r = 0; r < f.scores.rows().size(); ++r) {
    std::vector<float> s;
    for (float v : f.scores.row(r)) s.push_back(std::exp(3.0f * v) - 7.0f);
    warped.set_row(r, s);
  }
  for (Question q : {Question::kAccurate, Question::kReasonable, Question::kRelevant}) {
    CHECK(map_cfq(warped, g, q).map == map_cfq(f.scores, g, q).map);
  }
  CHECK(ndcg_cfq(warped, g) == ndcg_cfq(f.scores, g));
}

TEST_CASE("threshold sweep is monotone in positives") {
  const auto f = fixtures::hand_fixture();
  const auto g = aggregate_judgments(f.records);
  const std::vector<double> grid = {-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0};
  for (Question q : {Question::kAccurate, Question::kReasonable, Question::kRelevant}) {
    const auto rows = threshold_sweep(f.scores, g, q, grid);
    REQUIRE(rows.size() == grid.size());
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].positives <= rows[i - 1].positives);
  }
  const auto acc = threshold_sweep(f.scores, g, Question::kAccurate, {0.0});
  CHECK(acc[0].map == map_cfq(f.scores, g, Question::kAccurate).map);
  CHECK(sweep_csv(acc).rfind("question,threshold,positives,map\n", 0) == 0);
}

TEST_CASE("per-query report") {
  std::vector<JudgmentRecord> recs;
  const std::vector<std::string> ids = {"a", "b", "c", "d"};
  for (const auto& c : ids) {
    recs.push_back({"all", c, Question::kAccurate, {1, 1, 1}});
    recs.push_back({"all", c, Question::kReasonable, {1, 1, 1}});
    recs.push_back({"quarter", c, Question::kAccurate, {c == "b" ? 1 : -1, 1, 0}});
    recs.push_back({"quarter", c, Question::kReasonable, {1, 1, 1}});
  }
  ScoreMatrix sm({{"all", 0}, {"quarter", 0}}, ids);
  sm.set_row(0, std::vector<float>{0, 3, 1, 2});
  sm.set_row(1, std::vector<float>{0, 3, 1, 2});
  const auto rows = per_query_report(sm, aggregate_judgments(recs));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].fraction_positive == 1.0);
  CHECK(*rows[0].ap == 1.0);
  CHECK(rows[1].fraction_positive == 0.25);
  CHECK(*rows[1].ap == 1.0);
  CHECK(rows[1].catalog_size == 4);
  CHECK(per_query_csv(rows) ==
        "query_id,catalog_size,fraction_relevant,ap,random_baseline\n"
        "all,4,1,1,1\nquarter,4,0.25,1,0.25\n");

  const auto rnd = fixtures::random_ap_trials(1000, 7);
  CHECK(rnd.fraction == 3.0 / 8.0);
  CHECK(std::abs(rnd.mean_ap - rnd.expected) < 0.02);
}

TEST_CASE("caption type report") {
  const auto f = fixtures::hand_fixture();
  const auto g = aggregate_judgments(f.records);
  const double overall = map_cfq(f.scores, g, Question::kAccurate).map;
  QuerySpec a{"A", "img_a", "dress", {"p0", "p1", "p2", "p3"}, {"color", "negation"}, {}, {}};
  QuerySpec b{"B", "img_b", "dress", {"p0", "p1", "p2", "p3"}, {"color", "pattern"}, {}, {}};
  const auto rep = caption_type_report(f.scores, g, {a, b}, caption_types());
  std::map<std::string, CaptionTypeRow> by;
  for (const auto& r : rep.rows) by[r.caption_type] = r;
  CHECK(by.at("color").map == doctest::Approx(overall));
  CHECK(by.at("color").queries == 2);
  // negation holds only A and pattern only B: the disjoint split averages back.
  CHECK((by.at("negation").map + by.at("pattern").map) / 2.0 == doctest::Approx(overall));
  CHECK(by.at("negation").map ==
        doctest::Approx(map_cfq(f.scores, {{"A", g.at("A")}}, Question::kAccurate).map));
  CHECK(rep.rows.size() == 3);
  CHECK(rep.notes.size() == caption_types().size() - 3);
  CHECK(caption_type_csv(rep).find("# caption type 'shape'") != std::string::npos);
}

TEST_CASE("imfq attribute-match mAP") {
  AttributeCatalog cat;
  auto attrs = [](std::string color, std::string sleeve) {
    AttributeSet a;
    a["color"].insert(color);
    a["sleeve"].insert(sleeve);
    return a;
  };
  cat.add("q", attrs("red", "long"));
  cat.add("t1", attrs("black", "long"));
  cat.add("t2", attrs("black", "long"));
  cat.add("x1", attrs("black", "short"));
  cat.add("x2", attrs("red", "short"));
  cat.add("x3", attrs("blue", "long"));
  CHECK(apply_change(attrs("red", "long"), Change::swap("color", "red", "black")) ==
        attrs("black", "long"));
  QuerySpec spec;
  spec.query_id = "Q";
  spec.image_id = "q";
  spec.phrasings = {"black not red"};
  spec.change = Change::swap("color", "red", "black");
  ScoreMatrix sm({{"Q", 0}}, {"q", "t1", "t2", "x1", "x2", "x3"});
  sm.set_row(0, std::vector<float>{0.9f, 0.8f, 0.1f, 0.85f, 0.2f, 0.3f});
  // ranking q, x1, t1, x3, x2, t2 -> positives at 3 and 6.
  const auto r = imfq_map(sm, cat, {spec});
  CHECK(*r.per_query[0].ap == doctest::Approx((1.0 / 3.0 + 2.0 / 6.0) / 2.0));
  CHECK(r.map == doctest::Approx(100.0 / 3.0));

  sm.set_row(0, std::vector<float>{0.0f, 1.0f, 0.9f, 0.5f, 0.5f, 0.5f});
  CHECK(imfq_map(sm, cat, {spec}).map == doctest::Approx(100.0));

  spec.change = Change::swap("color", "blue", "black");
  CHECK_THROWS_AS(imfq_map(sm, cat, {spec}), Error);
}

TEST_CASE("fiq recalls from a score matrix") {
  std::vector<std::string> ids;
  for (int i = 0; i < 60; ++i) ids.push_back("i" + std::to_string(100 + i));
  ScoreMatrix sm({{"d1", 0}, {"d2", 0}, {"s1", 0}}, ids);
  std::vector<float> s(60);
  for (int i = 0; i < 60; ++i) s[i] = float(60 - i);  // rank = index
  sm.set_row(0, s);
  sm.set_row(1, s);
  sm.set_row(2, s);
  const std::vector<QuerySpec> qs = {
      {"d1", "x", "dress", {"c"}, {}, "i100", {}},
      {"d2", "x", "dress", {"c"}, {}, "i120", {}},
      {"s1", "x", "shirt", {"c"}, {}, "i155", {}},
  };
  const auto rec = fiq_recalls(sm, qs);
  REQUIRE(rec.size() == 2);
  CHECK(rec[0].category == "dress");
  CHECK(rec[0].r10 == 50.0);
  CHECK(rec[0].r50 == 100.0);
  CHECK(rec[1].r10 == 0.0);
  CHECK(rec[1].r50 == 0.0);
}

TEST_CASE("file formats round trip") {
  const fs::path dir = fs::temp_directory_path() / "cir_test_eval";
  fs::create_directories(dir);
  const auto f = fixtures::hand_fixture();
  save_judgments(f.records, dir / "j.jsonl");
  const auto back = load_judgments(dir / "j.jsonl");
  REQUIRE(back.size() == f.records.size());
  CHECK(back[3].judgments == f.records[3].judgments);
  CHECK(back[3].question == f.records[3].question);

  save_score_matrix(f.scores, dir / "s.json", "abc");
  CHECK(load_score_matrix(dir / "s.json") == f.scores);

  QuerySpec q{"A", "img", "dress", {"x", "y"}, {"color"}, "t", Change::add("trim", "bow")};
  save_queries({q}, dir / "q.jsonl");
  const auto qb = load_queries(dir / "q.jsonl");
  REQUIRE(qb.size() == 1);
  CHECK(qb[0].phrasings == q.phrasings);
  CHECK(qb[0].change == q.change);
  CHECK(qb[0].target_id == q.target_id);

  std::ofstream(dir / "bad.jsonl") << "{\"query_id\":\"q\",\"catalog_id\":\"c\"}\n";
  CHECK_THROWS_AS(load_judgments(dir / "bad.jsonl"), Error);
  fs::remove_all(dir);
}
