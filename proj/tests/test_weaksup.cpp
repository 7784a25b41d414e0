#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "cir/attributes.hpp"
#include "cir/error.hpp"
#include "cir/weaksup.hpp"
#include "support.hpp"

using namespace cir;

namespace {

AttributeSet attrs(std::initializer_list<std::pair<const char*, const char*>> labels) {
  AttributeSet a;
  for (auto [g, v] : labels) a[g].insert(v);
  return a;
}

AttributeIndex forced_index() {
  AttributeCatalog cat;
  cat.add("a", attrs({{"color", "red"}, {"pattern", "plain"}}));
  cat.add("b", attrs({{"color", "black"}, {"pattern", "plain"}}));
  return AttributeIndex::build(cat);
}

// Brute force over all ordered item pairs.
std::set<std::pair<std::string, std::string>> scan_pairs(const AttributeCatalog& cat,
                                                          PairMode mode) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& [qa, a] : cat.items()) {
    for (const auto& [qb, b] : cat.items()) {
      if (qa != qb && differs_by_one_label(a, b, mode)) out.emplace(qa, qb);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("labels normalize and keys are canonical") {
  CHECK(normalize_label("  Floral Print ") == "floral print");
  CHECK(canonical_key(attrs({{"pattern", "floral"}, {"color", "red"}})) ==
        "color=red;pattern=floral");
  AttributeSet two;
  two["color"] = {"red", "black"};
  CHECK(canonical_key(two) == "color=black,red");
}

TEST_CASE("schema rejects unknown labels") {
  AttributeSchema schema;
  schema.groups["color"] = {"red", "black"};
  AttributeCatalog cat(schema);
  cat.add("a", attrs({{"color", "Red"}}));
  CHECK(cat.attributes("a").at("color").count("red") == 1);
  CHECK_THROWS_AS(cat.add("b", attrs({{"color", "green"}})), Error);
  CHECK_THROWS_AS(cat.add("c", attrs({{"size", "xl"}})), Error);
  CHECK_THROWS_AS(cat.add("a", attrs({{"color", "black"}})), Error);
}

TEST_CASE("build_index") {
  AttributeCatalog one;
  one.add("x", attrs({{"color", "red"}}));
  CHECK(AttributeIndex::build(one).key_count() == 1);

  AttributeCatalog twins;
  twins.add("x", attrs({{"color", "red"}}));
  twins.add("y", attrs({{"color", "red"}}));
  const AttributeIndex ti = AttributeIndex::build(twins);
  CHECK(ti.key_count() == 1);
  CHECK(ti.ids_for_key(ti.key_of("x")) == std::vector<std::string>{"x", "y"});

  AttributeCatalog empty_attrs;
  empty_attrs.add("x", {});
  CHECK_THROWS_AS(AttributeIndex::build(empty_attrs), Error);

  // Union of neighbour lists equals the brute-force pair scan.
  const AttributeCatalog cat = support::random_catalog(50, 3);
  const AttributeIndex idx = AttributeIndex::build(cat);
  std::set<std::pair<std::string, std::string>> via_index;
  for (const auto& id : idx.item_ids()) {
    const auto& own = idx.ids_for_key(idx.key_of(id));
    CHECK(std::find(own.begin(), own.end(), id) != own.end());
    for (const Change& c : idx.applicable_changes(idx.attributes(id), PairMode::kSwap)) {
      for (const auto& t : idx.ids_for_key(canonical_key(apply_change(idx.attributes(id), c)))) {
        via_index.emplace(id, t);
      }
    }
  }
  CHECK(via_index == scan_pairs(cat, PairMode::kSwap));
}

TEST_CASE("differs_by_one_label") {
  const AttributeSet red = attrs({{"color", "red"}, {"pattern", "plain"}});
  const AttributeSet black = attrs({{"color", "black"}, {"pattern", "plain"}});
  const AttributeSet black_floral = attrs({{"color", "black"}, {"pattern", "floral"}});
  AttributeSet red_bow = red;
  red_bow["trim"].insert("bow");
  CHECK(differs_by_one_label(red, black, PairMode::kSwap));
  CHECK_FALSE(differs_by_one_label(red, black_floral, PairMode::kSwap));
  CHECK_FALSE(differs_by_one_label(red, red, PairMode::kSwap));
  CHECK_FALSE(differs_by_one_label(red, red_bow, PairMode::kSwap));
  CHECK(differs_by_one_label(red, red_bow, PairMode::kToggle));
  CHECK_FALSE(differs_by_one_label(red, black, PairMode::kToggle));
}

TEST_CASE("sample_pair forced and impossible cases") {
  const AttributeIndex idx = forced_index();
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    auto p = sample_pair(idx, rng);
    REQUIRE(p);
    if (p->query_id == "a") {
      CHECK(p->target_id == "b");
      CHECK(p->change == Change::swap("color", "red", "black"));
    } else {
      CHECK(p->target_id == "a");
      CHECK(p->change == Change::swap("color", "black", "red"));
    }
  }

  AttributeCatalog same;
  for (int i = 0; i < 4; ++i) same.add("s" + std::to_string(i), attrs({{"color", "red"}}));
  const AttributeIndex si = AttributeIndex::build(same);
  for (int i = 0; i < 20; ++i) CHECK_FALSE(sample_pair(si, rng));
  CHECK(enumerate_pairs(si).empty());
}

TEST_CASE("sampled pair set equals the enumerated set") {
  for (PairMode mode : {PairMode::kSwap, PairMode::kToggle}) {
    const AttributeCatalog cat = support::random_catalog(30, 11, mode == PairMode::kToggle);
    const AttributeIndex idx = AttributeIndex::build(cat);
    const auto oracle = scan_pairs(cat, mode);
    std::set<std::pair<std::string, std::string>> enumerated;
    for (const auto& p : enumerate_pairs(idx, mode)) enumerated.emplace(p.query_id, p.target_id);
    CHECK(enumerated == oracle);

    Rng rng(17);
    std::set<std::pair<std::string, std::string>> sampled;
    for (int i = 0; i < 10000; ++i) {
      if (auto p = sample_pair(idx, rng, mode)) {
        CHECK(differs_by_one_label(cat.attributes(p->query_id), cat.attributes(p->target_id), mode));
        CHECK(apply_change(cat.attributes(p->query_id), p->change) == cat.attributes(p->target_id));
        sampled.emplace(p->query_id, p->target_id);
      }
    }
    CHECK(sampled == oracle);
  }
}

TEST_CASE("generate_caption defaults") {
  Rng rng(1);
  const CaptionTemplates t = CaptionTemplates::defaults();
  CHECK(generate_caption(Change::swap("color", "red", "black"), t, rng) == "black not red");
  CHECK(generate_caption(Change::remove("pattern", "floral"), t, rng) == "not floral");
  CHECK(generate_caption(Change::add("material", "lace"), t, rng) == "with lace");
  // Single-template lists do not consume randomness.
  CHECK(rng() == Rng(1)());
}

TEST_CASE("captions parse back to their change") {
  const AttributeCatalog cat = support::random_catalog(30, 2, true);
  const AttributeIndex idx = AttributeIndex::build(cat);
  const ValueVocabulary vocab = value_vocabulary(idx.group_values());
  const CaptionTemplates para = CaptionTemplates::with_paraphrases();
  Rng rng(9);
  for (PairMode mode : {PairMode::kSwap, PairMode::kToggle}) {
    for (int i = 0; i < 300; ++i) {
      auto p = sample_pair(idx, rng, mode);
      if (!p) continue;
      CHECK(parse_caption(generate_caption(p->change, para, rng), vocab) == p->change);
    }
  }
  CHECK_THROWS_AS(parse_caption("make it sparkly", vocab), Error);
  CHECK_THROWS_AS(parse_caption("green not red", vocab), Error);

  ValueVocabulary clash = vocab;
  clash["red"].push_back("trim");
  CHECK_THROWS_AS(parse_caption("with red", clash), Error);
}

TEST_CASE("generate_epoch") {
  const auto forced = generate_epoch(forced_index(), 1, 3);
  REQUIRE(forced.size() == 1);
  CHECK(forced[0].query_id != forced[0].target_id);
  CHECK(forced[0].caption == (forced[0].query_id == "a" ? "black not red" : "red not black"));

  const AttributeCatalog cat = support::random_catalog(30, 4);
  const AttributeIndex idx = AttributeIndex::build(cat);
  const auto a = generate_epoch(idx, 500, 42);
  CHECK(a == generate_epoch(idx, 500, 42));
  CHECK(a != generate_epoch(idx, 500, 43));
  REQUIRE(a.size() == 500);
  for (const auto& e : a) {
    CHECK(differs_by_one_label(cat.attributes(e.query_id), cat.attributes(e.target_id),
                               PairMode::kSwap));
    CHECK(e.source == ExampleSource::kImfq);
  }

  AttributeCatalog same;
  for (int i = 0; i < 3; ++i) same.add("s" + std::to_string(i), attrs({{"color", "red"}}));
  try {
    generate_epoch(AttributeIndex::build(same), 1, 1);
    FAIL("expected starvation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
  }
  CHECK_THROWS_AS(generate_epoch(idx, 0, 1), Error);
}

TEST_CASE("examples and catalogs round trip through JSON lines") {
  const fs::path dir = fs::temp_directory_path() / "cir_test_weaksup";
  fs::create_directories(dir);
  const AttributeCatalog cat = support::random_catalog(10, 6, true);
  save_catalog(cat, dir / "catalog.jsonl");
  CHECK(load_catalog(dir / "catalog.jsonl").items() == cat.items());

  auto ex = generate_epoch(AttributeIndex::build(cat), 20, 8);
  ex[0].change.reset();
  ex[1].source = ExampleSource::kFiq;
  save_examples(ex, dir / "ex.jsonl");
  CHECK(load_examples(dir / "ex.jsonl") == ex);

  std::ofstream(dir / "bad.jsonl") << "{\"query_id\": \"a\", \"caption\": \"x\", \"target_id\": \"a\"}\n";
  CHECK_THROWS_AS(load_examples(dir / "bad.jsonl"), Error);
  fs::remove_all(dir);
}
