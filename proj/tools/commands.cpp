#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "cir/checkpoint.hpp"
#include "cir/error.hpp"
#include "cir/experiment.hpp"
#include "cir/judgments.hpp"
#include "cir/kernels.hpp"
#include "cir/metrics.hpp"
#include "cir/retrieval.hpp"
#include "cir/rng.hpp"

namespace cir::cli {

namespace {

void log(const std::string& msg) { std::fprintf(stderr, "[cir] %s\n", msg.c_str()); }

void guard(const fs::path& p, bool force) {
  require(force || !fs::exists(p), ErrorKind::kConfig,
          "refusing to overwrite " + p.string() + " (pass --force)");
}

void prepare_output(const fs::path& p, bool force) {
  require(!p.empty(), ErrorKind::kConfig, "no output path given");
  guard(p, force);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string first_of(std::initializer_list<std::string> candidates) {
  for (const auto& c : candidates) {
    if (!c.empty()) return c;
  }
  return {};
}

fs::path need_input(const std::string& value, const std::string& what) {
  require(!value.empty(), ErrorKind::kConfig, "missing input: " + what + " (no path given)");
  require(fs::exists(value), ErrorKind::kData,
          "missing input file for " + what + ": " + value);
  return value;
}

std::string in_dir(const std::string& dir, const char* name) {
  return dir.empty() ? std::string() : (fs::path(dir) / name).string();
}

std::string command_hash(const std::string& command, const Json& settings) {
  return config_hash(Json{{"command", command}, {"settings", settings}});
}

// Hash recorded by the producer of an input, or a content hash.
std::string input_hash(const fs::path& p) {
  if (p.extension() == ".json") {
    const Json j = read_json_file(p);
    if (j.is_object() && j.contains("config_hash")) return j["config_hash"].get<std::string>();
  }
  return hex64(fnv1a(read_text_file(p)));
}

void write_csv(const fs::path& p, const std::string& hash, const std::string& body) {
  write_text_file(p, "# config_hash=" + hash + "\n" + body);
}

void write_meta(const fs::path& out, const std::string& command, const Json& settings,
                const std::string& hash) {
  write_json_file(out.string() + ".meta.json",
                  {{"command", command}, {"settings", settings}, {"config_hash", hash}});
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

StoreSource load_sources(const fs::path& images, const std::string& texts) {
  FeatureStore img = load_feature_store(images);
  FeatureStore txt = texts.empty() ? FeatureStore(img.dim(), 0, Modality::kText)
                                   : load_feature_store(texts);
  require(img.dim() == txt.dim(), ErrorKind::kData,
          "image and text stores differ in dimension");
  return StoreSource(std::move(img), std::move(txt));
}

std::unique_ptr<MaskedSource> query_view(const EmbeddingSource& base,
                                         const std::vector<Ablation>& ablations) {
  const bool drop_text =
      std::find(ablations.begin(), ablations.end(), Ablation::kImageOnly) != ablations.end();
  const bool drop_image =
      std::find(ablations.begin(), ablations.end(), Ablation::kTextOnly) != ablations.end();
  return std::make_unique<MaskedSource>(base, drop_image, drop_text);
}

// One score row per (query, phrasing); columns are the image store ids.
ScoreMatrix compute_scores(const FusionModel<float>& model, const StoreSource& source,
                           const EmbeddingSource& query_source,
                           const std::vector<QuerySpec>& queries, const Tensor* catalog_embs) {
  std::vector<ScoreMatrix::RowKey> keys;
  std::vector<RetrievalQuery> rq;
  for (const auto& q : queries) {
    for (std::size_t p = 0; p < q.phrasings.size(); ++p) {
      keys.push_back({q.query_id, p});
      rq.push_back({q.query_id, q.image_id, q.phrasings[p]});
    }
  }
  const auto& ids = source.images().ids();
  const Tensor c = catalog_embs ? *catalog_embs : embed_catalog(model, source, ids);
  const Tensor s = score_matrix(embed_queries(model, query_source, rq), c);
  ScoreMatrix out(std::move(keys), ids);
  for (std::size_t r = 0; r < rq.size(); ++r) out.set_row(r, s.row(r));
  return out;
}

Json recall_json(const RecallSummary& r) {
  const double chance = 1.0 / static_cast<double>(r.catalog);
  return {{"r1", r.r1},
          {"r10", r.r10},
          {"query_image_top1", r.query_image_top1},
          {"chance_r1", chance},
          {"r1_over_chance", r.r1 / chance},
          {"queries", r.queries},
          {"catalog", r.catalog}};
}

}  // namespace

ExperimentConfig resolve_config(const Common& common) {
  ExperimentConfig cfg = load_experiment_config(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  cfg.propagate_seed();
  return cfg;
}

void cmd_synth(const Common& c, const SynthArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (a.items) cfg.world.items = *a.items;
  cfg.validate();
  require(!a.out_dir.empty(), ErrorKind::kConfig, "synth needs --out");
  const fs::path dir = a.out_dir;
  for (const char* name :
       {"world.json", "encoder.json", "schema.json", "catalog.jsonl", "images.json",
        "images.bin", "texts.json", "texts.bin", "heldout_queries.jsonl",
        "train_examples.jsonl", "config.json"}) {
    guard(dir / name, c.force);
  }
  fs::create_directories(dir);

  const Json settings = experiment_config_to_json(cfg);
  const std::string hash = command_hash("synth", settings);
  const SyntheticWorld world = make_world(cfg.world);
  const SyntheticEncoder enc = make_encoder(cfg.encoder);
  const AttributeSchema schema = world_schema(world);
  const AttributeCatalog catalog = world_catalog(world);

  // Validator: one value per group on every item.
  for (const auto& [id, attrs] : catalog.items()) {
    require(attrs.size() == world.groups.size(), ErrorKind::kData,
            "item '" + id + "' does not carry every group");
    for (const auto& [group, values] : attrs) {
      require(values.size() == 1, ErrorKind::kData,
              "item '" + id + "' has " + std::to_string(values.size()) + " values for " + group);
    }
  }
  const AttributeIndex index = AttributeIndex::build(catalog);

  Json wj = world_to_json(world);
  wj["config_hash"] = hash;
  write_json_file(dir / "world.json", wj);
  Json ej = encoder_to_json(enc);
  ej["config_hash"] = hash;
  write_json_file(dir / "encoder.json", ej);
  save_schema(schema, dir / "schema.json");
  save_catalog(catalog, dir / "catalog.jsonl");
  save_feature_store(build_image_store(world, enc), dir / "images.json", hash);
  save_feature_store(build_text_store(world, enc), dir / "texts.json", hash);

  const CaptionTemplates templates =
      cfg.paraphrases ? CaptionTemplates::with_paraphrases() : CaptionTemplates::defaults();
  const PairSplit split = split_pairs(index, cfg.held_out_fraction, cfg.seed, cfg.pair_mode);
  std::vector<QuerySpec> queries;
  const auto held = queries_from_pairs(split.held_out);
  for (std::size_t i = 0; i < held.size(); ++i) {
    const Change& change = split.held_out[i].change;
    queries.push_back({held[i].query.query_id, held[i].query.image_id, change.group,
                       all_captions(change, CaptionTemplates::with_paraphrases()),
                       {}, held[i].target_id, change});
  }
  save_queries(queries, dir / "heldout_queries.jsonl");
  save_examples(examples_from_pairs(split.train, cfg.train_examples, cfg.seed, templates),
                dir / "train_examples.jsonl");
  Json cj = settings;
  cj["config_hash"] = hash;
  write_json_file(dir / "config.json", cj);
  log("synth: " + std::to_string(world.items.size()) + " items, " +
      std::to_string(world.groups.size()) + " groups, " + std::to_string(split.train.size()) +
      " training pairs, " + std::to_string(split.held_out.size()) + " held-out queries -> " +
      dir.string());
}

void cmd_gen_captions(const Common& c, const GenCaptionsArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (a.mode) cfg.pair_mode = parse_pair_mode(*a.mode);
  if (a.paraphrases) cfg.paraphrases = true;
  cfg.validate();
  const fs::path catalog_path = need_input(first_of({a.catalog, cfg.path("catalog")}), "catalog");
  prepare_output(a.out, c.force);

  EpochOptions options;
  options.mode = cfg.pair_mode;
  options.templates =
      cfg.paraphrases ? CaptionTemplates::with_paraphrases() : CaptionTemplates::defaults();
  const AttributeIndex index = AttributeIndex::build(load_catalog(catalog_path));
  const auto examples = generate_epoch(index, a.count, cfg.seed, options);
  const Json settings = {{"seed", cfg.seed},
                         {"count", a.count},
                         {"pair_mode", cfg.pair_mode == PairMode::kSwap ? "swap" : "toggle"},
                         {"paraphrases", cfg.paraphrases},
                         {"catalog", input_hash(catalog_path)}};
  save_examples(examples, a.out);
  write_meta(a.out, "gen-captions", settings, command_hash("gen-captions", settings));
  log("gen-captions: " + std::to_string(examples.size()) + " examples -> " + a.out);
}

void cmd_train(const Common& c, const TrainArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.schedule) cfg.train.schedule = parse_schedule(*a.schedule);
  if (a.mode) cfg.fusion.mode = parse_fusion_mode(*a.mode);
  if (a.lr) cfg.train.base_lr = *a.lr;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.alpha) cfg.fusion.alpha = *a.alpha;
  cfg.validate();

  const fs::path images =
      need_input(first_of({a.images, cfg.path("images"), in_dir(a.data_dir, "images.json")}),
                 "image feature store");
  const fs::path texts =
      need_input(first_of({a.texts, cfg.path("texts"), in_dir(a.data_dir, "texts.json")}),
                 "text feature store");
  require(!a.out.empty(), ErrorKind::kConfig, "train needs --out");
  const fs::path log_path =
      a.log.empty() ? fs::path(a.out).replace_extension(".log.csv") : fs::path(a.log);
  prepare_output(a.out, c.force);
  prepare_output(log_path, c.force);

  Json inputs = {{"images", input_hash(images)}, {"texts", input_hash(texts)}};
  TrainingData data;
  if (a.online) {
    const fs::path catalog = need_input(
        first_of({a.catalog, cfg.path("catalog"), in_dir(a.data_dir, "catalog.jsonl")}),
        "catalog");
    inputs["catalog"] = input_hash(catalog);
    data = AttributeIndex::build(load_catalog(catalog));
  } else {
    const fs::path examples = need_input(
        first_of({a.examples, cfg.path("examples"), in_dir(a.data_dir, "train_examples.jsonl")}),
        "training examples");
    inputs["examples"] = input_hash(examples);
    data = load_examples(examples);
  }

  FusionModel<float> model;
  if (!a.resume_from.empty()) {
    const fs::path resume = need_input(a.resume_from, "checkpoint to resume from");
    model = load_checkpoint(resume);
    require(!a.mode || model.mode == cfg.fusion.mode, ErrorKind::kConfig,
            "--mode disagrees with the checkpoint being resumed");
    inputs["resume_from"] = input_hash(resume);
  } else {
    model = make_fusion_model<float>(cfg.fusion);
  }

  const StoreSource source = load_sources(images, texts.string());
  const Json settings = {{"config", experiment_config_to_json(cfg)},
                         {"online", a.online},
                         {"inputs", inputs}};
  const std::string hash = command_hash("train", settings);
  log("train: " + std::string(to_string(model.mode)) + ", " +
      std::to_string(cfg.train.epoch_count()) + " epochs, schedule " +
      to_string(cfg.train.schedule));
  const TrainResult result = train(std::move(model), data, source, cfg.train);
  if (!result.log.steps.empty()) {
    log("train: loss " + fmt(result.log.steps.front().loss) + " -> " +
        fmt(result.log.steps.back().loss) + " over " + std::to_string(result.log.steps.size()) +
        " steps in " + fmt(result.log.wall_seconds) + " s");
  }
  save_checkpoint(result.model, a.out, {{"config_hash", hash}, {"settings", settings}});
  write_csv(log_path, hash, result.log.to_csv());
}

void cmd_embed(const Common& c, const EmbedArgs& a) {
  const ExperimentConfig cfg = resolve_config(c);
  const fs::path ckpt = need_input(first_of({a.checkpoint, cfg.path("checkpoint")}), "checkpoint");
  const fs::path images =
      need_input(first_of({a.images, cfg.path("images")}), "image feature store");
  prepare_output(a.out, c.force);
  const FusionModel<float> model = load_checkpoint(ckpt);
  const StoreSource source = load_sources(images, "");
  const auto& ids = source.images().ids();
  const Tensor embs = embed_catalog(model, source, ids);
  FeatureStore out(embs.cols(), 0, Modality::kImage);
  for (std::size_t i = 0; i < ids.size(); ++i) out.add(ids[i], embs.row(i));
  const Json settings = {{"checkpoint", input_hash(ckpt)}, {"images", input_hash(images)}};
  save_feature_store(out, a.out, command_hash("embed", settings));
  log("embed: " + std::to_string(ids.size()) + " catalog embeddings -> " + a.out);
}

void cmd_retrieve(const Common& c, const RetrieveArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (a.ablation) cfg.ablations = {parse_ablation(*a.ablation)};
  cfg.validate();
  for (auto ab : cfg.ablations) {
    require(ab == Ablation::kImageOnly || ab == Ablation::kTextOnly, ErrorKind::kConfig,
            std::string("retrieve supports image_only and text_only, not ") + to_string(ab));
  }
  const fs::path ckpt = need_input(first_of({a.checkpoint, cfg.path("checkpoint")}), "checkpoint");
  const fs::path images =
      need_input(first_of({a.images, cfg.path("images")}), "image feature store");
  const fs::path texts = need_input(first_of({a.texts, cfg.path("texts")}), "text feature store");
  const fs::path queries_path = need_input(first_of({a.queries, cfg.path("queries")}), "queries");
  prepare_output(a.out, c.force);
  if (!a.scores_out.empty()) prepare_output(a.scores_out, c.force);

  const FusionModel<float> model = load_checkpoint(ckpt);
  const StoreSource source = load_sources(images, texts.string());
  const auto queries = load_queries(queries_path);
  const auto& ids = source.images().ids();

  Json inputs = {{"checkpoint", input_hash(ckpt)},
                 {"images", input_hash(images)},
                 {"texts", input_hash(texts)},
                 {"queries", input_hash(queries_path)}};
  std::optional<Tensor> cached;
  if (!a.catalog_embeddings.empty()) {
    const fs::path cache_path = need_input(a.catalog_embeddings, "catalog embeddings");
    const FeatureStore store = load_feature_store(cache_path);
    require(store.ids() == ids, ErrorKind::kData,
            "catalog embeddings do not cover the image store ids in order");
    require(store.dim() == model.dim, ErrorKind::kData, "catalog embedding dimension");
    cached = Tensor({store.count(), store.dim()},
                    std::vector<float>(store.pooled_data().begin(), store.pooled_data().end()));
    inputs["catalog_embeddings"] = input_hash(cache_path);
  }
  const auto view = query_view(source, cfg.ablations);
  const ScoreMatrix scores =
      compute_scores(model, source, *view, queries, cached ? &*cached : nullptr);

  std::size_t k = a.k;
  if (k > ids.size()) {
    log("retrieve: warning: k=" + std::to_string(k) + " exceeds catalog size " +
        std::to_string(ids.size()) + ", clamped");
    k = ids.size();
  }
  Json ablations = Json::array();
  for (auto ab : cfg.ablations) ablations.push_back(to_string(ab));
  const Json settings = {{"k", k}, {"ablations", ablations}, {"inputs", inputs}};
  const std::string hash = command_hash("retrieve", settings);

  Json results = Json::array();
  std::size_t row = 0;
  for (const auto& q : queries) {
    for (std::size_t p = 0; p < q.phrasings.size(); ++p, ++row) {
      const auto s = scores.row(row);
      const auto order = rank_indices(s, ids);
      Json ranked = Json::array();
      for (std::size_t i = 0; i < k; ++i) {
        ranked.push_back({{"id", ids[order[i]]}, {"score", s[order[i]]}});
      }
      results.push_back({{"query_id", q.query_id},
                         {"phrasing", p},
                         {"caption", q.phrasings[p]},
                         {"ranked", ranked}});
    }
  }
  write_json_file(a.out, {{"config_hash", hash},
                          {"k", k},
                          {"catalog_size", ids.size()},
                          {"results", results}});
  if (!a.scores_out.empty()) save_score_matrix(scores, a.scores_out, hash);
  log("retrieve: " + std::to_string(row) + " rankings (top " + std::to_string(k) + ") -> " +
      a.out);
}

namespace {

std::vector<CategoryRecall> parse_recalls(const Json& j) {
  std::vector<CategoryRecall> out;
  try {
    if (j.is_object() && !j.contains("categories")) {
      for (const auto& [category, v] : j.items()) {
        out.push_back({category, v.at("r10").get<double>(), v.at("r50").get<double>()});
      }
    } else {
      for (const auto& v : j.is_array() ? j : j.at("categories")) {
        out.push_back({v.at("category").get<std::string>(), v.at("r10").get<double>(),
                       v.at("r50").get<double>()});
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bad recalls file: ") + e.what());
  }
  require(!out.empty(), ErrorKind::kData, "recalls file lists no categories");
  return out;
}

Json map_json(const MapResult& r) {
  return {{"map", r.map}, {"queries_used", r.queries_used}, {"skipped", r.skipped}};
}

}  // namespace

void cmd_eval(const Common& c, const EvalArgs& a) {
  const ExperimentConfig cfg = resolve_config(c);
  const std::string suite = a.suite;
  require(suite == "fiq" || suite == "cfq" || suite == "imfq", ErrorKind::kConfig,
          "unknown suite '" + suite + "' (fiq|cfq|imfq)");
  require(!a.out_dir.empty(), ErrorKind::kConfig, "eval needs --out");
  const fs::path dir = a.out_dir;
  const std::string what = "suite " + suite;

  const std::string scores_arg = first_of({a.scores, cfg.path("scores")});
  const std::string queries_arg = first_of({a.queries, cfg.path("queries")});
  Json inputs = Json::object();

  // Scores from a saved matrix, or computed from a checkpoint.
  auto load_scores = [&]() -> ScoreMatrix {
    if (!scores_arg.empty() || first_of({a.checkpoint, cfg.path("checkpoint")}).empty()) {
      const fs::path p = need_input(scores_arg, "scores for " + what);
      inputs["scores"] = input_hash(p);
      return load_score_matrix(p);
    }
    const fs::path ckpt = need_input(first_of({a.checkpoint, cfg.path("checkpoint")}), "checkpoint");
    const fs::path images = need_input(first_of({a.images, cfg.path("images")}),
                                       "image feature store for " + what);
    const fs::path texts = need_input(first_of({a.texts, cfg.path("texts")}),
                                      "text feature store for " + what);
    const fs::path qp = need_input(queries_arg, "queries for " + what);
    inputs["checkpoint"] = input_hash(ckpt);
    inputs["images"] = input_hash(images);
    inputs["texts"] = input_hash(texts);
    const StoreSource source = load_sources(images, texts.string());
    return compute_scores(load_checkpoint(ckpt), source, source, load_queries(qp), nullptr);
  };

  Json metrics = {{"suite", suite}};
  std::vector<std::pair<std::string, std::string>> csvs;  // file name, body

  if (suite == "fiq") {
    std::vector<CategoryRecall> recalls;
    const std::string recalls_arg = first_of({a.recalls, cfg.path("recalls")});
    if (!recalls_arg.empty()) {
      const fs::path p = need_input(recalls_arg, "recalls for " + what);
      inputs["recalls"] = input_hash(p);
      recalls = parse_recalls(read_json_file(p));
    } else {
      const ScoreMatrix scores = load_scores();
      const fs::path qp = need_input(queries_arg, "queries for " + what);
      inputs["queries"] = input_hash(qp);
      recalls = fiq_recalls(scores, load_queries(qp));
    }
    Json cats = Json::array();
    std::string body = "category,r10,r50\n";
    for (const auto& r : recalls) {
      cats.push_back({{"category", r.category}, {"r10", r.r10}, {"r50", r.r50}});
      body += r.category + "," + fmt(r.r10) + "," + fmt(r.r50) + "\n";
    }
    metrics["categories"] = cats;
    metrics["fiq_score"] = fiq_score(recalls);
    csvs.emplace_back("recalls.csv", body);
  } else if (suite == "cfq") {
    const fs::path jp = need_input(first_of({a.judgments, cfg.path("judgments")}),
                                   "judgments for " + what);
    inputs["judgments"] = input_hash(jp);
    const ScoreMatrix scores = load_scores();
    const GradedJudgments judgments = aggregate_judgments(load_judgments(jp));
    metrics["accuracy"] = map_json(map_cfq(scores, judgments, Question::kAccurate));
    metrics["reasonableness"] = map_json(map_cfq(scores, judgments, Question::kReasonable));
    metrics["relevance"] = map_json(map_cfq(scores, judgments, Question::kRelevant));
    metrics["ndcg"] = ndcg_cfq(scores, judgments);
    csvs.emplace_back("per_query.csv", per_query_csv(per_query_report(scores, judgments)));
    if (!queries_arg.empty()) {
      const fs::path qp = need_input(queries_arg, "queries for " + what);
      inputs["queries"] = input_hash(qp);
      const auto report = caption_type_report(scores, judgments, load_queries(qp), caption_types());
      csvs.emplace_back("caption_types.csv", caption_type_csv(report));
    } else {
      metrics["notes"] = {"no queries file; caption-type report skipped"};
    }
    const std::vector<double> grid = {-1.0, -2.0 / 3.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 2.0 / 3.0};
    std::string sweep;
    for (auto q : {Question::kAccurate, Question::kReasonable, Question::kRelevant}) {
      const std::string part = sweep_csv(threshold_sweep(scores, judgments, q, grid));
      sweep += sweep.empty() ? part : part.substr(part.find('\n') + 1);
    }
    csvs.emplace_back("threshold_sweep.csv", sweep);
  } else {
    const fs::path cp = need_input(first_of({a.catalog, cfg.path("catalog")}),
                                   "catalog for " + what);
    const fs::path qp = need_input(queries_arg, "queries for " + what);
    inputs["catalog"] = input_hash(cp);
    inputs["queries"] = input_hash(qp);
    const ScoreMatrix scores = load_scores();
    const MapResult r = imfq_map(scores, load_catalog(cp), load_queries(qp));
    metrics["imfq"] = map_json(r);
    std::string body = "query_id,catalog_size,positives,ap\n";
    for (const auto& q : r.per_query) {
      body += q.query_id + "," + std::to_string(q.catalog_size) + "," +
              std::to_string(q.positives) + "," + (q.ap ? fmt(*q.ap) : "") + "\n";
    }
    csvs.emplace_back("per_query.csv", body);
  }

  const std::string hash = command_hash("eval", {{"suite", suite}, {"inputs", inputs}});
  metrics["config_hash"] = hash;
  guard(dir / "metrics.json", c.force);
  for (const auto& [name, body] : csvs) guard(dir / name, c.force);
  fs::create_directories(dir);
  write_json_file(dir / "metrics.json", metrics);
  for (const auto& [name, body] : csvs) write_csv(dir / name, hash, body);
  log("eval " + suite + " -> " + dir.string());
}

void cmd_ablate(const Common& c, const AblateArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (!a.modes.empty()) {
    cfg.ablations.clear();
    for (const auto& m : a.modes) {
      std::stringstream ss(m);
      for (std::string part; std::getline(ss, part, ',');) {
        if (!part.empty()) cfg.ablations.push_back(parse_ablation(part));
      }
    }
  }
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.validate();
  require(!cfg.ablations.empty(), ErrorKind::kConfig, "ablate needs --mode");
  prepare_output(a.out, c.force);

  Json inputs = Json::object();
  SyntheticWorld world;
  SyntheticEncoder enc;
  if (!a.data_dir.empty()) {
    const fs::path wp = need_input(in_dir(a.data_dir, "world.json"), "synthetic world");
    const fs::path ep = need_input(in_dir(a.data_dir, "encoder.json"), "synthetic encoder");
    world = world_from_json(read_json_file(wp));
    enc = encoder_from_json(read_json_file(ep));
    inputs["world"] = input_hash(wp);
    inputs["encoder"] = input_hash(ep);
  } else {
    world = make_world(cfg.world);
    enc = make_encoder(cfg.encoder);
  }
  auto has = [&](Ablation x) {
    return std::find(cfg.ablations.begin(), cfg.ablations.end(), x) != cfg.ablations.end();
  };
  if (has(Ablation::kScramble)) {
    enc = scramble_text_channels(enc, substream_seed(cfg.seed, "ablate/scramble"));
  }
  if (has(Ablation::kMismatch)) {
    enc = mismatch_text_module(enc, substream_seed(cfg.seed, "ablate/mismatch"));
  }
  const SyntheticSource source(world, enc);

  FusionModel<float> model;
  if (!a.checkpoint.empty()) {
    const fs::path ckpt = need_input(a.checkpoint, "checkpoint");
    model = load_checkpoint(ckpt);
    inputs["checkpoint"] = input_hash(ckpt);
  } else {
    model = make_fusion_model<float>(cfg.fusion);
  }

  const AttributeIndex index = AttributeIndex::build(world_catalog(world));
  const PairSplit split = split_pairs(index, cfg.held_out_fraction, cfg.seed, cfg.pair_mode);
  const auto held = queries_from_pairs(split.held_out);
  std::vector<std::string> ids;
  for (const auto& it : world.items) ids.push_back(it.id);

  Json result = Json::object();
  if (a.train) {
    const CaptionTemplates templates =
        cfg.paraphrases ? CaptionTemplates::with_paraphrases() : CaptionTemplates::defaults();
    const auto examples = examples_from_pairs(split.train, cfg.train_examples, cfg.seed, templates);
    TrainResult trained = train(std::move(model), examples, source, cfg.train);
    model = std::move(trained.model);
    if (!trained.log.steps.empty()) {
      result["initial_loss"] = trained.log.steps.front().loss;
      result["final_loss"] = trained.log.steps.back().loss;
    }
  }
  const auto view = query_view(source, cfg.ablations);
  const RecallSummary recall = evaluate_recall(model, source, ids, held, view.get());

  // Rankings for every phrasing of every held-out query.
  std::vector<RetrievalQuery> rq;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < held.size(); ++i) {
    for (const auto& caption :
         all_captions(split.held_out[i].change, CaptionTemplates::with_paraphrases())) {
      rq.push_back({held[i].query.query_id, held[i].query.image_id, caption});
      owner.push_back(i);
    }
  }
  const Tensor s =
      score_matrix(embed_queries(model, *view, rq), embed_catalog(model, source, ids));
  std::vector<std::vector<std::string>> first(held.size());
  bool invariant = true;
  for (std::size_t r = 0; r < rq.size(); ++r) {
    auto ranking = rank_ids(s.row(r), ids);
    if (first[owner[r]].empty()) {
      first[owner[r]] = std::move(ranking);
    } else if (ranking != first[owner[r]]) {
      invariant = false;
    }
  }

  Json ablations = Json::array();
  for (auto ab : cfg.ablations) ablations.push_back(to_string(ab));
  const Json settings = {{"config", experiment_config_to_json(cfg)},
                         {"trained", a.train},
                         {"inputs", inputs}};
  const std::string hash = command_hash("ablate", settings);
  result.update(recall_json(recall));
  result["ablations"] = ablations;
  result["mode"] = to_string(model.mode);
  result["trained"] = a.train;
  result["aligned_encoder"] = enc.aligned();
  result["phrasing_invariant"] = invariant;
  result["config_hash"] = hash;
  write_json_file(a.out, result);
  log("ablate: R@1 " + fmt(recall.r1) + " (chance " + fmt(1.0 / static_cast<double>(ids.size())) +
      "), R@10 " + fmt(recall.r10) + " -> " + a.out);
}

void cmd_report(const Common& c, const ReportArgs& a) {
  require(!a.metrics.empty(), ErrorKind::kConfig, "report needs at least one --metrics file");
  prepare_output(a.out, c.force);
  std::string body = "source,key,value\n";
  Json inputs = Json::array();
  for (const auto& m : a.metrics) {
    const fs::path p = need_input(m, "metrics file");
    const Json j = read_json_file(p);
    inputs.push_back(input_hash(p));
    const std::string label = p.filename().string();
    std::function<void(const std::string&, const Json&)> walk = [&](const std::string& key,
                                                                    const Json& v) {
      if (v.is_object()) {
        for (const auto& [k, child] : v.items()) {
          if (k != "config_hash") walk(key.empty() ? k : key + "." + k, child);
        }
      } else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) walk(key + "." + std::to_string(i), v[i]);
      } else if (v.is_number()) {
        body += label + "," + key + "," + fmt(v.get<double>()) + "\n";
      } else if (v.is_boolean()) {
        body += label + "," + key + "," + (v.get<bool>() ? "1" : "0") + "\n";
      }
    };
    walk("", j);
  }
  write_csv(a.out, command_hash("report", {{"inputs", inputs}}), body);
  log("report: " + std::to_string(a.metrics.size()) + " metrics files -> " + a.out);
}

}  // namespace cir::cli
