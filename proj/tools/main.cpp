#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "cir/error.hpp"
#include "cir/kernels.hpp"
#include "commands.hpp"

namespace {

int exit_code(cir::ErrorKind kind) {
  switch (kind) {
    case cir::ErrorKind::kConfig: return 2;
    case cir::ErrorKind::kNumeric:
    case cir::ErrorKind::kDegenerate: return 4;
    case cir::ErrorKind::kContract: return 1;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cir::cli;
  CLI::App app{"cir: composed image retrieval experiments"};
  app.require_subcommand(1);

  Common common;
  std::uint64_t seed = 0;
  app.add_option("--config", common.config_path, "experiment config JSON (default: $CIR_CONFIG)");
  auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--threads", common.threads, "worker threads (0: runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--force", common.force, "overwrite existing outputs");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic world and its feature stores");
  s->add_option("--out", synth.out_dir, "output directory")->required();
  s->add_option("--items", synth.items, "number of catalog items");

  GenCaptionsArgs gen;
  auto* g = app.add_subcommand("gen-captions", "sample weakly supervised training examples");
  g->add_option("--catalog", gen.catalog, "attribute catalog (JSON lines)");
  g->add_option("--count", gen.count, "number of examples");
  g->add_option("--out", gen.out, "output JSON lines")->required();
  g->add_option("--pair-mode", gen.mode, "swap|toggle");
  g->add_flag("--paraphrases", gen.paraphrases, "draw from paraphrase templates");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a fusion model");
  t->add_option("--data", tr.data_dir, "directory written by synth");
  t->add_option("--images", tr.images, "image feature store manifest");
  t->add_option("--texts", tr.texts, "text feature store manifest");
  t->add_option("--examples", tr.examples, "fixed training examples (JSON lines)");
  t->add_option("--catalog", tr.catalog, "attribute catalog for --online");
  t->add_flag("--online", tr.online, "sample examples from the catalog every epoch");
  t->add_option("--resume-from", tr.resume_from, "start from this checkpoint");
  t->add_option("--out", tr.out, "checkpoint manifest")->required();
  t->add_option("--log", tr.log, "training log CSV");
  t->add_option("--epochs", tr.epochs, "epoch count override");
  t->add_option("--schedule", tr.schedule, "fiq|imfq");
  t->add_option("--mode", tr.mode, "va|af|raf|image_only|text_only");
  t->add_option("--lr", tr.lr, "base learning rate");
  t->add_option("--batch-size", tr.batch_size, "batch size");
  t->add_option("--alpha", tr.alpha, "residual attention weight");

  EmbedArgs em;
  auto* e = app.add_subcommand("embed", "export catalog embeddings");
  e->add_option("--checkpoint", em.checkpoint, "checkpoint manifest");
  e->add_option("--images", em.images, "image feature store manifest");
  e->add_option("--out", em.out, "embedding store manifest")->required();

  RetrieveArgs rt;
  auto* r = app.add_subcommand("retrieve", "rank the catalog for each query");
  r->add_option("--checkpoint", rt.checkpoint, "checkpoint manifest");
  r->add_option("--images", rt.images, "image feature store manifest");
  r->add_option("--texts", rt.texts, "text feature store manifest");
  r->add_option("--queries", rt.queries, "queries (JSON lines)");
  r->add_option("--catalog-embeddings", rt.catalog_embeddings, "cached output of embed");
  r->add_option("--k", rt.k, "results per query");
  r->add_option("--out", rt.out, "ranked results JSON")->required();
  r->add_option("--scores-out", rt.scores_out, "full score matrix manifest");
  r->add_option("--ablation", rt.ablation, "image_only|text_only");

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "compute metrics");
  v->add_option("--suite", ev.suite, "fiq|cfq|imfq")->required();
  v->add_option("--scores", ev.scores, "score matrix manifest");
  v->add_option("--judgments", ev.judgments, "judgments (JSON lines)");
  v->add_option("--queries", ev.queries, "queries (JSON lines)");
  v->add_option("--catalog", ev.catalog, "attribute catalog (JSON lines)");
  v->add_option("--recalls", ev.recalls, "per-category recalls JSON (fiq)");
  v->add_option("--checkpoint", ev.checkpoint, "score with this checkpoint");
  v->add_option("--images", ev.images, "image feature store manifest");
  v->add_option("--texts", ev.texts, "text feature store manifest");
  v->add_option("--out", ev.out_dir, "output directory")->required();

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "modality ablations on the synthetic world");
  b->add_option("--mode", ab.modes, "scramble|mismatch|image_only|text_only (comma list)");
  b->add_option("--data", ab.data_dir, "directory written by synth");
  b->add_option("--checkpoint", ab.checkpoint, "evaluate this checkpoint");
  b->add_flag("--train", ab.train, "train after modifying the encoder");
  b->add_option("--epochs", ab.epochs, "epoch count override");
  b->add_option("--out", ab.out, "metrics JSON")->required();

  ReportArgs rp;
  auto* p = app.add_subcommand("report", "collect metrics files into one CSV");
  p->add_option("--metrics", rp.metrics, "metrics JSON files")->required();
  p->add_option("--out", rp.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) common.seed = seed;
  if (common.threads > 0) cir::kernels::set_num_threads(common.threads);

  try {
    if (*s) cmd_synth(common, synth);
    if (*g) cmd_gen_captions(common, gen);
    if (*t) cmd_train(common, tr);
    if (*e) cmd_embed(common, em);
    if (*r) cmd_retrieve(common, rt);
    if (*v) cmd_eval(common, ev);
    if (*b) cmd_ablate(common, ab);
    if (*p) cmd_report(common, rp);
  } catch (const cir::Error& err) {
    std::fprintf(stderr, "cir: %s: %s\n", cir::to_string(err.kind()), err.what());
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "cir: error: %s\n", err.what());
    return 3;
  }
  return 0;
}
