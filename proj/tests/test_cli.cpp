#include <doctest.h>

#include <fstream>

#include "cir/checkpoint.hpp"
#include "cir/feature_store.hpp"
#include "cir/fusion.hpp"
#include "cir/judgments.hpp"
#include "cir/weaksup.hpp"
#include "cli_pipeline.hpp"

using namespace cir;
using cli_pipeline::run;
using cli_pipeline::slurp;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "cir_test_cli";

Json read(const fs::path& p) { return Json::parse(slurp(p)); }

// Fresh directory with the config and a synthetic world.
fs::path scratch(const std::string& name) {
  const fs::path d = kRoot / name;
  fs::remove_all(d);
  fs::create_directories(d);
  cli_pipeline::write_config(d);
  cli_pipeline::write_cfq_inputs(d);
  REQUIRE(run(d, "--config config.json synth --out data") == 0);
  return d;
}

}  // namespace

TEST_CASE("every command is deterministic across runs and thread counts") {
  const auto a = cli_pipeline::run_all(kRoot / "run_a", 1);
  const auto b = cli_pipeline::run_all(kRoot / "run_b", 1);
  const auto c = cli_pipeline::run_all(kRoot / "run_c", 4);
  for (const auto* r : {&a, &b, &c}) {
    for (const auto& f : r->failed) FAIL_CHECK(f);
  }
  const auto sa = cli_pipeline::snapshot(kRoot / "run_a");
  CHECK(sa.size() > 40);
  for (const auto& d : cli_pipeline::differences(sa, cli_pipeline::snapshot(kRoot / "run_b"))) {
    FAIL_CHECK("differs between runs: " << d);
  }
  for (const auto& d : cli_pipeline::differences(sa, cli_pipeline::snapshot(kRoot / "run_c"))) {
    FAIL_CHECK("differs across thread counts: " << d);
  }

  const fs::path dir = kRoot / "run_a";
  const Json t9 = read(dir / "ev_table9/metrics.json");
  CHECK(t9.at("fiq_score").get<double>() == doctest::Approx(170.5 / 6.0));
  const Json cfq = read(dir / "ev_cfq/metrics.json");
  const auto f = fixtures::hand_fixture();
  CHECK(cfq.at("relevance").at("map").get<double>() == doctest::Approx(f.relevance).epsilon(1e-12));
  CHECK(cfq.at("accuracy").at("map").get<double>() == doctest::Approx(f.accuracy).epsilon(1e-12));
  CHECK(cfq.at("reasonableness").at("map").get<double>() ==
        doctest::Approx(f.reasonableness).epsilon(1e-12));
  for (const char* csv : {"per_query.csv", "caption_types.csv", "threshold_sweep.csv"}) {
    CHECK(slurp(dir / "ev_cfq" / csv).rfind("# config_hash=", 0) == 0);
  }
  CHECK(read(dir / "ab_scramble.json").at("aligned_encoder") == false);
  CHECK(read(dir / "ab_mismatch.json").at("trained") == true);
  const Json ret = read(dir / "ret.json");
  CHECK(ret.at("k") == 5);
  CHECK(ret.at("results").at(0).at("ranked").size() == 5);
  CHECK(slurp(dir / "report.csv").find("metrics.json,") != std::string::npos);
  CHECK(load_examples(dir / "gen.jsonl").size() == 300);
}

TEST_CASE("exit codes") {
  const fs::path d = scratch("exit");
  // Usage and configuration errors.
  CHECK(run(d, "") == 2);
  CHECK(run(d, "synth") == 2);
  CHECK(run(d, "--seed notanumber synth --out x") == 2);
  CHECK(run(d, "--config config.json synth --out data") == 2);
  CHECK(run(d, "--config config.json --force synth --out data") == 0);
  CHECK(run(d, "--config missing.json synth --out y") == 2);
  std::ofstream(d / "bad_config.json") << R"({"ablations": ["scramble", "mismatch"]})";
  CHECK(run(d, "--config bad_config.json synth --out z") == 2);
  CHECK(run(d, "ablate --mode sideways --out a.json") == 2);
  CHECK(run(d, "eval --suite cfq --out e") == 2);
  CHECK(run(d, "eval --suite nope --scores cfq_scores.json --out e") == 2);
  CHECK(run(d, "train --data data --mode va --resume-from nowhere.json --out r/m.json") == 3);

  // Data, format and lookup errors.
  CHECK(run(d, "train --data nowhere --out m/m.json") == 3);
  CHECK(run(d, "--config config.json gen-captions --catalog data/catalog.jsonl --pair-mode toggle "
               "--count 5 --out toggle.jsonl") == 3);
  CHECK(slurp(d / "last.log").find("starved") != std::string::npos);
  std::ofstream(d / "garbage.jsonl") << "{not json\n";
  CHECK(run(d, "gen-captions --catalog garbage.jsonl --out g.jsonl") == 3);
  fs::resize_file(d / "data/images.bin", fs::file_size(d / "data/images.bin") - 4);
  CHECK(run(d, "--config config.json train --data data --epochs 1 --out m/m.json") == 3);

  // Numeric errors.
  fs::copy_file(d / "cfq_scores.json", d / "nan_scores.json");
  fs::copy_file(d / "cfq_scores.bin", d / "nan_scores.bin");
  Json manifest = read(d / "nan_scores.json");
  manifest["payload"] = "nan_scores.bin";
  std::ofstream(d / "nan_scores.json") << manifest.dump();
  {
    std::fstream bin(d / "nan_scores.bin", std::ios::in | std::ios::out | std::ios::binary);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    bin.write(reinterpret_cast<const char*>(&nan), sizeof nan);
  }
  CHECK(run(d, "eval --suite cfq --scores nan_scores.json --judgments cfq_judgments.jsonl --out n") == 4);
}

TEST_CASE("zero epochs leaves the initial model") {
  const fs::path d = scratch("epochs0");
  REQUIRE(run(d, "--config config.json train --data data --epochs 0 --out m/m.json") == 0);
  FusionConfig fc;
  fc.seed = 7;
  const auto init = make_fusion_model<float>(fc);
  const auto loaded = load_checkpoint(d / "m/m.json");
  const auto a = init.named_parameters();
  const auto b = loaded.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].second->value == b[i].second->value);
  CHECK(slurp(d / "m/m.log.csv").find("step,epoch,lr,loss,tau") != std::string::npos);
}

TEST_CASE("resume continues a run and rejects a mode change") {
  const fs::path d = scratch("resume");
  REQUIRE(run(d, "--config config.json train --data data --epochs 1 --out s1/m.json") == 0);
  REQUIRE(run(d, "--config config.json train --data data --epochs 1 --resume-from s1/m.json "
                 "--out s2/m.json") == 0);
  CHECK(slurp(d / "s1/m.bin") != slurp(d / "s2/m.bin"));
  CHECK(run(d, "--config config.json train --data data --epochs 1 --resume-from s1/m.json "
               "--mode va --out s3/m.json") == 2);
}

TEST_CASE("config comes from CIR_CONFIG when --config is absent") {
  const fs::path d = scratch("env");
  REQUIRE(run(d, "--config config.json synth --out with_flag") == 0);
  const std::string cmd = "cd '" + d.string() + "' && CIR_CONFIG=config.json '" CIR_BINARY
                          "' synth --out with_env > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(slurp(d / "with_flag/world.json") == slurp(d / "with_env/world.json"));
  REQUIRE(run(d, "synth --out defaults") == 0);
  CHECK(slurp(d / "with_flag/world.json") != slurp(d / "defaults/world.json"));
  // --seed overrides the file.
  REQUIRE(run(d, "--config config.json --seed 8 synth --out seeded") == 0);
  CHECK(read(d / "seeded/config.json").at("seed") == 8);
}
