#include <doctest.h>

#include <fstream>
#include <string>

#include "forge/pipeline.hpp"
#include "forge/report.hpp"
#include "forge/sha256.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::cli;

namespace {

// Desk-scale settings: a toy surrogate, a few PGD steps, two training epochs.
RunConfig fast_pipeline_config(const std::filesystem::path& out_dir) {
  nlohmann::json doc{
      {"seed", 5},
      {"out_dir", out_dir.string()},
      {"image", {{"height", 6}, {"width", 6}, {"channels", 3}}},
      {"budget", {{"epsilon", 32.0 / 255.0}, {"steps", 6}}},
      {"rft",
       {{"batch_size", 4},
        {"max_epochs", 2},
        {"learning_rate", 0.05},
        {"beta", 0.01}}},
  };
  return validate_config(doc);
}

const StageRecord& stage_named(const PipelineResult& result, const std::string& name) {
  for (const auto& s : result.stages) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("stage not found: " + name);
}

}  // namespace

TEST_CASE("the toy pipeline runs end to end and writes a full manifest") {
  test::TempDir tmp;
  auto config = fast_pipeline_config(tmp.file("run"));
  auto result = run_pipeline(config);

  REQUIRE(result.stages.size() == 6);
  const char* expected[] = {"inputs", "visual", "rewrite", "suffix", "attack", "report"};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(result.stages[i].name == expected[i]);
    CHECK(result.stages[i].status == "done");
    CHECK(!result.stages[i].reused);
    CHECK(!result.stages[i].outputs.empty());
  }

  for (const char* artifact :
       {"clean.png", "adv.png", "adv.json", "rewritten.jsonl", "rft_trace.json",
        "ckpt/weights.bin", "ckpt/vocab.txt", "ckpt/manifest.json", "records.jsonl",
        "asr.json", "asr.txt", "manifest.json"}) {
    CHECK(std::filesystem::exists(result.out_dir / artifact));
  }

  auto manifest = nlohmann::json::parse(test::read_file(result.out_dir / kManifestName));
  CHECK(manifest.at("schema_version").get<int>() == 1);
  CHECK(manifest.at("config_hash").get<std::string>() == result.config_hash);
  CHECK(manifest.at("seed").get<std::uint64_t>() == 5);
  CHECK(manifest.at("clock").get<std::string>() == "logical");
  CHECK(!manifest.at("config").contains("out_dir"));
  REQUIRE(manifest.at("stages").size() == 6);
  for (const auto& s : manifest.at("stages")) {
    CHECK(s.at("status").get<std::string>() == "done");
    for (const auto& o : s.at("outputs")) {
      const auto rel = o.at("path").get<std::string>();
      CHECK(sha256_file_hex((result.out_dir / rel).string()) ==
            o.at("sha256").get<std::string>());
    }
  }

  auto records = eval::read_records_jsonl(result.out_dir / "records.jsonl");
  CHECK(records.size() == 6);  // built-in demo prompt set
  for (const auto& rec : records) {
    CHECK(rec.components == eval::ComponentFlags{true, true, true});
    CHECK(rec.suffix_tokens.size() == 10);
  }

  auto reports = eval::reports_from_json(
      nlohmann::json::parse(test::read_file(result.out_dir / "asr.json")));
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].n_attempts == 6);
}

TEST_CASE("identical configs produce identical manifests in different directories") {
  test::TempDir tmp;
  auto a = run_pipeline(fast_pipeline_config(tmp.file("a")));
  auto b = run_pipeline(fast_pipeline_config(tmp.file("b")));
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.manifest_hash == b.manifest_hash);
  CHECK(test::read_file(a.out_dir / kManifestName) ==
        test::read_file(b.out_dir / kManifestName));
}

TEST_CASE("a rerun reuses every stage and leaves the manifest untouched") {
  test::TempDir tmp;
  auto config = fast_pipeline_config(tmp.file("run"));
  auto first = run_pipeline(config);
  auto second = run_pipeline(config);

  CHECK(second.manifest_hash == first.manifest_hash);
  for (const auto& s : second.stages) {
    CHECK(s.status == "done");
    CHECK(s.reused);
  }
}

TEST_CASE("deleting only the report recomputes only the report") {
  test::TempDir tmp;
  auto config = fast_pipeline_config(tmp.file("run"));
  auto first = run_pipeline(config);

  std::filesystem::remove(first.out_dir / "asr.json");
  std::filesystem::remove(first.out_dir / "asr.txt");

  auto second = run_pipeline(config);
  CHECK(second.manifest_hash == first.manifest_hash);
  for (const auto& s : second.stages) {
    if (s.name == "report") {
      CHECK(!s.reused);
    } else {
      CHECK(s.reused);
    }
    CHECK(s.status == "done");
  }
}

TEST_CASE("a changed config disables reuse wholesale") {
  test::TempDir tmp;
  auto config = fast_pipeline_config(tmp.file("run"));
  run_pipeline(config);

  auto changed = config;
  changed.seed = 6;
  auto result = run_pipeline(changed);
  for (const auto& s : result.stages) {
    CHECK(!s.reused);
    CHECK(s.status == "done");
  }
}

TEST_CASE("disabled components are skipped but recorded") {
  test::TempDir tmp;
  auto config = fast_pipeline_config(tmp.file("run"));
  config.stages.visual = false;
  auto result = run_pipeline(config);

  CHECK(stage_named(result, "visual").status == "disabled");
  CHECK(stage_named(result, "attack").status == "done");
  CHECK(!std::filesystem::exists(result.out_dir / "adv.png"));

  auto records = eval::read_records_jsonl(result.out_dir / "records.jsonl");
  for (const auto& rec : records) {
    CHECK(rec.adv_image_ref == rec.clean_image_ref);
    CHECK(!rec.components.visual);
    CHECK(rec.components.textual);
  }
}

TEST_CASE("a stage failure is manifested and blocks downstream stages") {
  test::TempDir tmp;
  auto config = fast_pipeline_config(tmp.file("run"));
  config.model.kind = "http";  // black-box target cannot serve gradients
  config.model.endpoint.base_url = "http://127.0.0.1:9";

  CHECK_THROWS_AS(run_pipeline(config), CapabilityError);

  auto manifest =
      nlohmann::json::parse(test::read_file(tmp.file("run") / kManifestName));
  REQUIRE(manifest.at("stages").size() == 6);
  CHECK(manifest.at("stages")[0].at("status").get<std::string>() == "done");
  CHECK(manifest.at("stages")[1].at("name").get<std::string>() == "visual");
  CHECK(manifest.at("stages")[1].at("status").get<std::string>() == "failed");
  CHECK(!manifest.at("stages")[1].at("error").get<std::string>().empty());
  for (int i = 2; i < 6; ++i) {
    CHECK(manifest.at("stages")[i].at("status").get<std::string>() == "blocked");
  }
  // the inputs artifact from before the failure is retained
  CHECK(std::filesystem::exists(tmp.file("run") / "clean.png"));
}
