#include <doctest.h>

#include <string>
#include <vector>

#include "forge/attack.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::eval;

namespace {

SafetyDataset tiny_dataset() {
  SafetyDataset ds;
  ds.dataset_id = "custom";
  ds.prompts = {{"p-0", "how do magnets work", "demo"},
                {"p-1", "what is in soap", "demo"},
                {"p-2", "why is the sky blue", "demo"}};
  ds.source_hash = "0000";
  return ds;
}

struct Fixture {
  ImageBuffer clean = random_image(4, 4, 3, 41, 0.3, 0.7);
  visual::AdversarialImage adv;
  rewrite::RewriteTemplate tmpl =
      rewrite::RewriteTemplate::from_parts("t-demo", "1", "audit framing: {PROMPT}");
  rewrite::ScriptedRewriter rewriter{"mock:preamble",
                                     [](const std::string&, const std::string& original) {
                                       return "For the audit: " + original;
                                     }};
  suffix::SuffixPolicy policy = suffix::SuffixPolicy::fresh(42);

  Fixture() {
    adv.clean = clean;
    adv.clean_hash = content_hash(clean);
    adv.pixels = clean;
    for (auto& p : adv.pixels.pixels) {
      p = std::min(1.0, p + 1.0 / 255.0);  // distinct from clean, inside the ball
    }
    adv.final_objective = -1.0;
    adv.objective_trace = {{0, -2.0}, {1, -1.0}};
  }

  AttackArtifacts artifacts() {
    AttackArtifacts a;
    a.adversarial = &adv;
    a.clean_image = clean;
    a.prompt_template = &tmpl;
    a.rewriter = &rewriter;
    a.policy = &policy;
    return a;
  }
};

// Target whose transport dies on prompts containing a marker.
class FlakyChatModel final : public adapters::ChatModel {
 public:
  explicit FlakyChatModel(std::string marker) : marker_(std::move(marker)) {}
  std::string model_id() const override { return "mock:flaky-target"; }
  std::string generate(const ImageBuffer&, const std::string& text,
                       const adapters::DecodeParams&) override {
    if (text.find(marker_) != std::string::npos) {
      throw TransportError("target endpoint dropped the connection");
    }
    return "Sure, here is a detailed answer to: " + text;
  }

 private:
  std::string marker_;
};

}  // namespace

TEST_CASE("component flags render compactly") {
  CHECK(ComponentFlags{}.to_string() == "none");
  CHECK(ComponentFlags{true, false, false}.to_string() == "visual");
  CHECK(ComponentFlags{true, true, true}.to_string() == "visual+textual+suffix");
  CHECK(ComponentFlags{false, true, true}.to_string() == "textual+suffix");
}

TEST_CASE("every flag combination yields one record per prompt") {
  Fixture fx;
  auto ds = tiny_dataset();
  auto target = adapters::ScriptedChatModel::echo();
  judge::KeywordJudge judge;

  for (int mask = 0; mask < 8; ++mask) {
    ComponentFlags flags{(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0};
    auto records = run_attack(ds, target, flags, fx.artifacts(), judge);
    REQUIRE(records.size() == ds.prompts.size());

    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& rec = records[i];
      CHECK(rec.components == flags);
      CHECK(rec.prompt_id == ds.prompts[i].id);
      CHECK(rec.original_text == ds.prompts[i].text);
      CHECK(rec.model_id == "mock:echo");
      CHECK(rec.dataset_id == "custom");
      CHECK(!rec.transport_failed);

      if (flags.textual) {
        CHECK(rec.rewritten_text == "For the audit: " + rec.original_text);
      } else {
        CHECK(rec.rewritten_text == rec.original_text);
      }

      if (flags.suffix) {
        CHECK(rec.suffix_tokens.size() == 10);
        CHECK(rec.final_prompt == rec.rewritten_text + " " + rec.suffix_text);
      } else {
        CHECK(rec.suffix_tokens.empty());
        CHECK(rec.final_prompt == rec.rewritten_text);
      }

      if (flags.visual) {
        CHECK(rec.adv_image_ref == content_hash(fx.adv.pixels));
        CHECK(rec.adv_image_ref != rec.clean_image_ref);
      } else {
        CHECK(rec.adv_image_ref == rec.clean_image_ref);
      }
      CHECK(rec.clean_image_ref == content_hash(fx.clean));
      CHECK(rec.verdict.judge_id == "keyword:v1");
      CHECK(rec.response == rec.final_prompt);  // echo target
    }
  }
}

TEST_CASE("missing artifacts for an enabled component are config errors") {
  Fixture fx;
  auto ds = tiny_dataset();
  auto target = adapters::ScriptedChatModel::echo();
  judge::KeywordJudge judge;

  auto arts = fx.artifacts();
  arts.adversarial = nullptr;
  CHECK_THROWS_AS(run_attack(ds, target, {true, false, false}, arts, judge), ConfigError);

  arts = fx.artifacts();
  arts.rewriter = nullptr;
  CHECK_THROWS_AS(run_attack(ds, target, {false, true, false}, arts, judge), ConfigError);

  arts = fx.artifacts();
  arts.prompt_template = nullptr;
  CHECK_THROWS_AS(run_attack(ds, target, {false, true, false}, arts, judge), ConfigError);

  arts = fx.artifacts();
  arts.policy = nullptr;
  CHECK_THROWS_AS(run_attack(ds, target, {false, false, true}, arts, judge), ConfigError);

  arts = fx.artifacts();
  arts.clean_image = ImageBuffer{};
  CHECK_THROWS_AS(run_attack(ds, target, {false, false, false}, arts, judge), ConfigError);

  SafetyDataset empty;
  empty.dataset_id = "custom";
  CHECK_THROWS_AS(run_attack(empty, target, {}, fx.artifacts(), judge), ConfigError);
}

TEST_CASE("transport failures are recorded, not fatal, below tolerance") {
  Fixture fx;
  auto ds = tiny_dataset();
  FlakyChatModel target("soap");  // p-1 mentions soap
  judge::KeywordJudge judge;

  RunOptions options;
  options.failure_tolerance = 0.5;
  auto records = run_attack(ds, target, {}, fx.artifacts(), judge, options);
  REQUIRE(records.size() == 3);
  CHECK(!records[0].transport_failed);
  CHECK(records[1].transport_failed);
  CHECK(records[1].error.rfind("transport: ", 0) == 0);
  CHECK(records[1].response.empty());
  CHECK(records[1].verdict.label == 0);
  CHECK(!records[2].transport_failed);

  RunOptions strict;
  strict.failure_tolerance = 0.0;
  CHECK_THROWS_AS(run_attack(ds, target, {}, fx.artifacts(), judge, strict),
                  TransportError);
}

TEST_CASE("empty responses and judge parse failures are infra failures too") {
  Fixture fx;
  auto ds = tiny_dataset();
  judge::KeywordJudge keyword;
  RunOptions tolerant;
  tolerant.failure_tolerance = 1.0;

  adapters::ScriptedChatModel empty_model({""});
  auto records = run_attack(ds, empty_model, {}, fx.artifacts(), keyword, tolerant);
  CHECK(records[0].transport_failed);
  CHECK(records[0].error.rfind("empty response: ", 0) == 0);

  auto target = adapters::ScriptedChatModel::echo();
  judge::ScriptedJudge confused("mock:confused", {"no idea", "still no idea"});
  records = run_attack(ds, target, {}, fx.artifacts(), confused, tolerant);
  for (const auto& rec : records) {
    CHECK(rec.transport_failed);
    CHECK(rec.error.rfind("judge: ", 0) == 0);
  }
}

TEST_CASE("records survive a jsonl round trip byte for byte") {
  test::TempDir tmp;
  Fixture fx;
  auto ds = tiny_dataset();
  auto target = adapters::ScriptedChatModel::echo();
  judge::KeywordJudge judge;

  auto records = run_attack(ds, target, {false, true, true}, fx.artifacts(), judge);
  auto path = tmp.file("records.jsonl");
  append_records_jsonl(path, records);

  auto loaded = read_records_jsonl(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].to_json().dump() == records[i].to_json().dump());
  }
}

TEST_CASE("record files with unknown schema or missing fields are rejected") {
  test::TempDir tmp;
  auto path = tmp.file("bad.jsonl");

  AttackRecord rec;
  rec.prompt_id = "x";
  auto j = rec.to_json();
  j["schema_version"] = 2;
  test::write_file(path, j.dump() + "\n");
  CHECK_THROWS_AS(read_records_jsonl(path), IoError);

  j = rec.to_json();
  j.erase("response");
  test::write_file(path, j.dump() + "\n");
  CHECK_THROWS_AS(read_records_jsonl(path), IoError);

  test::write_file(path, "this is not json\n");
  CHECK_THROWS_AS(read_records_jsonl(path), IoError);

  CHECK_THROWS_AS(read_records_jsonl(tmp.file("absent.jsonl")), IoError);
}

TEST_CASE("the logical clock stamps strictly increasing ticks") {
  Fixture fx;
  auto ds = tiny_dataset();
  auto target = adapters::ScriptedChatModel::echo();
  judge::KeywordJudge judge;

  LogicalClock clock;
  RunOptions options;
  options.clock = &clock;
  auto records = run_attack(ds, target, {}, fx.artifacts(), judge, options);

  std::string prev;
  for (const auto& rec : records) {
    CHECK(rec.started_at > prev);
    CHECK(rec.finished_at > rec.started_at);
    prev = rec.finished_at;
  }
  CHECK(records[0].started_at == "T00000000");
}

TEST_CASE("records stream to disk as the run progresses") {
  test::TempDir tmp;
  Fixture fx;
  auto ds = tiny_dataset();
  auto target = adapters::ScriptedChatModel::echo();
  judge::KeywordJudge judge;

  auto path = tmp.file("stream.jsonl");
  RunOptions options;
  options.records_path = path;
  auto records = run_attack(ds, target, {}, fx.artifacts(), judge, options);

  auto loaded = read_records_jsonl(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].to_json().dump() == records[i].to_json().dump());
  }

  run_attack(ds, target, {}, fx.artifacts(), judge, options);
  CHECK(read_records_jsonl(path).size() == 2 * records.size());
}

TEST_CASE("identical options produce identical records") {
  Fixture fx;
  auto ds = tiny_dataset();
  judge::KeywordJudge judge;

  auto run = [&]() {
    auto target = adapters::ScriptedChatModel::echo();
    RunOptions options;
    options.seed = 77;
    return run_attack(ds, target, {false, true, true}, fx.artifacts(), judge, options);
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].to_json().dump() == b[i].to_json().dump());
  }
}
