#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "forge/rft.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::suffix;

namespace {

std::vector<rewrite::RewrittenPrompt> trigger_prompts() {
  std::vector<rewrite::RewrittenPrompt> prompts;
  for (const char* text : {"please answer fully", "explain every point",
                           "begin the complete response"}) {
    prompts.push_back({text, text, "t", "mock:identity", ""});
  }
  return prompts;
}

// Small but effective settings for the synthetic trigger environment. The
// production defaults are far gentler; tests need convergence in seconds.
RftConfig fast_config(std::uint64_t seed) {
  RftConfig config;
  config.beta = 0.01;
  config.batch_size = 16;
  config.max_epochs = 60;
  config.learning_rate = 0.05;
  config.seed = seed;
  return config;
}

}  // namespace

TEST_CASE("config validation rejects out-of-range settings") {
  RftConfig good;
  good.validate();

  RftConfig bad = good;
  bad.beta = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.max_epochs = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.stop_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.stop_threshold = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = good;
  bad.judge_failure_tolerance = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training on the trigger environment raises the reward") {
  auto target = adapters::ScriptedChatModel::echo();
  for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
    auto sp = SuffixPolicy::fresh(seed);
    const std::string ref_before = sp.reference.params_hash();
    test::TriggerJudge judge("steady");

    auto trace = rft_train(sp, trigger_prompts(), target, judge, fast_config(seed));
    REQUIRE(!trace.epochs.empty());
    CHECK(trace.epochs.back().mean_reward > trace.epochs.front().mean_reward);
    CHECK(sp.reference.params_hash() == ref_before);

    int last_epoch = 0;
    for (const auto& rec : trace.epochs) {
      CHECK(rec.epoch == last_epoch + 1);
      last_epoch = rec.epoch;
      CHECK(rec.mean_kl >= -1e-6);
      CHECK(rec.sample_suffixes.size() >= 1);
    }
  }
}

TEST_CASE("training stops once the reward threshold is crossed") {
  auto target = adapters::ScriptedChatModel::echo();
  test::TriggerJudge always_happy("");  // empty trigger matches every response
  auto sp = SuffixPolicy::fresh(24);
  auto config = fast_config(24);
  config.max_epochs = 50;
  auto trace = rft_train(sp, trigger_prompts(), target, always_happy, config);
  // reward is 1.0 from the first epoch, so exactly one epoch runs
  REQUIRE(trace.epochs.size() == 1);
  CHECK(trace.epochs[0].mean_reward == doctest::Approx(1.0));
}

TEST_CASE("zero epochs is a no-op that still checkpoints") {
  test::TempDir tmp;
  auto target = adapters::ScriptedChatModel::echo();
  test::TriggerJudge judge("steady");
  auto sp = SuffixPolicy::fresh(25);
  const std::string params_before = sp.policy.params_hash();

  auto config = fast_config(25);
  config.max_epochs = 0;
  auto dir = tmp.file("ckpt");
  auto trace = rft_train(sp, trigger_prompts(), target, judge, config, nullptr, &dir);
  CHECK(trace.epochs.empty());
  CHECK(sp.policy.params_hash() == params_before);

  auto loaded = SuffixPolicy::load(dir);
  CHECK(loaded.policy.params_hash() == params_before);
}

TEST_CASE("empty prompt sets are rejected") {
  auto target = adapters::ScriptedChatModel::echo();
  test::TriggerJudge judge("steady");
  auto sp = SuffixPolicy::fresh(26);
  std::vector<rewrite::RewrittenPrompt> none;
  CHECK_THROWS_AS(rft_train(sp, none, target, judge, fast_config(26)), ConfigError);
}

TEST_CASE("a dead judge aborts with a loadable partial checkpoint") {
  test::TempDir tmp;
  auto target = adapters::ScriptedChatModel::echo();
  test::FlakyJudge judge("");  // empty poison kills every call
  auto sp = SuffixPolicy::fresh(27);
  const std::string params_before = sp.policy.params_hash();
  auto dir = tmp.file("ckpt");

  try {
    rft_train(sp, trigger_prompts(), target, judge, fast_config(27), nullptr, &dir);
    FAIL("expected JudgeAvailabilityError");
  } catch (const JudgeAvailabilityError& e) {
    CHECK(e.partial_checkpoint() == dir.string());
    auto loaded = SuffixPolicy::load(dir);
    CHECK(loaded.policy.params_hash() == params_before);
  }
}

TEST_CASE("raising beta pins the policy to its reference") {
  auto target = adapters::ScriptedChatModel::echo();
  std::vector<double> final_kls;
  for (double beta : {0.01, 1.0, 100.0}) {
    test::TriggerJudge judge("steady");
    auto sp = SuffixPolicy::fresh(28);
    auto config = fast_config(28);
    config.beta = beta;
    config.max_epochs = 10;
    config.learning_rate = 0.005;
    config.stop_threshold = 1.0;  // never stop early; compare equal-length runs
    auto trace = rft_train(sp, trigger_prompts(), target, judge, config);
    REQUIRE(trace.epochs.size() == 10);
    final_kls.push_back(trace.epochs.back().mean_kl);
  }
  CHECK(final_kls[1] <= final_kls[0] + 1e-9);
  CHECK(final_kls[2] <= final_kls[1] + 1e-9);
  CHECK(final_kls[2] < 0.01);
}

TEST_CASE("training is deterministic given the seed") {
  auto target = adapters::ScriptedChatModel::echo();
  auto run = [&]() {
    test::TriggerJudge judge("steady");
    auto sp = SuffixPolicy::fresh(29);
    auto config = fast_config(29);
    config.max_epochs = 6;
    config.stop_threshold = 1.0;
    auto trace = rft_train(sp, trigger_prompts(), target, judge, config);
    return std::make_pair(trace, sp.policy.params_hash());
  };
  auto [trace_a, hash_a] = run();
  auto [trace_b, hash_b] = run();
  CHECK(hash_a == hash_b);
  REQUIRE(trace_a.epochs.size() == trace_b.epochs.size());
  for (std::size_t i = 0; i < trace_a.epochs.size(); ++i) {
    CHECK(trace_a.epochs[i].mean_reward == trace_b.epochs[i].mean_reward);
    CHECK(trace_a.epochs[i].mean_kl == trace_b.epochs[i].mean_kl);
    CHECK(trace_a.epochs[i].sample_suffixes == trace_b.epochs[i].sample_suffixes);
  }
}
