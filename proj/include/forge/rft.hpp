#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/adapters.hpp"
#include "forge/judge.hpp"
#include "forge/rewrite.hpp"
#include "forge/suffix_policy.hpp"

namespace forge::suffix {

struct RftConfig {
  double beta = 0.1;  // KL coefficient; swept in tests, never published
  int batch_size = 32;
  int max_epochs = 200;
  double stop_threshold = 0.90;  // halt once mean reward exceeds this
  std::uint64_t seed = 0;
  double clip_range = 0.2;
  int updates_per_batch = 4;
  double learning_rate = 1e-5;
  double judge_failure_tolerance = 0.1;  // fraction of a batch allowed to fail
  bool include_image = true;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_reward = 0.0;
  // Exact per-state categorical KL(pi || pi_ref) averaged over the states
  // visited this epoch; non-negative by construction.
  double mean_kl = 0.0;
  std::vector<std::string> sample_suffixes;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
};

// KL-regularized reinforcement fine-tuning with a clipped surrogate policy
// update. Per epoch: sample batch_size rollouts from the current policy,
// query the target, score with the judge (cached by response hash), fold the
// per-token sampled KL penalty into the reward, then run updates_per_batch
// clipped-surrogate passes with Adam. The epoch record is taken before the
// update, so the returned policy reproduces the final record's behavior
// exactly. pi_ref never changes (hash-verified).
//
// image: included in rollouts when config.include_image and non-null;
// checkpoint_dir: when set, the final (or partial, on judge failure)
// checkpoint is saved there.
TrainingTrace rft_train(SuffixPolicy& sp,
                        const std::vector<rewrite::RewrittenPrompt>& prompts,
                        adapters::ChatModel& target, judge::JudgeClient& reward_judge,
                        const RftConfig& config, const ImageBuffer* image = nullptr,
                        const std::filesystem::path* checkpoint_dir = nullptr);

}  // namespace forge::suffix
