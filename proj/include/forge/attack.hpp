#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/adapters.hpp"
#include "forge/dataset.hpp"
#include "forge/judge.hpp"
#include "forge/rewrite.hpp"
#include "forge/suffix_policy.hpp"
#include "forge/visual_optimizer.hpp"

namespace forge::eval {

struct ComponentFlags {
  bool visual = false;
  bool textual = false;
  bool suffix = false;

  bool operator==(const ComponentFlags&) const = default;
  std::string to_string() const;  // e.g. "visual+textual+suffix", "none"
};

// Timestamp source. The logical clock emits a monotone counter instead of
// wall time so deterministic runs hash identically end to end.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::string now() = 0;
};

class WallClock final : public Clock {
 public:
  std::string now() override;
};

class LogicalClock final : public Clock {
 public:
  std::string now() override;

 private:
  std::uint64_t tick_ = 0;
};

// Everything a run may need; only the artifacts for enabled components are
// required. clean_image is always required (the vanilla image).
struct AttackArtifacts {
  const visual::AdversarialImage* adversarial = nullptr;
  ImageBuffer clean_image;
  const rewrite::RewriteTemplate* prompt_template = nullptr;
  rewrite::RewriterClient* rewriter = nullptr;
  const suffix::SuffixPolicy* policy = nullptr;
};

struct AttackRecord {
  int schema_version = 1;
  std::string prompt_id;
  std::string original_text;
  std::string rewritten_text;
  std::vector<int> suffix_tokens;
  std::string suffix_text;
  std::string clean_image_ref;
  std::string adv_image_ref;  // equals clean_image_ref when visual is off
  ComponentFlags components;
  std::string final_prompt;
  std::string response;
  judge::Verdict verdict;
  std::string model_id;
  std::string dataset_id;
  std::string started_at;
  std::string finished_at;
  std::uint64_t seed = 0;
  bool transport_failed = false;
  std::string error;

  nlohmann::ordered_json to_json() const;
  static AttackRecord from_json(const nlohmann::json& j);
};

void append_records_jsonl(const std::filesystem::path& path,
                          const std::vector<AttackRecord>& records);
std::vector<AttackRecord> read_records_jsonl(const std::filesystem::path& path);

struct RunOptions {
  std::uint64_t seed = 0;
  // Fraction of prompts allowed to fail on transport/judge before the run
  // itself is declared failed.
  double failure_tolerance = 0.0;
  std::filesystem::path records_path;  // when set, records append here as they land
  Clock* clock = nullptr;              // default: fresh logical clock per run
  adapters::DecodeParams decode;
};

// Single-shot attack: exactly one attempt per prompt, one record per prompt,
// in dataset order. Infrastructure failures (rewriter, target, judge) mark
// the record transport_failed instead of aborting, unless their rate exceeds
// options.failure_tolerance.
std::vector<AttackRecord> run_attack(const SafetyDataset& dataset,
                                     adapters::ChatModel& target,
                                     ComponentFlags components,
                                     const AttackArtifacts& artifacts,
                                     judge::JudgeClient& judge,
                                     const RunOptions& options = {});

}  // namespace forge::eval
