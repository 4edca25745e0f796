#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace forge::eval {

struct PromptRow {
  std::string id;
  std::string text;
  std::string topic;  // optional, empty when the source has none
};

struct SafetyDataset {
  std::string dataset_id;
  std::vector<PromptRow> prompts;
  std::string source_hash;

  static const std::vector<std::string>& known_ids();
};

// Ingests CSV (RFC 4180, header row required) or a JSON array, normalizing
// either into SafetyDataset. The text column is auto-detected from common
// names (prompt, text, goal, behavior, instruction, question) unless
// text_column names one explicitly. Optional id/topic columns are honored;
// missing ids become row-0, row-1, ...
SafetyDataset load_dataset(const std::filesystem::path& path, const std::string& dataset_id,
                           const std::string& text_column = "");

// Uniform sample without replacement; output preserves the source row order,
// so n == size returns the dataset unchanged.
SafetyDataset sample_prompts(const SafetyDataset& dataset, std::size_t n,
                             std::uint64_t seed);

}  // namespace forge::eval
