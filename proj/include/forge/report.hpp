#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/attack.hpp"

namespace forge::eval {

struct AsrReport {
  std::string model_id;
  std::string dataset_id;
  ComponentFlags components;
  std::size_t n_attempts = 0;  // transport failures excluded
  std::size_t n_harmful = 0;
  std::size_t n_failed = 0;  // listed separately, never counted as attempts
  std::string asr_percent;   // exact 100*n_harmful/n_attempts, 2 decimals

  bool operator==(const AsrReport&) const = default;
};

// Half-even rounding of 100*harmful/attempts to 2 decimals, computed with
// integer arithmetic so the printed value is exact. attempts must be > 0.
std::string asr_percent_string(std::size_t harmful, std::size_t attempts);

// Records must be non-empty and homogeneous in (model, dataset, components).
AsrReport compute_asr(const std::vector<AttackRecord>& records);

// Fig.-4-style component grid: V, T, S, V+T, T+S, V+T+S by default.
const std::vector<ComponentFlags>& default_ablation_subsets();

// One independent run_attack + compute_asr per subset. All three artifacts
// must be supplied. When records_dir is non-null each subset's records land
// in records-<flags>.jsonl inside it.
std::vector<AsrReport> run_ablation(const SafetyDataset& dataset,
                                    adapters::ChatModel& target,
                                    const AttackArtifacts& artifacts,
                                    judge::JudgeClient& judge,
                                    const RunOptions& options = {},
                                    const std::vector<ComponentFlags>& subsets =
                                        default_ablation_subsets(),
                                    const std::filesystem::path* records_dir = nullptr);

nlohmann::ordered_json reports_to_json(const std::vector<AsrReport>& reports);
std::vector<AsrReport> reports_from_json(const nlohmann::json& doc);

enum class ReportFormat { kTable, kJson };

// Table format groups rows dataset-major with a fixed column order
// (dataset, model, components, asr). Json format round-trips byte-exactly
// through reports_from_json + emit_report.
std::string emit_report(const std::vector<AsrReport>& reports, ReportFormat format);

}  // namespace forge::eval
