#include "forge/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace forge::eval {

std::string asr_percent_string(std::size_t harmful, std::size_t attempts) {
  if (attempts == 0) throw RangeError("asr: attempts must be > 0");
  if (harmful > attempts) throw RangeError("asr: harmful exceeds attempts");

  // 100 * harmful / attempts at 2 decimals == 10000 * harmful / attempts
  // hundredths. Round half to even on the exact remainder.
  const std::uint64_t num = 10000ULL * harmful;
  const std::uint64_t den = attempts;
  std::uint64_t q = num / den;
  const std::uint64_t r = num % den;
  if (2 * r > den || (2 * r == den && (q % 2) == 1)) ++q;

  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu.%02llu",
                static_cast<unsigned long long>(q / 100),
                static_cast<unsigned long long>(q % 100));
  return buf;
}

AsrReport compute_asr(const std::vector<AttackRecord>& records) {
  if (records.empty()) throw RangeError("compute_asr: no records");

  const auto& first = records.front();
  for (const auto& r : records) {
    if (r.model_id != first.model_id || r.dataset_id != first.dataset_id ||
        !(r.components == first.components)) {
      throw ConfigError("records", "mixed model/dataset/component configurations");
    }
  }

  AsrReport report;
  report.model_id = first.model_id;
  report.dataset_id = first.dataset_id;
  report.components = first.components;
  for (const auto& r : records) {
    if (r.transport_failed) {
      ++report.n_failed;
      continue;
    }
    ++report.n_attempts;
    if (r.verdict.label == 1) ++report.n_harmful;
  }
  if (report.n_attempts == 0) {
    throw RangeError("compute_asr: every record failed on transport");
  }
  report.asr_percent = asr_percent_string(report.n_harmful, report.n_attempts);
  return report;
}

const std::vector<ComponentFlags>& default_ablation_subsets() {
  static const std::vector<ComponentFlags> subsets{
      {true, false, false},  // V
      {false, true, false},  // T
      {false, false, true},  // S
      {true, true, false},   // V+T
      {false, true, true},   // T+S
      {true, true, true},    // full method
  };
  return subsets;
}

std::vector<AsrReport> run_ablation(const SafetyDataset& dataset,
                                    adapters::ChatModel& target,
                                    const AttackArtifacts& artifacts,
                                    judge::JudgeClient& judge, const RunOptions& options,
                                    const std::vector<ComponentFlags>& subsets,
                                    const std::filesystem::path* records_dir) {
  if (artifacts.adversarial == nullptr || artifacts.prompt_template == nullptr ||
      artifacts.rewriter == nullptr || artifacts.policy == nullptr) {
    throw ConfigError("artifacts", "ablation needs all three component artifacts");
  }
  if (subsets.empty()) throw ConfigError("subsets", "must not be empty");

  std::vector<AsrReport> reports;
  reports.reserve(subsets.size());
  for (const auto& flags : subsets) {
    RunOptions opts = options;
    opts.records_path.clear();
    if (records_dir != nullptr) {
      opts.records_path = *records_dir / ("records-" + flags.to_string() + ".jsonl");
    }
    const auto records = run_attack(dataset, target, flags, artifacts, judge, opts);
    reports.push_back(compute_asr(records));
  }
  return reports;
}

nlohmann::ordered_json reports_to_json(const std::vector<AsrReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    arr.push_back(nlohmann::ordered_json{
        {"dataset", r.dataset_id},
        {"model", r.model_id},
        {"components",
         {{"visual", r.components.visual},
          {"textual", r.components.textual},
          {"suffix", r.components.suffix}}},
        {"asr_percent", r.asr_percent},
        {"n_attempts", r.n_attempts},
        {"n_harmful", r.n_harmful},
        {"n_failed", r.n_failed},
    });
  }
  return arr;
}

std::vector<AsrReport> reports_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw IoError("report json must be an array");
  std::vector<AsrReport> reports;
  for (const auto& item : doc) {
    AsrReport r;
    try {
      r.dataset_id = item.at("dataset").get<std::string>();
      r.model_id = item.at("model").get<std::string>();
      const auto& c = item.at("components");
      r.components.visual = c.at("visual").get<bool>();
      r.components.textual = c.at("textual").get<bool>();
      r.components.suffix = c.at("suffix").get<bool>();
      r.asr_percent = item.at("asr_percent").get<std::string>();
      r.n_attempts = item.at("n_attempts").get<std::size_t>();
      r.n_harmful = item.at("n_harmful").get<std::size_t>();
      r.n_failed = item.at("n_failed").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed report entry: ") + e.what());
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string emit_report(const std::vector<AsrReport>& reports, ReportFormat format) {
  if (reports.empty()) throw RangeError("emit_report: no reports");

  if (format == ReportFormat::kJson) {
    return reports_to_json(reports).dump(2) + "\n";
  }

  // dataset-major grouping, datasets in first-seen order
  std::vector<std::string> dataset_order;
  for (const auto& r : reports) {
    if (std::find(dataset_order.begin(), dataset_order.end(), r.dataset_id) ==
        dataset_order.end()) {
      dataset_order.push_back(r.dataset_id);
    }
  }

  std::size_t w_ds = 7, w_model = 5, w_comp = 10;
  for (const auto& r : reports) {
    w_ds = std::max(w_ds, r.dataset_id.size());
    w_model = std::max(w_model, r.model_id.size());
    w_comp = std::max(w_comp, r.components.to_string().size());
  }

  std::ostringstream out;
  const auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  out << pad("dataset", w_ds) << "  " << pad("model", w_model) << "  "
      << pad("components", w_comp) << "  " << "asr%\n";
  out << std::string(w_ds, '-') << "  " << std::string(w_model, '-') << "  "
      << std::string(w_comp, '-') << "  " << "------\n";
  for (const auto& ds : dataset_order) {
    for (const auto& r : reports) {
      if (r.dataset_id != ds) continue;
      out << pad(r.dataset_id, w_ds) << "  " << pad(r.model_id, w_model) << "  "
          << pad(r.components.to_string(), w_comp) << "  " << r.asr_percent << "\n";
    }
  }
  return out.str();
}

}  // namespace forge::eval
