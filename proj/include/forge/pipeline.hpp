#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/config.hpp"

namespace forge::cli {

struct StageOutput {
  std::string path;  // relative to the run directory
  std::string sha256;
};

struct StageRecord {
  std::string name;
  std::string status;  // done | disabled | failed | blocked
  std::vector<StageOutput> outputs;
  std::string error;
  bool reused = false;  // true when intact artifacts were kept; not serialized
};

struct PipelineResult {
  std::filesystem::path out_dir;
  std::string config_hash;
  std::string manifest_hash;  // sha256 of the manifest.json bytes
  std::vector<StageRecord> stages;
};

inline constexpr const char* kManifestName = "manifest.json";

// Runs inputs -> visual -> rewrite -> suffix -> attack -> report under
// config.out_dir. The manifest links every artifact to its stage, the config
// hash, and the seed. Re-running against an existing directory with the same
// config hash reuses each stage whose outputs (and all upstream outputs) are
// still intact, so deleting just the report recomputes only the report. A
// stage failure is recorded in the manifest (remaining stages "blocked")
// before the error propagates.
PipelineResult run_pipeline(const RunConfig& config);

}  // namespace forge::cli
