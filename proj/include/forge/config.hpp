#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/adapters.hpp"
#include "forge/attack.hpp"
#include "forge/http_client.hpp"
#include "forge/judge.hpp"
#include "forge/rewrite.hpp"
#include "forge/rft.hpp"
#include "forge/visual_optimizer.hpp"

namespace forge::cli {

struct EndpointSettings {
  std::string base_url;
  std::string path = "/v1/generate";
  std::string auth_env;  // name of the env var holding the bearer token
  double timeout_seconds = 30.0;
  int retry_budget = 2;
};

// The single run description: everything a `forge pipeline` invocation needs.
// Fully serializable; on the toy/mock stack a persisted config re-executes to
// identical artifacts.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "run";       // CLI --out overrides; excluded from config_hash
  std::string clock = "logical";     // "logical" for reproducible manifests, or "wall"

  struct Model {
    std::string kind = "toy";  // toy | echo | scripted | http
    std::string id;            // optional override for mocks/http
    std::uint64_t weight_seed = 0;
    std::vector<std::string> scripted_responses;
    EndpointSettings endpoint;
  } model;

  visual::PerturbationBudget budget;

  struct Image {
    std::string path;  // PNG; empty means synthesize a deterministic clean image
    int height = 8;
    int width = 8;
    int channels = 3;
  } image;

  std::string corpus_path;    // empty: built-in affirmative corpus
  std::string template_path;  // empty: built-in defensive template

  struct Rewriter {
    std::string kind = "identity";  // identity | scripted | http
    std::string preamble;           // scripted: prepended to the original prompt
    EndpointSettings endpoint;
  } rewriter;

  struct Judge {
    std::string kind = "keyword";  // keyword | scripted | http
    std::vector<std::string> replies;
    std::string system_prompt;
    EndpointSettings endpoint;
  } judge;

  suffix::RftConfig rft;
  int suffix_length = 10;  // fixed by design; validate rejects anything else

  struct Dataset {
    std::string path;
    std::string id = "custom";
    std::string text_column;
    std::size_t sample_n = 0;  // 0: use every prompt
    std::uint64_t sample_seed = 0;
  } dataset;

  struct Attack {
    double failure_tolerance = 0.0;
    int max_new_tokens = 32;
  } attack;

  eval::ComponentFlags stages{true, true, true};

  nlohmann::ordered_json to_json() const;
};

// Fills defaults, rejects unknown keys and out-of-range values (ConfigError
// carries the offending field path). Normalization is idempotent:
// validate_config(c.to_json()).to_json() == c.to_json().
RunConfig validate_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

// Hash of the normalized config with out_dir stripped, so runs in different
// directories compare equal.
std::string config_hash(const RunConfig& config);

adapters::EndpointConfig resolve_endpoint(const EndpointSettings& settings);

std::unique_ptr<adapters::ChatModel> make_model(const RunConfig& config,
                                                const Corpus& corpus);
std::unique_ptr<judge::JudgeClient> make_judge(const RunConfig& config);
std::unique_ptr<rewrite::RewriterClient> make_rewriter(const RunConfig& config);

}  // namespace forge::cli
