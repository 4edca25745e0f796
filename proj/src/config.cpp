#include "forge/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "forge/black_box.hpp"
#include "forge/sha256.hpp"
#include "forge/toy_vlm.hpp"

namespace forge::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

template <typename T>
T take(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path.empty() ? key : path + "." + key, "wrong type");
  }
}

EndpointSettings parse_endpoint(const json& obj, const std::string& path) {
  check_keys(obj, path, {"base_url", "path", "auth_env", "timeout_seconds", "retry_budget"});
  EndpointSettings s;
  s.base_url = take<std::string>(obj, path, "base_url", s.base_url);
  s.path = take<std::string>(obj, path, "path", s.path);
  s.auth_env = take<std::string>(obj, path, "auth_env", s.auth_env);
  s.timeout_seconds = take<double>(obj, path, "timeout_seconds", s.timeout_seconds);
  s.retry_budget = take<int>(obj, path, "retry_budget", s.retry_budget);
  if (!(s.timeout_seconds > 0.0)) throw ConfigError(path + ".timeout_seconds", "must be > 0");
  if (s.retry_budget < 0) throw ConfigError(path + ".retry_budget", "must be >= 0");
  return s;
}

json endpoint_json(const EndpointSettings& s) {
  return nlohmann::ordered_json{{"base_url", s.base_url},
                                {"path", s.path},
                                {"auth_env", s.auth_env},
                                {"timeout_seconds", s.timeout_seconds},
                                {"retry_budget", s.retry_budget}};
}

void require_kind(const std::string& value, const std::string& path,
                  std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  std::string options;
  for (const char* a : allowed) options += (options.empty() ? "" : "|") + std::string(a);
  throw ConfigError(path, "must be one of " + options);
}

}  // namespace

RunConfig validate_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config", "must be a json object");
  check_keys(doc, "", {"seed", "out_dir", "clock", "model", "budget", "image",
                       "corpus_path", "template_path", "rewriter", "judge", "rft",
                       "suffix_length", "dataset", "attack", "stages"});

  RunConfig c;
  c.seed = take<std::uint64_t>(doc, "", "seed", c.seed);
  c.out_dir = take<std::string>(doc, "", "out_dir", c.out_dir);
  c.clock = take<std::string>(doc, "", "clock", c.clock);
  require_kind(c.clock, "clock", {"logical", "wall"});

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    if (!m.is_object()) throw ConfigError("model", "must be an object");
    check_keys(m, "model", {"kind", "id", "weight_seed", "scripted_responses", "endpoint"});
    c.model.kind = take<std::string>(m, "model", "kind", c.model.kind);
    require_kind(c.model.kind, "model.kind", {"toy", "echo", "scripted", "http"});
    c.model.id = take<std::string>(m, "model", "id", c.model.id);
    c.model.weight_seed = take<std::uint64_t>(m, "model", "weight_seed", c.model.weight_seed);
    c.model.scripted_responses = take<std::vector<std::string>>(
        m, "model", "scripted_responses", c.model.scripted_responses);
    if (m.contains("endpoint")) c.model.endpoint = parse_endpoint(m.at("endpoint"), "model.endpoint");
    if (c.model.kind == "http" && c.model.endpoint.base_url.empty()) {
      throw ConfigError("model.endpoint.base_url", "required for http models");
    }
    if (c.model.kind == "scripted" && c.model.scripted_responses.empty()) {
      throw ConfigError("model.scripted_responses", "required for scripted models");
    }
  }

  if (doc.contains("budget")) {
    const auto& b = doc.at("budget");
    if (!b.is_object()) throw ConfigError("budget", "must be an object");
    check_keys(b, "budget", {"epsilon", "steps", "step_size", "seed"});
    c.budget.epsilon = take<double>(b, "budget", "epsilon", c.budget.epsilon);
    c.budget.steps = take<int>(b, "budget", "steps", c.budget.steps);
    c.budget.step_size = take<double>(b, "budget", "step_size", c.budget.step_size);
    c.budget.seed = take<std::uint64_t>(b, "budget", "seed", c.budget.seed);
  }
  c.budget.validate();

  if (doc.contains("image")) {
    const auto& im = doc.at("image");
    if (!im.is_object()) throw ConfigError("image", "must be an object");
    check_keys(im, "image", {"path", "height", "width", "channels"});
    c.image.path = take<std::string>(im, "image", "path", c.image.path);
    c.image.height = take<int>(im, "image", "height", c.image.height);
    c.image.width = take<int>(im, "image", "width", c.image.width);
    c.image.channels = take<int>(im, "image", "channels", c.image.channels);
    if (c.image.height < 1) throw ConfigError("image.height", "must be >= 1");
    if (c.image.width < 1) throw ConfigError("image.width", "must be >= 1");
    if (c.image.channels < 1 || c.image.channels > 4) {
      throw ConfigError("image.channels", "must be in [1, 4]");
    }
  }

  c.corpus_path = take<std::string>(doc, "", "corpus_path", c.corpus_path);
  c.template_path = take<std::string>(doc, "", "template_path", c.template_path);

  if (doc.contains("rewriter")) {
    const auto& r = doc.at("rewriter");
    if (!r.is_object()) throw ConfigError("rewriter", "must be an object");
    check_keys(r, "rewriter", {"kind", "preamble", "endpoint"});
    c.rewriter.kind = take<std::string>(r, "rewriter", "kind", c.rewriter.kind);
    require_kind(c.rewriter.kind, "rewriter.kind", {"identity", "scripted", "http"});
    c.rewriter.preamble = take<std::string>(r, "rewriter", "preamble", c.rewriter.preamble);
    if (r.contains("endpoint")) {
      c.rewriter.endpoint = parse_endpoint(r.at("endpoint"), "rewriter.endpoint");
    }
    if (c.rewriter.kind == "http" && c.rewriter.endpoint.base_url.empty()) {
      throw ConfigError("rewriter.endpoint.base_url", "required for http rewriters");
    }
  }

  if (doc.contains("judge")) {
    const auto& jd = doc.at("judge");
    if (!jd.is_object()) throw ConfigError("judge", "must be an object");
    check_keys(jd, "judge", {"kind", "replies", "system_prompt", "endpoint"});
    c.judge.kind = take<std::string>(jd, "judge", "kind", c.judge.kind);
    require_kind(c.judge.kind, "judge.kind", {"keyword", "scripted", "http"});
    c.judge.replies = take<std::vector<std::string>>(jd, "judge", "replies", c.judge.replies);
    c.judge.system_prompt = take<std::string>(jd, "judge", "system_prompt", c.judge.system_prompt);
    if (jd.contains("endpoint")) {
      c.judge.endpoint = parse_endpoint(jd.at("endpoint"), "judge.endpoint");
    }
    if (c.judge.kind == "http" && c.judge.endpoint.base_url.empty()) {
      throw ConfigError("judge.endpoint.base_url", "required for http judges");
    }
    if (c.judge.kind == "scripted" && c.judge.replies.empty()) {
      throw ConfigError("judge.replies", "required for scripted judges");
    }
  }

  if (doc.contains("rft")) {
    const auto& r = doc.at("rft");
    if (!r.is_object()) throw ConfigError("rft", "must be an object");
    check_keys(r, "rft",
               {"beta", "batch_size", "max_epochs", "stop_threshold", "seed", "clip_range",
                "updates_per_batch", "learning_rate", "judge_failure_tolerance",
                "include_image"});
    c.rft.beta = take<double>(r, "rft", "beta", c.rft.beta);
    c.rft.batch_size = take<int>(r, "rft", "batch_size", c.rft.batch_size);
    c.rft.max_epochs = take<int>(r, "rft", "max_epochs", c.rft.max_epochs);
    c.rft.stop_threshold = take<double>(r, "rft", "stop_threshold", c.rft.stop_threshold);
    c.rft.seed = take<std::uint64_t>(r, "rft", "seed", c.rft.seed);
    c.rft.clip_range = take<double>(r, "rft", "clip_range", c.rft.clip_range);
    c.rft.updates_per_batch = take<int>(r, "rft", "updates_per_batch", c.rft.updates_per_batch);
    c.rft.learning_rate = take<double>(r, "rft", "learning_rate", c.rft.learning_rate);
    c.rft.judge_failure_tolerance =
        take<double>(r, "rft", "judge_failure_tolerance", c.rft.judge_failure_tolerance);
    c.rft.include_image = take<bool>(r, "rft", "include_image", c.rft.include_image);
  }
  c.rft.validate();

  c.suffix_length = take<int>(doc, "", "suffix_length", c.suffix_length);
  if (c.suffix_length != 10) {
    throw ConfigError("suffix_length", "fixed at 10 in this design");
  }

  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    if (!d.is_object()) throw ConfigError("dataset", "must be an object");
    check_keys(d, "dataset", {"path", "id", "text_column", "sample_n", "sample_seed"});
    c.dataset.path = take<std::string>(d, "dataset", "path", c.dataset.path);
    c.dataset.id = take<std::string>(d, "dataset", "id", c.dataset.id);
    c.dataset.text_column = take<std::string>(d, "dataset", "text_column", c.dataset.text_column);
    c.dataset.sample_n = take<std::size_t>(d, "dataset", "sample_n", c.dataset.sample_n);
    c.dataset.sample_seed = take<std::uint64_t>(d, "dataset", "sample_seed", c.dataset.sample_seed);
    const auto& ids = eval::SafetyDataset::known_ids();
    if (std::find(ids.begin(), ids.end(), c.dataset.id) == ids.end()) {
      throw ConfigError("dataset.id", "unknown id '" + c.dataset.id + "'");
    }
  }

  if (doc.contains("attack")) {
    const auto& a = doc.at("attack");
    if (!a.is_object()) throw ConfigError("attack", "must be an object");
    check_keys(a, "attack", {"failure_tolerance", "max_new_tokens"});
    c.attack.failure_tolerance =
        take<double>(a, "attack", "failure_tolerance", c.attack.failure_tolerance);
    c.attack.max_new_tokens = take<int>(a, "attack", "max_new_tokens", c.attack.max_new_tokens);
    if (c.attack.failure_tolerance < 0.0 || c.attack.failure_tolerance > 1.0) {
      throw ConfigError("attack.failure_tolerance", "must be in [0, 1]");
    }
    if (c.attack.max_new_tokens < 1) throw ConfigError("attack.max_new_tokens", "must be >= 1");
  }

  if (doc.contains("stages")) {
    const auto& s = doc.at("stages");
    if (!s.is_object()) throw ConfigError("stages", "must be an object");
    check_keys(s, "stages", {"visual", "textual", "suffix"});
    c.stages.visual = take<bool>(s, "stages", "visual", c.stages.visual);
    c.stages.textual = take<bool>(s, "stages", "textual", c.stages.textual);
    c.stages.suffix = take<bool>(s, "stages", "suffix", c.stages.suffix);
  }

  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", "invalid json in " + path.string() + ": " + e.what());
  }
  return validate_config(doc);
}

nlohmann::ordered_json RunConfig::to_json() const {
  return nlohmann::ordered_json{
      {"seed", seed},
      {"out_dir", out_dir},
      {"clock", clock},
      {"model",
       {{"kind", model.kind},
        {"id", model.id},
        {"weight_seed", model.weight_seed},
        {"scripted_responses", model.scripted_responses},
        {"endpoint", endpoint_json(model.endpoint)}}},
      {"budget",
       {{"epsilon", budget.epsilon},
        {"steps", budget.steps},
        {"step_size", budget.step_size},
        {"seed", budget.seed}}},
      {"image",
       {{"path", image.path},
        {"height", image.height},
        {"width", image.width},
        {"channels", image.channels}}},
      {"corpus_path", corpus_path},
      {"template_path", template_path},
      {"rewriter",
       {{"kind", rewriter.kind},
        {"preamble", rewriter.preamble},
        {"endpoint", endpoint_json(rewriter.endpoint)}}},
      {"judge",
       {{"kind", judge.kind},
        {"replies", judge.replies},
        {"system_prompt", judge.system_prompt},
        {"endpoint", endpoint_json(judge.endpoint)}}},
      {"rft", rft.to_json()},
      {"suffix_length", suffix_length},
      {"dataset",
       {{"path", dataset.path},
        {"id", dataset.id},
        {"text_column", dataset.text_column},
        {"sample_n", dataset.sample_n},
        {"sample_seed", dataset.sample_seed}}},
      {"attack",
       {{"failure_tolerance", attack.failure_tolerance},
        {"max_new_tokens", attack.max_new_tokens}}},
      {"stages",
       {{"visual", stages.visual}, {"textual", stages.textual}, {"suffix", stages.suffix}}},
  };
}

std::string config_hash(const RunConfig& config) {
  nlohmann::ordered_json j = config.to_json();
  j.erase("out_dir");  // runs must compare equal across directories
  return sha256_hex(j.dump());
}

adapters::EndpointConfig resolve_endpoint(const EndpointSettings& settings) {
  adapters::EndpointConfig e;
  e.base_url = settings.base_url;
  e.path = settings.path;
  e.timeout_seconds = settings.timeout_seconds;
  e.retry_budget = settings.retry_budget;
  if (!settings.auth_env.empty()) {
    const char* token = std::getenv(settings.auth_env.c_str());
    if (token == nullptr) {
      throw ConfigError("endpoint.auth_env",
                        "environment variable '" + settings.auth_env + "' is not set");
    }
    e.auth_token = token;
  }
  return e;
}

std::unique_ptr<adapters::ChatModel> make_model(const RunConfig& config,
                                                const Corpus& corpus) {
  const auto& m = config.model;
  if (m.kind == "toy") {
    adapters::ToyVlm::Shape shape;
    shape.height = config.image.height;
    shape.width = config.image.width;
    shape.channels = config.image.channels;
    return std::make_unique<adapters::ToyVlm>(
        adapters::ToyVlm::with_default_vocab(shape, corpus, m.weight_seed));
  }
  if (m.kind == "echo") {
    return std::make_unique<adapters::ScriptedChatModel>(
        adapters::ScriptedChatModel::echo(m.id.empty() ? "mock:echo" : m.id));
  }
  if (m.kind == "scripted") {
    return std::make_unique<adapters::ScriptedChatModel>(
        m.scripted_responses, m.id.empty() ? "mock:scripted" : m.id);
  }
  auto transport = std::make_shared<adapters::HttpJsonTransport>(
      resolve_endpoint(m.endpoint));
  return std::make_unique<adapters::BlackBoxVlm>(m.id.empty() ? "http:remote" : m.id,
                                                 std::move(transport),
                                                 resolve_endpoint(m.endpoint));
}

std::unique_ptr<judge::JudgeClient> make_judge(const RunConfig& config) {
  const auto& j = config.judge;
  if (j.kind == "keyword") return std::make_unique<judge::KeywordJudge>();
  if (j.kind == "scripted") {
    return std::make_unique<judge::ScriptedJudge>("mock:scripted-judge", j.replies);
  }
  auto transport = std::make_shared<adapters::HttpJsonTransport>(
      resolve_endpoint(j.endpoint));
  return std::make_unique<judge::HttpJudge>("http:judge", std::move(transport),
                                            resolve_endpoint(j.endpoint), j.system_prompt);
}

std::unique_ptr<rewrite::RewriterClient> make_rewriter(const RunConfig& config) {
  const auto& r = config.rewriter;
  if (r.kind == "identity") return std::make_unique<rewrite::IdentityRewriter>();
  if (r.kind == "scripted") {
    const std::string preamble = r.preamble;
    return std::make_unique<rewrite::ScriptedRewriter>(
        "mock:scripted",
        [preamble](const std::string&, const std::string& original) {
          return preamble.empty() ? original : preamble + " " + original;
        });
  }
  auto transport = std::make_shared<adapters::HttpJsonTransport>(
      resolve_endpoint(r.endpoint));
  return std::make_unique<rewrite::HttpRewriter>("http:rewriter", std::move(transport),
                                                 resolve_endpoint(r.endpoint));
}

}  // namespace forge::cli
