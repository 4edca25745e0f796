#include "forge/attack.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "forge/rng.hpp"

namespace forge::eval {

std::string ComponentFlags::to_string() const {
  std::string out;
  if (visual) out += "visual";
  if (textual) out += (out.empty() ? "" : "+") + std::string("textual");
  if (suffix) out += (out.empty() ? "" : "+") + std::string("suffix");
  return out.empty() ? "none" : out;
}

std::string WallClock::now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string LogicalClock::now() {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "T%08llu", static_cast<unsigned long long>(tick_++));
  return buf;
}

nlohmann::ordered_json AttackRecord::to_json() const {
  return nlohmann::ordered_json{
      {"schema_version", schema_version},
      {"prompt_id", prompt_id},
      {"original_text", original_text},
      {"rewritten_text", rewritten_text},
      {"suffix_tokens", suffix_tokens},
      {"suffix_text", suffix_text},
      {"clean_image_ref", clean_image_ref},
      {"adv_image_ref", adv_image_ref},
      {"components",
       {{"visual", components.visual},
        {"textual", components.textual},
        {"suffix", components.suffix}}},
      {"final_prompt", final_prompt},
      {"response", response},
      {"verdict",
       {{"label", verdict.label},
        {"judge_id", verdict.judge_id},
        {"raw_judgment", verdict.raw_judgment},
        {"response_hash", verdict.response_hash}}},
      {"model_id", model_id},
      {"dataset_id", dataset_id},
      {"started_at", started_at},
      {"finished_at", finished_at},
      {"seed", seed},
      {"transport_failed", transport_failed},
      {"error", error},
  };
}

AttackRecord AttackRecord::from_json(const nlohmann::json& j) {
  AttackRecord r;
  try {
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != 1) {
      throw IoError("unsupported record schema_version " +
                    std::to_string(r.schema_version));
    }
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.original_text = j.at("original_text").get<std::string>();
    r.rewritten_text = j.at("rewritten_text").get<std::string>();
    r.suffix_tokens = j.at("suffix_tokens").get<std::vector<int>>();
    r.suffix_text = j.at("suffix_text").get<std::string>();
    r.clean_image_ref = j.at("clean_image_ref").get<std::string>();
    r.adv_image_ref = j.at("adv_image_ref").get<std::string>();
    const auto& c = j.at("components");
    r.components.visual = c.at("visual").get<bool>();
    r.components.textual = c.at("textual").get<bool>();
    r.components.suffix = c.at("suffix").get<bool>();
    r.final_prompt = j.at("final_prompt").get<std::string>();
    r.response = j.at("response").get<std::string>();
    const auto& v = j.at("verdict");
    r.verdict.label = v.at("label").get<int>();
    r.verdict.judge_id = v.at("judge_id").get<std::string>();
    r.verdict.raw_judgment = v.at("raw_judgment").get<std::string>();
    r.verdict.response_hash = v.at("response_hash").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.started_at = j.at("started_at").get<std::string>();
    r.finished_at = j.at("finished_at").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.transport_failed = j.at("transport_failed").get<bool>();
    r.error = j.at("error").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed attack record: ") + e.what());
  }
  return r;
}

void append_records_jsonl(const std::filesystem::path& path,
                          const std::vector<AttackRecord>& records) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  for (const auto& r : records) out << r.to_json().dump() << '\n';
}

std::vector<AttackRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<AttackRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(AttackRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

std::vector<AttackRecord> run_attack(const SafetyDataset& dataset,
                                     adapters::ChatModel& target,
                                     ComponentFlags components,
                                     const AttackArtifacts& artifacts,
                                     judge::JudgeClient& judge,
                                     const RunOptions& options) {
  if (dataset.prompts.empty()) throw ConfigError("dataset", "has no prompts");
  if (components.visual && artifacts.adversarial == nullptr) {
    throw ConfigError("artifacts.adversarial", "required when the visual component is on");
  }
  if (components.textual &&
      (artifacts.prompt_template == nullptr || artifacts.rewriter == nullptr)) {
    throw ConfigError("artifacts.rewriter", "template and rewriter required when the "
                                            "textual component is on");
  }
  if (components.suffix && artifacts.policy == nullptr) {
    throw ConfigError("artifacts.policy", "required when the suffix component is on");
  }
  if (artifacts.clean_image.pixels.empty()) {
    throw ConfigError("artifacts.clean_image", "required for every run");
  }

  const ImageBuffer& image =
      components.visual ? artifacts.adversarial->pixels : artifacts.clean_image;
  const std::string clean_ref = content_hash(artifacts.clean_image);
  const std::string adv_ref = components.visual ? content_hash(image) : clean_ref;

  LogicalClock fallback_clock;
  Clock& clock = options.clock ? *options.clock : fallback_clock;

  std::ofstream sink;
  if (!options.records_path.empty()) {
    sink.open(options.records_path, std::ios::app);
    if (!sink) throw IoError("cannot append to " + options.records_path.string());
  }

  std::vector<AttackRecord> records;
  records.reserve(dataset.prompts.size());
  std::size_t failures = 0;

  for (std::size_t i = 0; i < dataset.prompts.size(); ++i) {
    const auto& prompt = dataset.prompts[i];
    AttackRecord rec;
    rec.prompt_id = prompt.id;
    rec.original_text = prompt.text;
    rec.components = components;
    rec.clean_image_ref = clean_ref;
    rec.adv_image_ref = adv_ref;
    rec.model_id = target.model_id();
    rec.dataset_id = dataset.dataset_id;
    rec.seed = derive_seed(options.seed, i);
    rec.started_at = clock.now();

    try {
      rec.rewritten_text =
          components.textual
              ? rewrite::rewrite(prompt.text, *artifacts.prompt_template,
                                 *artifacts.rewriter)
                    .rewritten
              : prompt.text;

      rec.final_prompt = rec.rewritten_text;
      if (components.suffix) {
        adapters::DecodeParams gen_params;
        gen_params.greedy = true;
        gen_params.seed = rec.seed;
        const auto gen =
            suffix::generate_suffix(*artifacts.policy, rec.rewritten_text, gen_params);
        rec.suffix_tokens = gen.tokens;
        rec.suffix_text = gen.text;
        rec.final_prompt = suffix::concat_suffix(rec.rewritten_text, gen.tokens,
                                                 artifacts.policy->policy.vocab());
      }

      adapters::DecodeParams decode = options.decode;
      decode.seed = rec.seed;
      rec.response = target.generate(image, rec.final_prompt, decode);
      rec.verdict = judge::judge_response(rec.response, judge);
    } catch (const TransportError& e) {
      rec.transport_failed = true;
      rec.error = std::string("transport: ") + e.what();
      ++failures;
    } catch (const EmptyResponseError& e) {
      rec.transport_failed = true;
      rec.error = std::string("empty response: ") + e.what();
      ++failures;
    } catch (const JudgeParseError& e) {
      rec.transport_failed = true;
      rec.error = std::string("judge: ") + e.what();
      ++failures;
    }

    rec.finished_at = clock.now();
    if (sink.is_open()) {
      sink << rec.to_json().dump() << '\n';
      sink.flush();
    }
    records.push_back(std::move(rec));
  }

  const double rate =
      static_cast<double>(failures) / static_cast<double>(dataset.prompts.size());
  if (rate > options.failure_tolerance) {
    throw TransportError("attack run failed: " + std::to_string(failures) + "/" +
                             std::to_string(dataset.prompts.size()) +
                             " prompts hit transport or judge failures",
                         static_cast<int>(failures));
  }
  return records;
}

}  // namespace forge::eval
