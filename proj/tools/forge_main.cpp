// forge: red-team evaluation toolkit for vision-language chat models.
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "forge/black_box.hpp"
#include "forge/pipeline.hpp"
#include "forge/png_io.hpp"
#include "forge/report.hpp"
#include "forge/rng.hpp"
#include "forge/toy_vlm.hpp"

namespace {

using nlohmann::ordered_json;

struct ImageShape {
  int height = 8;
  int width = 8;
  int channels = 3;
};

forge::ImageBuffer load_or_synthesize_image(const std::string& path,
                                            const ImageShape& shape,
                                            std::uint64_t seed) {
  if (!path.empty()) return forge::read_png(path);
  return forge::random_image(shape.height, shape.width, shape.channels,
                             forge::derive_seed(seed, 0x696d6167ULL), 0.2, 0.8);
}

forge::Corpus load_corpus(const std::string& path) {
  if (path.empty()) return forge::Corpus::default_affirmative();
  return forge::Corpus::load(path);
}

bool is_http(const std::string& spec) {
  return spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0;
}

forge::adapters::EndpointConfig endpoint_for(const std::string& url,
                                             const std::string& auth_env) {
  forge::cli::EndpointSettings s;
  s.base_url = url;
  s.auth_env = auth_env;
  return forge::cli::resolve_endpoint(s);
}

// --target spec: "toy" (differentiable local model), "echo" (mock), or an
// http(s) URL for a remote endpoint.
std::unique_ptr<forge::adapters::ChatModel> model_from_spec(
    const std::string& spec, const forge::Corpus& corpus, const ImageShape& shape,
    std::uint64_t weight_seed, const std::string& auth_env) {
  if (spec == "toy") {
    forge::adapters::ToyVlm::Shape s;
    s.height = shape.height;
    s.width = shape.width;
    s.channels = shape.channels;
    return std::make_unique<forge::adapters::ToyVlm>(
        forge::adapters::ToyVlm::with_default_vocab(s, corpus, weight_seed));
  }
  if (spec == "echo") {
    return std::make_unique<forge::adapters::ScriptedChatModel>(
        forge::adapters::ScriptedChatModel::echo());
  }
  if (is_http(spec)) {
    auto endpoint = endpoint_for(spec, auth_env);
    auto transport = std::make_shared<forge::adapters::HttpJsonTransport>(endpoint);
    return std::make_unique<forge::adapters::BlackBoxVlm>("http:remote",
                                                          std::move(transport), endpoint);
  }
  throw forge::ConfigError("target", "expected toy, echo, or an http(s) url");
}

// --judge spec: "keyword" or an http(s) URL.
std::unique_ptr<forge::judge::JudgeClient> judge_from_spec(const std::string& spec,
                                                           const std::string& auth_env) {
  if (spec == "keyword") return std::make_unique<forge::judge::KeywordJudge>();
  if (is_http(spec)) {
    auto endpoint = endpoint_for(spec, auth_env);
    auto transport = std::make_shared<forge::adapters::HttpJsonTransport>(endpoint);
    return std::make_unique<forge::judge::HttpJudge>("http:judge", std::move(transport),
                                                     endpoint);
  }
  throw forge::ConfigError("judge", "expected keyword or an http(s) url");
}

// --rewriter spec: "identity", "preamble:<text>", or an http(s) URL.
std::unique_ptr<forge::rewrite::RewriterClient> rewriter_from_spec(
    const std::string& spec, const std::string& auth_env) {
  if (spec == "identity") return std::make_unique<forge::rewrite::IdentityRewriter>();
  if (spec.rfind("preamble:", 0) == 0) {
    std::string preamble = spec.substr(9);
    return std::make_unique<forge::rewrite::ScriptedRewriter>(
        "mock:preamble",
        [preamble](const std::string&, const std::string& original) {
          return preamble.empty() ? original : preamble + " " + original;
        });
  }
  if (is_http(spec)) {
    auto endpoint = endpoint_for(spec, auth_env);
    auto transport = std::make_shared<forge::adapters::HttpJsonTransport>(endpoint);
    return std::make_unique<forge::rewrite::HttpRewriter>("http:rewriter",
                                                          std::move(transport), endpoint);
  }
  throw forge::ConfigError("rewriter", "expected identity, preamble:<text>, or an http(s) url");
}

forge::rewrite::RewriteTemplate load_template(const std::string& path) {
  auto tmpl = path.empty() ? forge::rewrite::default_template()
                           : forge::rewrite::RewriteTemplate::load(path);
  tmpl.validate();
  return tmpl;
}

void ensure_parent(const std::filesystem::path& path) {
  auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_or_print(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  ensure_parent(out_path);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw forge::IoError("cannot write " + out_path);
  out << text;
}

forge::eval::ReportFormat parse_format(const std::string& format) {
  if (format == "table") return forge::eval::ReportFormat::kTable;
  if (format == "json") return forge::eval::ReportFormat::kJson;
  throw forge::ConfigError("format", "expected table or json");
}

int dispatch(int argc, char** argv) {
  CLI::App app{"forge: red-team evaluation pipeline for vision-language models"};
  app.require_subcommand(1);

  // ---- optimize-visual ----
  auto* ov = app.add_subcommand("optimize-visual",
                                "Optimize a universal adversarial image against the toy model");
  struct {
    std::string image, corpus, out = "adv.png";
    double eps = 32.0 / 255.0, step_size = 0.0;
    int steps = 5000;
    std::uint64_t seed = 0, weight_seed = 0;
    ImageShape shape;
  } ov_opt;
  ov->add_option("--image", ov_opt.image, "Clean PNG (omit to synthesize)");
  ov->add_option("--corpus", ov_opt.corpus, "Target sentence file, one per line");
  ov->add_option("--eps", ov_opt.eps, "Linf budget in [0,1]");
  ov->add_option("--steps", ov_opt.steps, "PGD steps");
  ov->add_option("--step-size", ov_opt.step_size, "PGD step size (0 = eps/8)");
  ov->add_option("--seed", ov_opt.seed, "Optimization seed");
  ov->add_option("--weight-seed", ov_opt.weight_seed, "Toy model weight seed");
  ov->add_option("--height", ov_opt.shape.height, "Synthesized image height");
  ov->add_option("--width", ov_opt.shape.width, "Synthesized image width");
  ov->add_option("--channels", ov_opt.shape.channels, "Synthesized image channels");
  ov->add_option("--out", ov_opt.out, "Output PNG path");
  ov->callback([&]() {
    auto corpus = load_corpus(ov_opt.corpus);
    auto clean = load_or_synthesize_image(ov_opt.image, ov_opt.shape, ov_opt.seed);
    ImageShape shape{clean.height, clean.width, clean.channels};
    auto model = model_from_spec("toy", corpus, shape, ov_opt.weight_seed, "");
    auto& white_box = forge::adapters::require_white_box(*model);
    forge::visual::PerturbationBudget budget;
    budget.epsilon = ov_opt.eps;
    budget.steps = ov_opt.steps;
    budget.step_size = ov_opt.step_size;
    budget.seed = ov_opt.seed;
    auto adv = forge::visual::quantize_and_verify(
        forge::visual::pgd_ascent(white_box, clean, corpus, budget));
    ensure_parent(ov_opt.out);
    forge::visual::save_adversarial(adv, ov_opt.out);
    ordered_json summary{{"out", ov_opt.out},
                         {"initial_objective", adv.objective_trace.front().objective},
                         {"final_objective", adv.final_objective},
                         {"steps", ov_opt.steps}};
    std::cout << summary.dump(2) << "\n";
  });

  // ---- rewrite ----
  auto* rw = app.add_subcommand("rewrite", "Rewrite prompts through the defensive template");
  struct {
    std::string prompt, dataset, dataset_id = "custom", text_column, tmpl;
    std::string rewriter = "identity", auth_env, out;
  } rw_opt;
  rw->add_option("--prompt", rw_opt.prompt, "Single prompt to rewrite");
  rw->add_option("--dataset", rw_opt.dataset, "Prompt dataset (csv/tsv/json/jsonl)");
  rw->add_option("--dataset-id", rw_opt.dataset_id, "Dataset identifier");
  rw->add_option("--text-column", rw_opt.text_column, "Prompt column name");
  rw->add_option("--template", rw_opt.tmpl, "Template file (omit for built-in)");
  rw->add_option("--rewriter", rw_opt.rewriter, "identity | preamble:<text> | http(s) url");
  rw->add_option("--auth-env", rw_opt.auth_env, "Env var holding the bearer token");
  rw->add_option("--out", rw_opt.out, "Output jsonl ('-' or empty for stdout)");
  rw->callback([&]() {
    if (rw_opt.prompt.empty() && rw_opt.dataset.empty()) {
      throw forge::ConfigError("prompt", "need --prompt or --dataset");
    }
    auto tmpl = load_template(rw_opt.tmpl);
    auto rewriter = rewriter_from_spec(rw_opt.rewriter, rw_opt.auth_env);
    std::vector<std::pair<std::string, std::string>> rows;  // id, text
    if (!rw_opt.prompt.empty()) {
      rows.emplace_back("prompt-0", rw_opt.prompt);
    } else {
      auto ds = forge::eval::load_dataset(rw_opt.dataset, rw_opt.dataset_id,
                                          rw_opt.text_column);
      for (const auto& p : ds.prompts) rows.emplace_back(p.id, p.text);
    }
    std::string lines;
    for (const auto& [id, text] : rows) {
      auto rp = forge::rewrite::rewrite(text, tmpl, *rewriter);
      ordered_json j{{"id", id},
                     {"original", rp.original},
                     {"rewritten", rp.rewritten},
                     {"template_id", rp.template_id},
                     {"rewriter_id", rp.rewriter_id},
                     {"rationale", rp.rationale}};
      lines += j.dump() + "\n";
    }
    write_or_print(rw_opt.out, lines);
  });

  // ---- train-suffix ----
  auto* ts = app.add_subcommand("train-suffix", "Reinforcement fine-tune the suffix policy");
  struct {
    std::string prompts, dataset_id = "custom", text_column;
    std::string target = "toy", judge = "keyword", config, image, out;
    std::string auth_env;
    std::uint64_t seed = 0, weight_seed = 0;
    ImageShape shape;
  } ts_opt;
  ts->add_option("--prompts", ts_opt.prompts, "Training prompt dataset")->required();
  ts->add_option("--dataset-id", ts_opt.dataset_id, "Dataset identifier");
  ts->add_option("--text-column", ts_opt.text_column, "Prompt column name");
  ts->add_option("--target", ts_opt.target, "toy | echo | http(s) url");
  ts->add_option("--judge", ts_opt.judge, "keyword | http(s) url");
  ts->add_option("--config", ts_opt.config, "Training config json (rft fields)");
  ts->add_option("--image", ts_opt.image, "Rollout image PNG (omit to synthesize)");
  ts->add_option("--seed", ts_opt.seed, "Policy init seed");
  ts->add_option("--weight-seed", ts_opt.weight_seed, "Toy target weight seed");
  ts->add_option("--auth-env", ts_opt.auth_env, "Env var holding the bearer token");
  ts->add_option("--out", ts_opt.out, "Checkpoint directory")->required();
  ts->callback([&]() {
    auto ds = forge::eval::load_dataset(ts_opt.prompts, ts_opt.dataset_id,
                                        ts_opt.text_column);
    std::vector<forge::rewrite::RewrittenPrompt> prompts;
    for (const auto& p : ds.prompts) prompts.push_back({p.text, p.text, "", "identity", ""});

    forge::suffix::RftConfig rft;
    if (!ts_opt.config.empty()) {
      std::ifstream in(ts_opt.config);
      if (!in) throw forge::ConfigError("config", "cannot open " + ts_opt.config);
      nlohmann::json doc;
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw forge::ConfigError("config", std::string("invalid json: ") + e.what());
      }
      rft = forge::cli::validate_config(nlohmann::json{{"rft", doc}}).rft;
    }
    if (rft.seed == 0) rft.seed = ts_opt.seed;

    auto corpus = forge::Corpus::default_affirmative();
    auto image = load_or_synthesize_image(ts_opt.image, ts_opt.shape, ts_opt.seed);
    ImageShape shape{image.height, image.width, image.channels};
    auto model = model_from_spec(ts_opt.target, corpus, shape, ts_opt.weight_seed,
                                 ts_opt.auth_env);
    auto judge = judge_from_spec(ts_opt.judge, ts_opt.auth_env);

    auto sp = forge::suffix::SuffixPolicy::fresh(ts_opt.seed);
    std::filesystem::path out_dir = ts_opt.out;
    auto trace = forge::suffix::rft_train(sp, prompts, *model, *judge, rft, &image,
                                          &out_dir);
    ordered_json summary{{"checkpoint", ts_opt.out},
                         {"checkpoint_id", sp.checkpoint_id},
                         {"epochs", trace.epochs.size()},
                         {"final_mean_reward",
                          trace.epochs.empty() ? 0.0 : trace.epochs.back().mean_reward},
                         {"final_mean_kl",
                          trace.epochs.empty() ? 0.0 : trace.epochs.back().mean_kl}};
    std::cout << summary.dump(2) << "\n";
  });

  // ---- gen-suffix ----
  auto* gs = app.add_subcommand("gen-suffix", "Generate a suffix from a trained checkpoint");
  struct {
    std::string checkpoint, prompt;
    std::uint64_t seed = 0;
    double temperature = 1.0;
    bool sample = false;
  } gs_opt;
  gs->add_option("--checkpoint", gs_opt.checkpoint, "Checkpoint directory")->required();
  gs->add_option("--prompt", gs_opt.prompt, "Prompt to condition on")->required();
  gs->add_option("--seed", gs_opt.seed, "Sampling seed");
  gs->add_option("--temperature", gs_opt.temperature, "Sampling temperature");
  gs->add_flag("--sample", gs_opt.sample, "Sample instead of greedy decode");
  gs->callback([&]() {
    auto sp = forge::suffix::SuffixPolicy::load(gs_opt.checkpoint);
    forge::adapters::DecodeParams params;
    params.greedy = !gs_opt.sample;
    params.temperature = gs_opt.temperature;
    params.seed = gs_opt.seed;
    auto suffix = forge::suffix::generate_suffix(sp, gs_opt.prompt, params);
    ordered_json j{{"prompt", gs_opt.prompt},
                   {"suffix", suffix.text},
                   {"tokens", suffix.tokens},
                   {"final_prompt", forge::suffix::concat_suffix(gs_opt.prompt, suffix.text)}};
    std::cout << j.dump(2) << "\n";
  });

  // ---- attack ----
  auto* at = app.add_subcommand("attack", "Run the single-shot attack over a dataset");
  struct {
    std::string dataset, dataset_id = "custom", text_column;
    std::string target = "toy", judge = "keyword", auth_env;
    std::string image, adv, tmpl, rewriter = "identity", checkpoint;
    std::string out = "records.jsonl";
    bool visual = false, textual = false, suffix = false;
    double failure_tolerance = 0.0;
    int max_new_tokens = 32;
    std::uint64_t seed = 0, weight_seed = 0;
    ImageShape shape;
  } at_opt;
  at->add_option("--dataset", at_opt.dataset, "Prompt dataset")->required();
  at->add_option("--dataset-id", at_opt.dataset_id, "Dataset identifier");
  at->add_option("--text-column", at_opt.text_column, "Prompt column name");
  at->add_option("--target", at_opt.target, "toy | echo | http(s) url");
  at->add_option("--judge", at_opt.judge, "keyword | http(s) url");
  at->add_option("--auth-env", at_opt.auth_env, "Env var holding the bearer token");
  at->add_option("--image", at_opt.image, "Clean PNG (omit to synthesize)");
  at->add_option("--adv", at_opt.adv, "Adversarial PNG from optimize-visual");
  at->add_option("--template", at_opt.tmpl, "Template file (omit for built-in)");
  at->add_option("--rewriter", at_opt.rewriter, "identity | preamble:<text> | http(s) url");
  at->add_option("--checkpoint", at_opt.checkpoint, "Suffix checkpoint directory");
  at->add_flag("--visual", at_opt.visual, "Use the adversarial image (needs --adv)");
  at->add_flag("--textual", at_opt.textual, "Rewrite prompts through the template");
  at->add_flag("--suffix", at_opt.suffix, "Append generated suffixes (needs --checkpoint)");
  at->add_option("--failure-tolerance", at_opt.failure_tolerance,
                 "Allowed transport failure fraction");
  at->add_option("--max-new-tokens", at_opt.max_new_tokens, "Decode length");
  at->add_option("--seed", at_opt.seed, "Run seed");
  at->add_option("--weight-seed", at_opt.weight_seed, "Toy target weight seed");
  at->add_option("--out", at_opt.out, "Records jsonl path");
  at->callback([&]() {
    auto ds = forge::eval::load_dataset(at_opt.dataset, at_opt.dataset_id,
                                        at_opt.text_column);
    auto corpus = forge::Corpus::default_affirmative();
    auto clean = load_or_synthesize_image(at_opt.image, at_opt.shape, at_opt.seed);
    ImageShape shape{clean.height, clean.width, clean.channels};
    auto model = model_from_spec(at_opt.target, corpus, shape, at_opt.weight_seed,
                                 at_opt.auth_env);
    auto judge = judge_from_spec(at_opt.judge, at_opt.auth_env);

    forge::eval::ComponentFlags flags{at_opt.visual, at_opt.textual, at_opt.suffix};
    forge::eval::AttackArtifacts art;
    art.clean_image = clean;

    std::optional<forge::visual::AdversarialImage> adv;
    if (at_opt.visual) {
      if (at_opt.adv.empty()) throw forge::ConfigError("adv", "--visual needs --adv");
      adv = forge::visual::load_adversarial(at_opt.adv);
      art.adversarial = &*adv;
    }
    auto tmpl = load_template(at_opt.tmpl);
    auto rewriter = rewriter_from_spec(at_opt.rewriter, at_opt.auth_env);
    if (at_opt.textual) {
      art.prompt_template = &tmpl;
      art.rewriter = rewriter.get();
    }
    std::optional<forge::suffix::SuffixPolicy> sp;
    if (at_opt.suffix) {
      if (at_opt.checkpoint.empty()) {
        throw forge::ConfigError("checkpoint", "--suffix needs --checkpoint");
      }
      sp = forge::suffix::SuffixPolicy::load(at_opt.checkpoint);
      art.policy = &*sp;
    }

    std::filesystem::path records = at_opt.out;
    ensure_parent(records);
    std::error_code ec;
    std::filesystem::remove(records, ec);
    forge::eval::RunOptions opt;
    opt.seed = at_opt.seed;
    opt.failure_tolerance = at_opt.failure_tolerance;
    opt.records_path = records;
    opt.decode.max_new_tokens = at_opt.max_new_tokens;
    forge::eval::LogicalClock clock;
    opt.clock = &clock;
    auto recs = forge::eval::run_attack(ds, *model, flags, art, *judge, opt);
    auto report = forge::eval::compute_asr(recs);
    std::cout << forge::eval::emit_report({report}, forge::eval::ReportFormat::kTable);
  });

  // ---- asr ----
  auto* as = app.add_subcommand("asr", "Compute the attack success rate from records");
  struct {
    std::string records, format = "table";
  } as_opt;
  as->add_option("--records", as_opt.records, "Records jsonl")->required();
  as->add_option("--format", as_opt.format, "table | json");
  as->callback([&]() {
    auto recs = forge::eval::read_records_jsonl(as_opt.records);
    auto report = forge::eval::compute_asr(recs);
    std::cout << forge::eval::emit_report({report}, parse_format(as_opt.format));
  });

  // ---- ablate ----
  auto* ab = app.add_subcommand("ablate", "Run the component ablation grid");
  struct {
    std::string dataset, dataset_id = "custom", text_column;
    std::string target = "toy", judge = "keyword", auth_env;
    std::string image, adv, tmpl, rewriter = "identity", checkpoint;
    std::string records_dir, format = "table";
    double failure_tolerance = 0.0;
    int max_new_tokens = 32;
    std::uint64_t seed = 0, weight_seed = 0;
    ImageShape shape;
  } ab_opt;
  ab->add_option("--dataset", ab_opt.dataset, "Prompt dataset")->required();
  ab->add_option("--dataset-id", ab_opt.dataset_id, "Dataset identifier");
  ab->add_option("--text-column", ab_opt.text_column, "Prompt column name");
  ab->add_option("--target", ab_opt.target, "toy | echo | http(s) url");
  ab->add_option("--judge", ab_opt.judge, "keyword | http(s) url");
  ab->add_option("--auth-env", ab_opt.auth_env, "Env var holding the bearer token");
  ab->add_option("--image", ab_opt.image, "Clean PNG (omit to synthesize)");
  ab->add_option("--adv", ab_opt.adv, "Adversarial PNG")->required();
  ab->add_option("--template", ab_opt.tmpl, "Template file (omit for built-in)");
  ab->add_option("--rewriter", ab_opt.rewriter, "identity | preamble:<text> | http(s) url");
  ab->add_option("--checkpoint", ab_opt.checkpoint, "Suffix checkpoint directory")->required();
  ab->add_option("--records-dir", ab_opt.records_dir, "Directory for per-subset records");
  ab->add_option("--format", ab_opt.format, "table | json");
  ab->add_option("--failure-tolerance", ab_opt.failure_tolerance,
                 "Allowed transport failure fraction");
  ab->add_option("--max-new-tokens", ab_opt.max_new_tokens, "Decode length");
  ab->add_option("--seed", ab_opt.seed, "Run seed");
  ab->add_option("--weight-seed", ab_opt.weight_seed, "Toy target weight seed");
  ab->callback([&]() {
    auto ds = forge::eval::load_dataset(ab_opt.dataset, ab_opt.dataset_id,
                                        ab_opt.text_column);
    auto corpus = forge::Corpus::default_affirmative();
    auto clean = load_or_synthesize_image(ab_opt.image, ab_opt.shape, ab_opt.seed);
    ImageShape shape{clean.height, clean.width, clean.channels};
    auto model = model_from_spec(ab_opt.target, corpus, shape, ab_opt.weight_seed,
                                 ab_opt.auth_env);
    auto judge = judge_from_spec(ab_opt.judge, ab_opt.auth_env);
    auto adv = forge::visual::load_adversarial(ab_opt.adv);
    auto tmpl = load_template(ab_opt.tmpl);
    auto rewriter = rewriter_from_spec(ab_opt.rewriter, ab_opt.auth_env);
    auto sp = forge::suffix::SuffixPolicy::load(ab_opt.checkpoint);

    forge::eval::AttackArtifacts art;
    art.clean_image = clean;
    art.adversarial = &adv;
    art.prompt_template = &tmpl;
    art.rewriter = rewriter.get();
    art.policy = &sp;

    forge::eval::RunOptions opt;
    opt.seed = ab_opt.seed;
    opt.failure_tolerance = ab_opt.failure_tolerance;
    opt.decode.max_new_tokens = ab_opt.max_new_tokens;
    forge::eval::LogicalClock clock;
    opt.clock = &clock;

    std::optional<std::filesystem::path> records_dir;
    if (!ab_opt.records_dir.empty()) {
      records_dir = ab_opt.records_dir;
      std::filesystem::create_directories(*records_dir);
    }
    auto reports = forge::eval::run_ablation(
        ds, *model, art, *judge, opt, forge::eval::default_ablation_subsets(),
        records_dir ? &*records_dir : nullptr);
    std::cout << forge::eval::emit_report(reports, parse_format(ab_opt.format));
  });

  // ---- report ----
  auto* rp = app.add_subcommand("report", "Re-render a saved report");
  struct {
    std::string in, format = "table";
  } rp_opt;
  rp->add_option("--in", rp_opt.in, "Report json produced by asr/ablate")->required();
  rp->add_option("--format", rp_opt.format, "table | json");
  rp->callback([&]() {
    std::ifstream in(rp_opt.in);
    if (!in) throw forge::IoError("cannot read " + rp_opt.in);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw forge::IoError(std::string("invalid report json: ") + e.what());
    }
    auto reports = forge::eval::reports_from_json(doc);
    std::cout << forge::eval::emit_report(reports, parse_format(rp_opt.format));
  });

  // ---- pipeline ----
  auto* pl = app.add_subcommand("pipeline", "Run the full end-to-end pipeline");
  struct {
    std::string config, out;
  } pl_opt;
  pl->add_option("--config", pl_opt.config, "Run config json")->required();
  pl->add_option("--out", pl_opt.out, "Run directory (overrides config out_dir)");
  pl->callback([&]() {
    auto config = forge::cli::load_config(pl_opt.config);
    if (!pl_opt.out.empty()) config.out_dir = pl_opt.out;
    auto result = forge::cli::run_pipeline(config);
    ordered_json stage_summaries = ordered_json::array();
    for (const auto& s : result.stages) {
      stage_summaries.push_back({{"name", s.name},
                                 {"status", s.status},
                                 {"reused", s.reused},
                                 {"outputs", s.outputs.size()}});
    }
    ordered_json j{{"out_dir", result.out_dir.string()},
                   {"config_hash", result.config_hash},
                   {"manifest_hash", result.manifest_hash},
                   {"stages", stage_summaries}};
    std::cout << j.dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const forge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const forge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
