#include "forge/suffix_policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "forge/errors.hpp"
#include "forge/rng.hpp"
#include "forge/sha256.hpp"

namespace forge::suffix {

namespace {

constexpr double kMask = -1e30;

std::vector<double> log_softmax(std::vector<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (double& v : logits) v -= lse;
  return logits;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

TinyPolicy::TinyPolicy(WordTokenizer vocab, int suffix_length)
    : vocab_(std::move(vocab)), suffix_len_(suffix_length) {
  if (suffix_len_ < 1) throw ConfigError("policy.suffix_length", "must be >= 1");
  if (vocab_.vocab_size() <= WordTokenizer::kUnk + 1) {
    throw ConfigError("policy.vocab", "needs at least one non-special word");
  }
  compute_offsets();
}

TinyPolicy::TinyPolicy(WordTokenizer vocab, int suffix_length, std::uint64_t seed)
    : TinyPolicy(std::move(vocab), suffix_length) {
  Rng rng(mix64(seed ^ 0x7375666679ULL));
  const auto fill = [&](std::size_t off, std::size_t count, double scale) {
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = scale * rng.normal();
  };
  const std::size_t V = static_cast<std::size_t>(vocab_.vocab_size());
  const std::size_t d = static_cast<std::size_t>(d_);
  const std::size_t T = static_cast<std::size_t>(suffix_len_);
  fill(off_embed_, V * d, 0.1);
  fill(off_w1_, d * d, 0.1);
  fill(off_w2_, d * d, 0.1);
  fill(off_pos_, T * d, 0.1);
  fill(off_w3_, V * d, 0.1);
  // b1 and b3 stay zero
}

TinyPolicy TinyPolicy::zeroed(WordTokenizer vocab, int suffix_length) {
  return TinyPolicy(std::move(vocab), suffix_length);
}

void TinyPolicy::compute_offsets() {
  const std::size_t V = static_cast<std::size_t>(vocab_.vocab_size());
  const std::size_t d = static_cast<std::size_t>(d_);
  const std::size_t T = static_cast<std::size_t>(suffix_len_);
  off_embed_ = 0;
  off_w1_ = off_embed_ + V * d;
  off_w2_ = off_w1_ + d * d;
  off_pos_ = off_w2_ + d * d;
  off_b1_ = off_pos_ + T * d;
  off_w3_ = off_b1_ + d;
  off_b3_ = off_w3_ + V * d;
  params_.assign(off_b3_ + V, 0.0);
}

std::string TinyPolicy::params_hash() const { return sha256_hex(params_); }

void TinyPolicy::set_output_bias(int token_id, double value) {
  if (token_id < 0 || token_id >= vocab_.vocab_size()) {
    throw RangeError("set_output_bias: token id out of range");
  }
  params_[off_b3_ + static_cast<std::size_t>(token_id)] = value;
}

std::vector<double> TinyPolicy::context_embedding(
    const std::vector<int>& prompt_tokens) const {
  if (prompt_tokens.empty()) {
    throw TokenizationError("policy context: prompt produced no tokens");
  }
  const std::size_t d = static_cast<std::size_t>(d_);
  std::vector<double> c(d, 0.0);
  for (int tok : prompt_tokens) {
    if (tok < 0 || tok >= vocab_.vocab_size()) {
      throw TokenizationError("policy context: token id out of range");
    }
    const std::size_t base = off_embed_ + static_cast<std::size_t>(tok) * d;
    for (std::size_t k = 0; k < d; ++k) c[k] += params_[base + k];
  }
  const double inv = 1.0 / static_cast<double>(prompt_tokens.size());
  for (double& v : c) v *= inv;
  return c;
}

std::vector<double> TinyPolicy::step_logits(const std::vector<double>& context, int prev,
                                            int position) const {
  if (prev < 0 || prev >= vocab_.vocab_size()) {
    throw RangeError("step_logits: prev token out of range");
  }
  if (position < 0 || position >= suffix_len_) {
    throw RangeError("step_logits: position out of range");
  }
  const std::size_t d = static_cast<std::size_t>(d_);
  const std::size_t V = static_cast<std::size_t>(vocab_.vocab_size());
  const std::size_t eprev = off_embed_ + static_cast<std::size_t>(prev) * d;
  const std::size_t prow = off_pos_ + static_cast<std::size_t>(position) * d;

  std::vector<double> h(d);
  for (std::size_t j = 0; j < d; ++j) {
    double z = params_[off_b1_ + j] + params_[prow + j];
    const std::size_t w1row = off_w1_ + j * d;
    const std::size_t w2row = off_w2_ + j * d;
    for (std::size_t k = 0; k < d; ++k) {
      z += params_[w1row + k] * params_[eprev + k] + params_[w2row + k] * context[k];
    }
    h[j] = std::tanh(z);
  }

  std::vector<double> logits(V);
  for (std::size_t v = 0; v < V; ++v) {
    double s = params_[off_b3_ + v];
    const std::size_t w3row = off_w3_ + v * d;
    for (std::size_t j = 0; j < d; ++j) s += params_[w3row + j] * h[j];
    logits[v] = s;
  }
  logits[WordTokenizer::kBos] = kMask;
  logits[WordTokenizer::kEos] = kMask;
  logits[WordTokenizer::kUnk] = kMask;
  return logits;
}

std::vector<double> TinyPolicy::step_log_probs(const std::vector<double>& context,
                                               int prev, int position) const {
  return log_softmax(step_logits(context, prev, position));
}

double TinyPolicy::action_log_prob(const std::vector<double>& context, int prev,
                                   int position, int action) const {
  if (action < 0 || action >= vocab_.vocab_size()) {
    throw RangeError("action_log_prob: action out of range");
  }
  return step_log_probs(context, prev, position)[static_cast<std::size_t>(action)];
}

void TinyPolicy::accumulate_grad(const std::vector<double>& context,
                                 const std::vector<int>& prompt_tokens, int prev,
                                 int position, int action, double coeff,
                                 std::vector<double>& grad) const {
  if (grad.size() != params_.size()) {
    throw ShapeError("accumulate_grad: gradient buffer size mismatch");
  }
  const std::size_t d = static_cast<std::size_t>(d_);
  const std::size_t V = static_cast<std::size_t>(vocab_.vocab_size());
  const std::size_t eprev = off_embed_ + static_cast<std::size_t>(prev) * d;
  const std::size_t prow = off_pos_ + static_cast<std::size_t>(position) * d;

  // forward pass, keeping h
  std::vector<double> h(d);
  for (std::size_t j = 0; j < d; ++j) {
    double z = params_[off_b1_ + j] + params_[prow + j];
    const std::size_t w1row = off_w1_ + j * d;
    const std::size_t w2row = off_w2_ + j * d;
    for (std::size_t k = 0; k < d; ++k) {
      z += params_[w1row + k] * params_[eprev + k] + params_[w2row + k] * context[k];
    }
    h[j] = std::tanh(z);
  }
  std::vector<double> logits(V);
  for (std::size_t v = 0; v < V; ++v) {
    double s = params_[off_b3_ + v];
    const std::size_t w3row = off_w3_ + v * d;
    for (std::size_t j = 0; j < d; ++j) s += params_[w3row + j] * h[j];
    logits[v] = s;
  }
  logits[WordTokenizer::kBos] = kMask;
  logits[WordTokenizer::kEos] = kMask;
  logits[WordTokenizer::kUnk] = kMask;
  const std::vector<double> lp = log_softmax(std::move(logits));

  // d log p(action) / d logits = onehot - softmax
  std::vector<double> dlogits(V);
  for (std::size_t v = 0; v < V; ++v) {
    const double p = std::exp(lp[v]);
    dlogits[v] = coeff * ((static_cast<int>(v) == action ? 1.0 : 0.0) - p);
  }

  std::vector<double> dh(d, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    if (dlogits[v] == 0.0) continue;
    grad[off_b3_ + v] += dlogits[v];
    const std::size_t w3row = off_w3_ + v * d;
    for (std::size_t j = 0; j < d; ++j) {
      grad[w3row + j] += dlogits[v] * h[j];
      dh[j] += params_[w3row + j] * dlogits[v];
    }
  }

  std::vector<double> dc(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double dz = dh[j] * (1.0 - h[j] * h[j]);
    if (dz == 0.0) continue;
    grad[off_b1_ + j] += dz;
    grad[prow + j] += dz;
    const std::size_t w1row = off_w1_ + j * d;
    const std::size_t w2row = off_w2_ + j * d;
    for (std::size_t k = 0; k < d; ++k) {
      grad[w1row + k] += dz * params_[eprev + k];
      grad[w2row + k] += dz * context[k];
      grad[eprev + k] += dz * params_[w1row + k];
      dc[k] += dz * params_[w2row + k];
    }
  }

  const double inv = 1.0 / static_cast<double>(prompt_tokens.size());
  for (int tok : prompt_tokens) {
    const std::size_t row = off_embed_ + static_cast<std::size_t>(tok) * d;
    for (std::size_t k = 0; k < d; ++k) grad[row + k] += dc[k] * inv;
  }
}

void TinyPolicy::write_params(std::ostream& out) const {
  const std::uint64_t n = params_.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

void TinyPolicy::read_params(std::istream& in) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n != params_.size()) {
    throw IoError("policy weights blob does not match this architecture");
  }
  in.read(reinterpret_cast<char*>(params_.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("policy weights blob truncated");
}

const std::vector<std::string>& default_policy_words() {
  static const std::vector<std::string> words{
      "please",  "kindly",  "now",      "answer",   "fully",   "details", "steps",
      "explain", "careful", "sure",     "okay",     "indeed",  "clearly", "directly",
      "complete","response","begin",    "start",    "here",    "include", "every",
      "point",   "precise", "thorough", "exact",    "plain",   "simple",  "open",
      "honest",  "direct",  "factual",  "verbose",  "rich",    "deep",    "broad",
      "total",   "whole",   "entire",   "full",     "strict",  "proper",  "true",
      "valid",   "sound",   "clean",    "clear",    "crisp",   "fresh",   "bright",
      "quick",   "fast",    "calm",     "steady",   "firm",    "bold",    "keen",
      "sharp",   "smart",   "wise",     "good",     "fine",
  };
  return words;
}

SuffixPolicy SuffixPolicy::fresh(std::uint64_t seed) {
  return fresh(WordTokenizer(default_policy_words()), 10, seed);
}

SuffixPolicy SuffixPolicy::fresh(WordTokenizer vocab, int suffix_length,
                                 std::uint64_t seed) {
  TinyPolicy policy(std::move(vocab), suffix_length, seed);
  TinyPolicy reference = policy;
  SuffixPolicy sp{std::move(policy), std::move(reference), suffix_length, ""};
  sp.checkpoint_id = sp.compute_checkpoint_id();
  return sp;
}

std::string SuffixPolicy::compute_checkpoint_id() const {
  return "ckpt-" + policy.params_hash().substr(0, 16);
}

void SuffixPolicy::save(const std::filesystem::path& dir, const nlohmann::json& config,
                        const std::string& parent_id) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  {
    std::ofstream vf(dir / "vocab.txt");
    if (!vf) throw IoError("cannot write " + (dir / "vocab.txt").string());
    const auto& words = policy.vocab().words();
    for (std::size_t i = WordTokenizer::kUnk + 1; i < words.size(); ++i) {
      vf << words[i] << '\n';
    }
  }

  {
    std::ofstream wf(dir / "weights.bin", std::ios::binary);
    if (!wf) throw IoError("cannot write " + (dir / "weights.bin").string());
    wf.write("FSFX", 4);
    write_u32(wf, 1);  // format version
    write_u32(wf, static_cast<std::uint32_t>(policy.dim()));
    write_u32(wf, static_cast<std::uint32_t>(suffix_length));
    policy.write_params(wf);
    reference.write_params(wf);
    if (!wf) throw IoError("short write to " + (dir / "weights.bin").string());
  }

  checkpoint_id = compute_checkpoint_id();
  nlohmann::ordered_json manifest{
      {"checkpoint_id", checkpoint_id},
      {"suffix_length", suffix_length},
      {"config", config},
      {"parent_id", parent_id},
  };
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw IoError("cannot write " + (dir / "manifest.json").string());
  mf << manifest.dump(2) << '\n';
}

SuffixPolicy SuffixPolicy::load(const std::filesystem::path& dir) {
  std::vector<std::string> words;
  {
    std::ifstream vf(dir / "vocab.txt");
    if (!vf) throw IoError("cannot read " + (dir / "vocab.txt").string());
    std::string line;
    while (std::getline(vf, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) words.push_back(line);
    }
  }

  std::ifstream wf(dir / "weights.bin", std::ios::binary);
  if (!wf) throw IoError("cannot read " + (dir / "weights.bin").string());
  char magic[4] = {};
  wf.read(magic, 4);
  if (std::memcmp(magic, "FSFX", 4) != 0) {
    throw IoError("bad checkpoint magic in " + (dir / "weights.bin").string());
  }
  const std::uint32_t version = read_u32(wf);
  if (version != 1) throw IoError("unsupported checkpoint version");
  const std::uint32_t d = read_u32(wf);
  const std::uint32_t suffix_length = read_u32(wf);
  if (d != TinyPolicy::kEmbedDim) throw IoError("unsupported policy embedding dim");

  TinyPolicy policy = TinyPolicy::zeroed(WordTokenizer(words), static_cast<int>(suffix_length));
  TinyPolicy reference = policy;
  policy.read_params(wf);
  reference.read_params(wf);

  SuffixPolicy sp{std::move(policy), std::move(reference),
                  static_cast<int>(suffix_length), ""};
  sp.checkpoint_id = sp.compute_checkpoint_id();

  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw IoError("cannot read " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("suffix_length", -1) != sp.suffix_length) {
    throw IoError("checkpoint manifest suffix_length disagrees with weights");
  }
  if (manifest.value("checkpoint_id", "") != sp.checkpoint_id) {
    throw IoError("checkpoint id mismatch: weights were modified after save");
  }
  return sp;
}

GeneratedSuffix generate_suffix(const SuffixPolicy& sp, const std::string& prompt,
                                const adapters::DecodeParams& params) {
  const auto prompt_tokens = sp.policy.vocab().encode(prompt, /*strict=*/false);
  if (prompt_tokens.empty()) {
    throw TokenizationError("generate_suffix: prompt produced no tokens");
  }
  const auto context = sp.policy.context_embedding(prompt_tokens);

  Rng rng(params.seed);
  GeneratedSuffix out;
  int prev = WordTokenizer::kBos;
  for (int t = 0; t < sp.suffix_length; ++t) {
    std::vector<double> logits = sp.policy.step_logits(context, prev, t);
    if (!params.greedy && params.temperature != 1.0) {
      if (!(params.temperature > 0.0)) {
        throw ConfigError("decode.temperature", "must be > 0 for sampling");
      }
      for (double& v : logits) v /= params.temperature;
    }
    const std::vector<double> lp = log_softmax(std::move(logits));

    int action;
    if (params.greedy) {
      action = static_cast<int>(
          std::max_element(lp.begin(), lp.end()) - lp.begin());
    } else {
      const double u = rng.uniform();
      double acc = 0.0;
      action = -1;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        acc += std::exp(lp[v]);
        if (u < acc) {
          action = static_cast<int>(v);
          break;
        }
      }
      if (action < 0) {  // float round-off at the tail
        action = static_cast<int>(lp.size()) - 1;
        while (action > 0 && lp[static_cast<std::size_t>(action)] <= kMask / 2) --action;
      }
    }
    out.tokens.push_back(action);
    out.logprobs.push_back(lp[static_cast<std::size_t>(action)]);
    prev = action;
  }
  out.text = sp.policy.vocab().decode(out.tokens);
  return out;
}

std::string concat_suffix(const std::string& prompt, const std::string& suffix_text) {
  const std::string suffix = trim(suffix_text);
  if (prompt.empty()) throw RangeError("concat_suffix: prompt must not be empty");
  if (suffix.empty()) throw RangeError("concat_suffix: suffix must not be empty");

  // collapse internal whitespace runs in the suffix
  std::istringstream iss(suffix);
  std::string word, joined;
  while (iss >> word) {
    if (!joined.empty()) joined += ' ';
    joined += word;
  }
  return prompt + " " + joined;
}

std::string concat_suffix(const std::string& prompt, const std::vector<int>& suffix,
                          const WordTokenizer& vocab) {
  if (suffix.empty()) throw RangeError("concat_suffix: suffix must not be empty");
  return concat_suffix(prompt, vocab.decode(suffix));
}

double kl_divergence(std::span<const double> policy_logprobs,
                     std::span<const double> ref_logprobs) {
  if (policy_logprobs.size() != ref_logprobs.size()) {
    throw ShapeError("kl_divergence: log-prob sequences have different lengths");
  }
  if (policy_logprobs.empty()) {
    throw ShapeError("kl_divergence: empty log-prob sequences");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < policy_logprobs.size(); ++i) {
    sum += policy_logprobs[i] - ref_logprobs[i];
  }
  return sum / static_cast<double>(policy_logprobs.size());
}

}  // namespace forge::suffix
