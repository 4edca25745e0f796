#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/adapters.hpp"
#include "forge/tokenizer.hpp"

namespace forge::suffix {

// A tiny two-layer causal policy over a small word vocabulary. Hidden state
// for position t given previous token u and prompt context c:
//   h = tanh(W1 E[u] + W2 c + P[t] + b1),  logits = W3 h + b3
// where c is the mean embedding of the prompt tokens. Special tokens are
// masked out of the output distribution, so samples are always real words.
class TinyPolicy {
 public:
  static constexpr int kEmbedDim = 32;

  TinyPolicy(WordTokenizer vocab, int suffix_length, std::uint64_t seed);
  static TinyPolicy zeroed(WordTokenizer vocab, int suffix_length);

  int vocab_size() const { return vocab_.vocab_size(); }
  int dim() const { return d_; }
  int suffix_length() const { return suffix_len_; }
  const WordTokenizer& vocab() const { return vocab_; }

  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  std::string params_hash() const;

  // Writes into b3; with zeroed weights the output distribution is exactly
  // softmax(b3), which makes hand-built categorical policies easy.
  void set_output_bias(int token_id, double value);

  std::vector<double> context_embedding(const std::vector<int>& prompt_tokens) const;
  // Masked logits for one step. prev is the previously emitted token
  // (<bos> at position 0).
  std::vector<double> step_logits(const std::vector<double>& context, int prev,
                                  int position) const;
  std::vector<double> step_log_probs(const std::vector<double>& context, int prev,
                                     int position) const;
  double action_log_prob(const std::vector<double>& context, int prev, int position,
                         int action) const;

  // Adds coeff * d(log pi(action | state))/d(theta) into grad, which must
  // have params().size() entries.
  void accumulate_grad(const std::vector<double>& context,
                       const std::vector<int>& prompt_tokens, int prev, int position,
                       int action, double coeff, std::vector<double>& grad) const;

  void write_params(std::ostream& out) const;
  void read_params(std::istream& in);

 private:
  TinyPolicy(WordTokenizer vocab, int suffix_length);

  WordTokenizer vocab_;
  int d_ = kEmbedDim;
  int suffix_len_ = 10;
  std::vector<double> params_;

  // flat layout offsets
  std::size_t off_embed_, off_w1_, off_w2_, off_pos_, off_b1_, off_w3_, off_b3_;
  void compute_offsets();
};

// Default 61-word vocabulary; with the three specials this is a 64-token
// policy alphabet.
const std::vector<std::string>& default_policy_words();

// Policy plus its frozen reference copy. The reference is created once (at
// fresh()) and must never change afterwards; training verifies its hash.
struct SuffixPolicy {
  TinyPolicy policy;
  TinyPolicy reference;
  int suffix_length = 10;
  std::string checkpoint_id;

  static SuffixPolicy fresh(std::uint64_t seed);
  static SuffixPolicy fresh(WordTokenizer vocab, int suffix_length,
                            std::uint64_t seed);

  // Checkpoint directory: weights.bin (policy + reference), vocab.txt,
  // manifest.json {checkpoint_id, suffix_length, config, parent_id}.
  void save(const std::filesystem::path& dir, const nlohmann::json& config,
            const std::string& parent_id);
  static SuffixPolicy load(const std::filesystem::path& dir);

  std::string compute_checkpoint_id() const;
};

struct GeneratedSuffix {
  std::vector<int> tokens;       // exactly suffix_length entries
  std::vector<double> logprobs;  // log pi(token | state), same length
  std::string text;              // detokenized words
};

// Samples (or greedily decodes) a fixed-length suffix. Deterministic for a
// given (prompt, params.seed) pair.
GeneratedSuffix generate_suffix(const SuffixPolicy& sp, const std::string& prompt,
                                const adapters::DecodeParams& params);

// "prompt" + single space + detokenized suffix; both sides trimmed, never
// produces doubled spaces.
std::string concat_suffix(const std::string& prompt, const std::string& suffix_text);
std::string concat_suffix(const std::string& prompt, const std::vector<int>& suffix,
                          const WordTokenizer& vocab);

// Sampled-token KL estimator: mean of (log pi - log pi_ref) over aligned
// positions. Zero for identical sequences; ShapeError on length mismatch.
double kl_divergence(std::span<const double> policy_logprobs,
                     std::span<const double> ref_logprobs);

}  // namespace forge::suffix
