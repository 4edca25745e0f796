#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/image.hpp"
#include "forge/tokenizer.hpp"

namespace forge::adapters {

struct DecodeParams {
  bool greedy = true;  // greedy by default so tests reproduce
  double temperature = 1.0;
  int max_new_tokens = 32;
  std::uint64_t seed = 0;
};

// Black-box chat surface: image + text in, response text out. Sessions are
// single-threaded; run one session per worker.
class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string model_id() const = 0;
  virtual std::string generate(const ImageBuffer& image, const std::string& text,
                               const DecodeParams& params) = 0;
};

// White-box surface: adds token log-likelihoods and pixel gradients.
class WhiteBoxVlm : public ChatModel {
 public:
  virtual int vocab_size() const = 0;
  virtual const WordTokenizer& tokenizer() const = 0;

  // Sum over t of log p(token_t | image, tokens_<t); always <= 0.
  virtual double log_likelihood(const ImageBuffer& image,
                                const std::vector<int>& text_tokens) const = 0;

  // Strict tokenization followed by log_likelihood.
  double log_likelihood_text(const ImageBuffer& image, const std::string& text) const;

  // Gradient of the summed log-likelihood of all texts w.r.t. image pixels.
  // Result has the image's shape; entries are finite.
  virtual ImageBuffer grad_wrt_image(const ImageBuffer& image,
                                     const std::vector<std::vector<int>>& texts) const = 0;
};

// Capability gate: raises CapabilityError when the adapter has no gradient
// surface. Never downgrades silently.
WhiteBoxVlm& require_white_box(ChatModel& model);

double corpus_log_likelihood(const WhiteBoxVlm& model, const ImageBuffer& image,
                             const Corpus& corpus);
ImageBuffer corpus_grad(const WhiteBoxVlm& model, const ImageBuffer& image,
                        const Corpus& corpus);

// Mock chat model for offline tests and the deterministic pipeline stack.
// kFixed cycles through scripted responses; kEcho returns the text input.
class ScriptedChatModel final : public ChatModel {
 public:
  enum class Mode { kFixed, kEcho };

  explicit ScriptedChatModel(std::vector<std::string> responses,
                             std::string model_id = "mock:scripted");
  static ScriptedChatModel echo(std::string model_id = "mock:echo");

  std::string model_id() const override { return model_id_; }
  std::string generate(const ImageBuffer& image, const std::string& text,
                       const DecodeParams& params) override;

  int calls() const { return calls_; }

 private:
  ScriptedChatModel(Mode mode, std::string model_id);

  Mode mode_;
  std::string model_id_;
  std::vector<std::string> responses_;
  int calls_ = 0;
};

// Decorator that counts calls without altering behavior. Because it only
// implements the black-box surface, a run that completes through it can not
// have touched gradients.
class CountingChatModel final : public ChatModel {
 public:
  explicit CountingChatModel(ChatModel& inner) : inner_(inner) {}

  std::string model_id() const override { return inner_.model_id(); }
  std::string generate(const ImageBuffer& image, const std::string& text,
                       const DecodeParams& params) override {
    ++generate_calls_;
    return inner_.generate(image, text, params);
  }

  int generate_calls() const { return generate_calls_; }

 private:
  ChatModel& inner_;
  int generate_calls_ = 0;
};

}  // namespace forge::adapters
