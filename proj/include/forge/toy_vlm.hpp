#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forge/adapters.hpp"

namespace forge::adapters {

// Desk-scale differentiable surrogate: a linear vision encoder feeding a
// small recurrent language head. A few thousand parameters, double
// precision throughout, gradients by exact backprop, so every number it
// produces can be re-derived by hand or by finite differences.
//
//   v    = W_vision * flatten(x) + b_vision
//   h_0  = tanh(W_init * v + b_init)
//   h_t  = tanh(W_rec * h_{t-1} + embed[token_t] + W_ctx * v + b_rec)
//   p(token | state h) = softmax(W_out * h + b_out)
//
// Scoring consumes <bos> then the text tokens; generation additionally
// consumes a lossy-tokenized prompt before decoding.
class ToyVlm final : public WhiteBoxVlm {
 public:
  struct Shape {
    int height = 8;
    int width = 8;
    int channels = 3;
    int embed_dim = 16;
  };

  struct Weights {
    std::vector<double> w_vision;  // [d x D]
    std::vector<double> b_vision;  // [d]
    std::vector<double> w_init;    // [d x d]
    std::vector<double> b_init;    // [d]
    std::vector<double> embed;     // [V x d]
    std::vector<double> w_rec;     // [d x d]
    std::vector<double> w_ctx;     // [d x d]
    std::vector<double> b_rec;     // [d]
    std::vector<double> w_out;     // [V x d]
    std::vector<double> b_out;     // [V]
  };

  ToyVlm(Shape shape, const std::vector<std::string>& vocabulary_words,
         std::uint64_t weight_seed, std::string id = "");

  // All-zero weights: every token uniformly likely regardless of the image.
  static ToyVlm uniform(Shape shape, const std::vector<std::string>& vocabulary_words);

  // Default build: vocabulary covering the corpus plus common response words.
  static ToyVlm with_default_vocab(Shape shape, const Corpus& corpus,
                                   std::uint64_t weight_seed);

  // ChatModel
  std::string model_id() const override { return id_; }
  std::string generate(const ImageBuffer& image, const std::string& text,
                       const DecodeParams& params) override;

  // WhiteBoxVlm
  int vocab_size() const override { return tokenizer_.vocab_size(); }
  const WordTokenizer& tokenizer() const override { return tokenizer_; }
  double log_likelihood(const ImageBuffer& image,
                        const std::vector<int>& text_tokens) const override;
  ImageBuffer grad_wrt_image(const ImageBuffer& image,
                             const std::vector<std::vector<int>>& texts) const override;

  const Shape& shape() const { return shape_; }
  const Weights& weights() const { return weights_; }
  Weights& mutable_weights() { return weights_; }

 private:
  void check_image(const ImageBuffer& image) const;
  void check_tokens(const std::vector<int>& tokens) const;
  std::vector<double> vision_embedding(const ImageBuffer& image) const;
  std::vector<double> initial_state(const std::vector<double>& v) const;
  std::vector<double> step(const std::vector<double>& h, int token,
                           const std::vector<double>& v) const;
  std::vector<double> logits_at(const std::vector<double>& h) const;

  Shape shape_;
  WordTokenizer tokenizer_;
  Weights weights_;
  std::string id_;
};

}  // namespace forge::adapters
