#include "forge/toy_vlm.hpp"

#include <algorithm>
#include <cmath>

#include "forge/errors.hpp"
#include "forge/rng.hpp"

namespace forge::adapters {
namespace {

// y += M * x where M is rows x cols, row-major.
void matvec_acc(const std::vector<double>& m, const std::vector<double>& x,
                std::vector<double>& y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    const double* row = m.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) s += row[j] * x[j];
    y[i] += s;
  }
}

// y += M^T * x where M is rows x cols, row-major (so y has cols entries).
void matvec_t_acc(const std::vector<double>& m, const std::vector<double>& x,
                  std::vector<double>& y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = m.data() + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) y[j] += row[j] * xi;
  }
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = m + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

std::vector<std::string> default_response_words() {
  return {"ok",     "yes",    "no",    "sure",   "sorry",  "cannot", "help",
          "i",      "you",    "the",   "a",      "to",     "and",    "it",
          "is",     "not",    "can",   "will",   "this",   "that",   "with",
          "here",   "how",    "what",  "please", "thanks", "answer", "question",
          "unable", "assist", "as",    "an",     "ai",     "model",  "of",
          "for",    "do",     "done",  "first",  "second", "then",   "step",
          "steps",  "safe",   "sound", "fine",   "good",   "well",   "right"};
}

}  // namespace

ToyVlm::ToyVlm(Shape shape, const std::vector<std::string>& vocabulary_words,
               std::uint64_t weight_seed, std::string id)
    : shape_(shape), tokenizer_(vocabulary_words), id_(std::move(id)) {
  if (shape_.height <= 0 || shape_.width <= 0 || shape_.channels <= 0 ||
      shape_.embed_dim <= 0)
    throw ConfigError("model.shape", "all dimensions must be positive");
  if (id_.empty()) id_ = "toy:seed=" + std::to_string(weight_seed);

  const int d = shape_.embed_dim;
  const int input_dim = shape_.height * shape_.width * shape_.channels;
  const int vocab = tokenizer_.vocab_size();

  Rng rng(weight_seed);
  auto init = [&rng](std::vector<double>& w, std::size_t n, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    w.resize(n);
    for (double& v : w) v = rng.normal(0.0, scale);
  };
  init(weights_.w_vision, static_cast<std::size_t>(d) * input_dim, input_dim);
  weights_.b_vision.assign(d, 0.0);
  init(weights_.w_init, static_cast<std::size_t>(d) * d, d);
  weights_.b_init.assign(d, 0.0);
  init(weights_.embed, static_cast<std::size_t>(vocab) * d, d);
  init(weights_.w_rec, static_cast<std::size_t>(d) * d, d);
  init(weights_.w_ctx, static_cast<std::size_t>(d) * d, d);
  weights_.b_rec.assign(d, 0.0);
  init(weights_.w_out, static_cast<std::size_t>(vocab) * d, d);
  weights_.b_out.assign(vocab, 0.0);
}

ToyVlm ToyVlm::uniform(Shape shape, const std::vector<std::string>& vocabulary_words) {
  ToyVlm model(shape, vocabulary_words, /*weight_seed=*/0, "toy:uniform");
  auto& w = model.weights_;
  for (auto* vec : {&w.w_vision, &w.b_vision, &w.w_init, &w.b_init, &w.embed,
                    &w.w_rec, &w.w_ctx, &w.b_rec, &w.w_out, &w.b_out})
    std::fill(vec->begin(), vec->end(), 0.0);
  return model;
}

ToyVlm ToyVlm::with_default_vocab(Shape shape, const Corpus& corpus,
                                  std::uint64_t weight_seed) {
  auto words = corpus.vocabulary_words();
  for (const auto& w : default_response_words())
    words.push_back(w);  // tokenizer dedupes
  return ToyVlm(shape, words, weight_seed);
}

void ToyVlm::check_image(const ImageBuffer& image) const {
  if (image.height != shape_.height || image.width != shape_.width ||
      image.channels != shape_.channels)
    throw AdapterError("toy surrogate: image shape mismatch");
  if (image.pixels.size() !=
      static_cast<std::size_t>(image.height) * image.width * image.channels)
    throw AdapterError("toy surrogate: image storage mismatch");
}

void ToyVlm::check_tokens(const std::vector<int>& tokens) const {
  if (tokens.empty()) throw TokenizationError("empty text");
  for (int t : tokens) {
    if (t < 0 || t >= vocab_size())
      throw TokenizationError("token id out of range: " + std::to_string(t));
  }
}

std::vector<double> ToyVlm::vision_embedding(const ImageBuffer& image) const {
  const int d = shape_.embed_dim;
  const int input_dim = shape_.height * shape_.width * shape_.channels;
  std::vector<double> v = weights_.b_vision;
  matvec_acc(weights_.w_vision, image.pixels, v, d, input_dim);
  return v;
}

std::vector<double> ToyVlm::initial_state(const std::vector<double>& v) const {
  const int d = shape_.embed_dim;
  std::vector<double> z = weights_.b_init;
  matvec_acc(weights_.w_init, v, z, d, d);
  for (double& x : z) x = std::tanh(x);
  return z;
}

std::vector<double> ToyVlm::step(const std::vector<double>& h, int token,
                                 const std::vector<double>& v) const {
  const int d = shape_.embed_dim;
  std::vector<double> z = weights_.b_rec;
  matvec_acc(weights_.w_rec, h, z, d, d);
  matvec_acc(weights_.w_ctx, v, z, d, d);
  const double* e = weights_.embed.data() + static_cast<std::size_t>(token) * d;
  for (int i = 0; i < d; ++i) z[i] = std::tanh(z[i] + e[i]);
  return z;
}

std::vector<double> ToyVlm::logits_at(const std::vector<double>& h) const {
  std::vector<double> logits = weights_.b_out;
  matvec_acc(weights_.w_out, h, logits, vocab_size(), shape_.embed_dim);
  return logits;
}

double ToyVlm::log_likelihood(const ImageBuffer& image,
                              const std::vector<int>& text_tokens) const {
  check_image(image);
  check_tokens(text_tokens);

  const auto v = vision_embedding(image);
  auto h = initial_state(v);
  h = step(h, WordTokenizer::kBos, v);

  double ll = 0.0;
  for (std::size_t t = 0; t < text_tokens.size(); ++t) {
    const auto lp = log_softmax(logits_at(h));
    ll += lp[static_cast<std::size_t>(text_tokens[t])];
    if (t + 1 < text_tokens.size()) h = step(h, text_tokens[t], v);
  }
  return ll;
}

ImageBuffer ToyVlm::grad_wrt_image(const ImageBuffer& image,
                                   const std::vector<std::vector<int>>& texts) const {
  check_image(image);
  if (texts.empty()) throw TokenizationError("empty corpus");
  for (const auto& t : texts) check_tokens(t);

  const int d = shape_.embed_dim;
  const int vocab = vocab_size();
  const int input_dim = shape_.height * shape_.width * shape_.channels;

  const auto v = vision_embedding(image);
  std::vector<double> dv(d, 0.0);

  for (const auto& tokens : texts) {
    // Forward, storing every state. states[0] is the pre-<bos> initial state,
    // states[k] the state after consuming the k-th input token.
    const std::size_t len = tokens.size();
    std::vector<std::vector<double>> states;
    states.reserve(len + 1);
    states.push_back(initial_state(v));
    states.push_back(step(states[0], WordTokenizer::kBos, v));
    std::vector<std::vector<double>> dlogits(len);
    for (std::size_t t = 0; t < len; ++t) {
      const auto& h = states[t + 1];
      auto p = log_softmax(logits_at(h));
      for (double& x : p) x = std::exp(x);
      for (int i = 0; i < vocab; ++i) p[static_cast<std::size_t>(i)] *= -1.0;
      p[static_cast<std::size_t>(tokens[t])] += 1.0;
      dlogits[t] = std::move(p);  // d(sum log p)/d(logits_t) = onehot - softmax
      if (t + 1 < len) states.push_back(step(states[t + 1], tokens[t], v));
    }

    // Backward through the recurrence into dv.
    std::vector<double> dh(d, 0.0);
    for (std::size_t t = len; t-- > 0;) {
      // State states[t+1] fed logits_t; add its direct contribution.
      matvec_t_acc(weights_.w_out, dlogits[t], dh, vocab, d);
      // states[t+1] = tanh(W_rec * states[t] + embed + W_ctx * v + b_rec)
      std::vector<double> dz(d);
      for (int i = 0; i < d; ++i)
        dz[i] = dh[i] * (1.0 - states[t + 1][i] * states[t + 1][i]);
      matvec_t_acc(weights_.w_ctx, dz, dv, d, d);
      std::fill(dh.begin(), dh.end(), 0.0);
      matvec_t_acc(weights_.w_rec, dz, dh, d, d);
    }
    // dh now holds dL/d(states[0]); states[0] = tanh(W_init * v + b_init).
    std::vector<double> dz(d);
    for (int i = 0; i < d; ++i) dz[i] = dh[i] * (1.0 - states[0][i] * states[0][i]);
    matvec_t_acc(weights_.w_init, dz, dv, d, d);
  }

  ImageBuffer grad;
  grad.height = shape_.height;
  grad.width = shape_.width;
  grad.channels = shape_.channels;
  grad.pixels.assign(static_cast<std::size_t>(input_dim), 0.0);
  matvec_t_acc(weights_.w_vision, dv, grad.pixels, d, input_dim);
  for (double g : grad.pixels) {
    if (!std::isfinite(g)) throw OptimizationError("toy surrogate: non-finite gradient");
  }
  return grad;
}

std::string ToyVlm::generate(const ImageBuffer& image, const std::string& text,
                             const DecodeParams& params) {
  check_image(image);
  const auto prompt_ids = tokenizer_.encode(text, /*strict=*/false);

  const auto v = vision_embedding(image);
  auto h = initial_state(v);
  h = step(h, WordTokenizer::kBos, v);
  for (int id : prompt_ids) h = step(h, id, v);

  Rng rng(params.seed);
  std::vector<int> out;
  for (int k = 0; k < params.max_new_tokens; ++k) {
    auto logits = logits_at(h);
    logits[WordTokenizer::kBos] = -1e30;
    logits[WordTokenizer::kUnk] = -1e30;
    if (out.empty()) logits[WordTokenizer::kEos] = -1e30;

    int tok;
    if (params.greedy) {
      tok = static_cast<int>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
    } else {
      const double temp = params.temperature > 0 ? params.temperature : 1.0;
      for (double& x : logits) x /= temp;
      auto lp = log_softmax(logits);
      const double u = rng.uniform();
      double acc = 0.0;
      tok = static_cast<int>(lp.size()) - 1;
      for (std::size_t i = 0; i < lp.size(); ++i) {
        acc += std::exp(lp[i]);
        if (u < acc) {
          tok = static_cast<int>(i);
          break;
        }
      }
    }
    if (tok == WordTokenizer::kEos) break;
    out.push_back(tok);
    h = step(h, tok, v);
  }

  const std::string response = tokenizer_.decode(out);
  if (response.empty())
    throw EmptyResponseError("toy surrogate produced an empty response");
  return response;
}

}  // namespace forge::adapters
