#include "forge/adapters.hpp"

#include "forge/errors.hpp"

namespace forge::adapters {

double WhiteBoxVlm::log_likelihood_text(const ImageBuffer& image,
                                        const std::string& text) const {
  return log_likelihood(image, tokenizer().encode(text, /*strict=*/true));
}

WhiteBoxVlm& require_white_box(ChatModel& model) {
  auto* wb = dynamic_cast<WhiteBoxVlm*>(&model);
  if (!wb)
    throw CapabilityError("adapter '" + model.model_id() +
                          "' has no gradient surface (black-box)");
  return *wb;
}

double corpus_log_likelihood(const WhiteBoxVlm& model, const ImageBuffer& image,
                             const Corpus& corpus) {
  double total = 0.0;
  for (const auto& sentence : corpus.sentences)
    total += model.log_likelihood_text(image, sentence);
  return total;
}

ImageBuffer corpus_grad(const WhiteBoxVlm& model, const ImageBuffer& image,
                        const Corpus& corpus) {
  std::vector<std::vector<int>> texts;
  texts.reserve(corpus.size());
  for (const auto& sentence : corpus.sentences)
    texts.push_back(model.tokenizer().encode(sentence, /*strict=*/true));
  return model.grad_wrt_image(image, texts);
}

ScriptedChatModel::ScriptedChatModel(std::vector<std::string> responses,
                                     std::string model_id)
    : mode_(Mode::kFixed), model_id_(std::move(model_id)),
      responses_(std::move(responses)) {
  if (responses_.empty())
    throw ConfigError("model.scripted_responses", "at least one response required");
}

ScriptedChatModel::ScriptedChatModel(Mode mode, std::string model_id)
    : mode_(mode), model_id_(std::move(model_id)) {}

ScriptedChatModel ScriptedChatModel::echo(std::string model_id) {
  return ScriptedChatModel(Mode::kEcho, std::move(model_id));
}

std::string ScriptedChatModel::generate(const ImageBuffer& image, const std::string& text,
                                        const DecodeParams&) {
  image.validate();
  const int call = calls_++;
  std::string response;
  if (mode_ == Mode::kEcho) {
    response = text;
  } else {
    response = responses_[static_cast<std::size_t>(call) % responses_.size()];
  }
  if (response.empty())
    throw EmptyResponseError("adapter '" + model_id_ + "' returned an empty response");
  return response;
}

}  // namespace forge::adapters
