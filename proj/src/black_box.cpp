#include "forge/black_box.hpp"

#include <utility>

#include "forge/base64.hpp"
#include "forge/errors.hpp"
#include "forge/png_io.hpp"

namespace forge::adapters {

BlackBoxVlm::BlackBoxVlm(std::string model_id, std::shared_ptr<JsonTransport> transport,
                         EndpointConfig config)
    : id_(std::move(model_id)), transport_(std::move(transport)), config_(std::move(config)) {
  if (!transport_) throw ConfigError("model.transport", "must not be null");
}

std::string BlackBoxVlm::generate(const ImageBuffer& image, const std::string& text,
                                  const DecodeParams& params) {
  image.validate();
  nlohmann::json body{
      {"image", base64_encode(encode_png(image))},
      {"prompt", text},
      {"params",
       {{"greedy", params.greedy},
        {"temperature", params.temperature},
        {"max_new_tokens", params.max_new_tokens},
        {"seed", params.seed}}},
  };
  auto reply = post_with_retry(*transport_, config_.path, body, config_.retry_budget);
  if (!reply.contains("text") || !reply["text"].is_string()) {
    throw TransportError("reply missing string field 'text'", 1);
  }
  auto out = reply["text"].get<std::string>();
  if (out.empty()) throw EmptyResponseError(id_);
  return out;
}

}  // namespace forge::adapters
