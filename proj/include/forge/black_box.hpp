#pragma once

#include <memory>
#include <string>

#include "forge/adapters.hpp"
#include "forge/http_client.hpp"

namespace forge::adapters {

// Remote chat-only VLM reached over JSON/HTTP. Requests carry the image as a
// base64 PNG plus the prompt and decode params; the reply must contain a
// non-empty "text" field. No gradient surface is exposed.
class BlackBoxVlm final : public ChatModel {
 public:
  BlackBoxVlm(std::string model_id, std::shared_ptr<JsonTransport> transport,
              EndpointConfig config);

  std::string model_id() const override { return id_; }
  std::string generate(const ImageBuffer& image, const std::string& text,
                       const DecodeParams& params) override;

 private:
  std::string id_;
  std::shared_ptr<JsonTransport> transport_;
  EndpointConfig config_;
};

}  // namespace forge::adapters
