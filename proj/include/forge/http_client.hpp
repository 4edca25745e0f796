#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace forge::adapters {

struct EndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string path = "/v1/generate";
  std::string auth_token;  // already resolved from config or environment
  double timeout_seconds = 30.0;
  int retry_budget = 2;  // retries after the first attempt
};

// One JSON-over-HTTP POST exchange. Single attempt; retry policy lives in
// post_with_retry so scripted transports exercise it too.
class JsonTransport {
 public:
  virtual ~JsonTransport() = default;
  virtual nlohmann::json post(const std::string& path, const nlohmann::json& body) = 0;
};

class HttpJsonTransport final : public JsonTransport {
 public:
  explicit HttpJsonTransport(EndpointConfig config);
  nlohmann::json post(const std::string& path, const nlohmann::json& body) override;

 private:
  EndpointConfig config_;
};

// Programmable transport for offline tests and the deterministic stack.
class ScriptedTransport final : public JsonTransport {
 public:
  using Handler = std::function<nlohmann::json(const std::string& path,
                                               const nlohmann::json& body)>;

  explicit ScriptedTransport(Handler handler) : handler_(std::move(handler)) {}

  nlohmann::json post(const std::string& path, const nlohmann::json& body) override {
    ++calls_;
    return handler_(path, body);
  }

  int calls() const { return calls_; }

 private:
  Handler handler_;
  int calls_ = 0;
};

// Retries on TransportError up to `retries` extra attempts; the final
// TransportError reports the total attempt count.
nlohmann::json post_with_retry(JsonTransport& transport, const std::string& path,
                               const nlohmann::json& body, int retries);

}  // namespace forge::adapters
