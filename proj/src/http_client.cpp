#include "forge/http_client.hpp"

#include <cmath>

#include <httplib.h>

#include "forge/errors.hpp"

namespace forge::adapters {

HttpJsonTransport::HttpJsonTransport(EndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw ConfigError("endpoint.base_url", "must not be empty");
  }
}

nlohmann::json HttpJsonTransport::post(const std::string& path, const nlohmann::json& body) {
  httplib::Client client(config_.base_url);
  const auto whole = std::max(1.0, std::floor(config_.timeout_seconds));
  const auto frac = config_.timeout_seconds - std::floor(config_.timeout_seconds);
  client.set_connection_timeout(static_cast<time_t>(whole),
                                static_cast<time_t>(frac * 1e6));
  client.set_read_timeout(static_cast<time_t>(whole), static_cast<time_t>(frac * 1e6));
  if (!config_.auth_token.empty()) {
    client.set_bearer_token_auth(config_.auth_token);
  }

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw TransportError("http post failed: " + httplib::to_string(res.error()), 1);
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("http status " + std::to_string(res->status), 1);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError(std::string("response is not valid json: ") + e.what(), 1);
  }
}

nlohmann::json post_with_retry(JsonTransport& transport, const std::string& path,
                               const nlohmann::json& body, int retries) {
  if (retries < 0) retries = 0;
  int attempts = 0;
  std::string last_error;
  for (int i = 0; i <= retries; ++i) {
    try {
      ++attempts;
      return transport.post(path, body);
    } catch (const TransportError& e) {
      last_error = e.what();
    }
  }
  throw TransportError(last_error, attempts);
}

}  // namespace forge::adapters
