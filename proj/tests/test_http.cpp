#include <doctest.h>

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

#include "forge/base64.hpp"
#include "forge/black_box.hpp"
#include "forge/http_client.hpp"
#include "forge/png_io.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::adapters;

namespace {

// Loopback HTTP server for transport tests. Skips gracefully when the
// sandbox forbids binding.
struct LoopbackServer {
  httplib::Server server;
  std::thread thread;
  int port = -1;

  bool start() {
    port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) return false;
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
    return true;
  }

  ~LoopbackServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("http transport posts json and parses the reply") {
  LoopbackServer loop;
  if (!loop.start()) {
    MESSAGE("cannot bind a loopback port in this environment; skipping");
    return;
  }
  std::string seen_auth;
  loop.server.Post("/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json reply{{"text", "echo of " + body.at("prompt").get<std::string>()}};
    res.set_content(reply.dump(), "application/json");
  });

  EndpointConfig config;
  config.base_url = loop.base_url();
  config.auth_token = "secret-token";
  HttpJsonTransport transport(config);

  auto reply = transport.post("/v1/generate", {{"prompt", "hello"}});
  CHECK(reply.at("text").get<std::string>() == "echo of hello");
  CHECK(seen_auth == "Bearer secret-token");
}

TEST_CASE("http transport reports status and parse failures") {
  LoopbackServer loop;
  if (!loop.start()) {
    MESSAGE("cannot bind a loopback port in this environment; skipping");
    return;
  }
  loop.server.Post("/boom", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("upstream exploded", "text/plain");
  });
  loop.server.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{not json", "application/json");
  });

  EndpointConfig config;
  config.base_url = loop.base_url();
  HttpJsonTransport transport(config);
  CHECK_THROWS_AS(transport.post("/boom", nlohmann::json::object()), TransportError);
  CHECK_THROWS_AS(transport.post("/garbled", nlohmann::json::object()), TransportError);

  EndpointConfig nowhere;
  nowhere.base_url = "http://127.0.0.1:1";  // nothing listens on port 1
  nowhere.timeout_seconds = 1.0;
  HttpJsonTransport dead(nowhere);
  CHECK_THROWS_AS(dead.post("/x", nlohmann::json::object()), TransportError);

  EndpointConfig blank;
  CHECK_THROWS_AS(HttpJsonTransport{blank}, ConfigError);
}

TEST_CASE("post_with_retry counts every attempt") {
  int failures_left = 2;
  ScriptedTransport flaky([&](const std::string&, const nlohmann::json&) {
    if (failures_left-- > 0) throw TransportError("temporary outage");
    return nlohmann::json{{"ok", true}};
  });
  auto reply = post_with_retry(flaky, "/x", nlohmann::json::object(), 2);
  CHECK(reply.at("ok").get<bool>());
  CHECK(flaky.calls() == 3);

  ScriptedTransport hopeless([](const std::string&, const nlohmann::json&) -> nlohmann::json {
    throw TransportError("permanent outage");
  });
  try {
    post_with_retry(hopeless, "/x", nlohmann::json::object(), 2);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
    CHECK(hopeless.calls() == 3);
  }

  ScriptedTransport instant([](const std::string&, const nlohmann::json&) {
    return nlohmann::json{{"ok", 1}};
  });
  post_with_retry(instant, "/x", nlohmann::json::object(), -5);
  CHECK(instant.calls() == 1);
}

TEST_CASE("black box adapter ships the image as base64 png") {
  nlohmann::json seen;
  auto transport = std::make_shared<ScriptedTransport>(
      [&](const std::string& path, const nlohmann::json& body) {
        CHECK(path == "/v1/generate");
        seen = body;
        return nlohmann::json{{"text", "a reply"}};
      });
  EndpointConfig config;
  config.base_url = "http://mock";
  BlackBoxVlm model("remote:demo", transport, config);
  CHECK(model.model_id() == "remote:demo");

  auto image = random_image(4, 4, 3, 81);
  DecodeParams params;
  params.max_new_tokens = 16;
  auto out = model.generate(image, "describe this", params);
  CHECK(out == "a reply");

  REQUIRE(seen.contains("image"));
  const auto decoded = base64_decode(seen["image"].get<std::string>());
  auto round = decode_png(decoded);
  CHECK(round.pixels == quantize8(image).pixels);
  CHECK(seen.at("prompt").get<std::string>() == "describe this");
  CHECK(seen.at("params").at("max_new_tokens").get<int>() == 16);
  CHECK(seen.at("params").at("greedy").get<bool>() == true);
}

TEST_CASE("black box adapter rejects malformed replies") {
  auto no_text = std::make_shared<ScriptedTransport>(
      [](const std::string&, const nlohmann::json&) {
        return nlohmann::json{{"data", 1}};
      });
  EndpointConfig config;
  config.base_url = "http://mock";
  config.retry_budget = 0;
  BlackBoxVlm model("remote:demo", no_text, config);
  auto image = random_image(2, 2, 3, 82);
  CHECK_THROWS_AS(model.generate(image, "x", {}), TransportError);

  auto empty_text = std::make_shared<ScriptedTransport>(
      [](const std::string&, const nlohmann::json&) {
        return nlohmann::json{{"text", ""}};
      });
  BlackBoxVlm empty_model("remote:demo", empty_text, config);
  CHECK_THROWS_AS(empty_model.generate(image, "x", {}), EmptyResponseError);

  CHECK_THROWS_AS(BlackBoxVlm("remote:demo", nullptr, config), ConfigError);
}

TEST_CASE("black box adapter talks to a live loopback endpoint") {
  LoopbackServer loop;
  if (!loop.start()) {
    MESSAGE("cannot bind a loopback port in this environment; skipping");
    return;
  }
  std::atomic<int> hits{0};
  loop.server.Post("/v1/generate", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    auto body = nlohmann::json::parse(req.body);
    auto png = base64_decode(body.at("image").get<std::string>());
    auto image = decode_png(png);  // throws if the payload is not a real png
    nlohmann::json reply{
        {"text", "saw " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + " and prompt: " +
                     body.at("prompt").get<std::string>()}};
    res.set_content(reply.dump(), "application/json");
  });

  EndpointConfig config;
  config.base_url = loop.base_url();
  auto transport = std::make_shared<HttpJsonTransport>(config);
  BlackBoxVlm model("remote:loopback", transport, config);

  auto image = random_image(3, 5, 3, 83);
  auto out = model.generate(image, "hello", {});
  CHECK(out == "saw 3x5 and prompt: hello");
  CHECK(hits == 1);
}
