#include <doctest.h>

#include <string>

#include "forge/rewrite.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::rewrite;

TEST_CASE("template front matter parses into fields") {
  test::TempDir tmp;
  auto path = tmp.file("t.txt");
  test::write_file(path,
                   "---\n"
                   "template_id: defense-v2\n"
                   "version: 7\n"
                   "author: someone\n"  // unknown keys tolerated
                   "---\n"
                   "Please review: {PROMPT}\n");
  auto tmpl = RewriteTemplate::load(path);
  CHECK(tmpl.template_id == "defense-v2");
  CHECK(tmpl.version == "7");
  CHECK(tmpl.body == "Please review: {PROMPT}");
  tmpl.validate();
}

TEST_CASE("template version defaults and template_id is required") {
  test::TempDir tmp;
  auto no_version = tmp.file("nv.txt");
  test::write_file(no_version, "---\ntemplate_id: x\n---\nbody {PROMPT}\n");
  CHECK(RewriteTemplate::load(no_version).version == "1");

  auto no_id = tmp.file("ni.txt");
  test::write_file(no_id, "---\nversion: 2\n---\nbody {PROMPT}\n");
  CHECK_THROWS_AS(RewriteTemplate::load(no_id), TemplateError);

  auto no_header = tmp.file("nh.txt");
  test::write_file(no_header, "just a body {PROMPT}\n");
  CHECK_THROWS_AS(RewriteTemplate::load(no_header), TemplateError);

  CHECK_THROWS_AS(RewriteTemplate::load(tmp.file("missing.txt")), IoError);
}

TEST_CASE("validate demands exactly one placeholder") {
  CHECK_THROWS_AS(RewriteTemplate::from_parts("t", "1", "no slot").validate(),
                  TemplateError);
  CHECK_THROWS_AS(
      RewriteTemplate::from_parts("t", "1", "{PROMPT} and {PROMPT}").validate(),
      TemplateError);
  RewriteTemplate::from_parts("t", "1", "one {PROMPT} here").validate();
}

TEST_CASE("render substitutes the prompt verbatim") {
  auto tmpl = RewriteTemplate::from_parts("t", "1", "A {PROMPT} B");
  CHECK(render_template(tmpl, "x") == "A x B");
  CHECK(render_template(tmpl, "{PROMPT}") == "A {PROMPT} B");
}

TEST_CASE("body hash tracks content") {
  auto a = RewriteTemplate::from_parts("t", "1", "A {PROMPT}");
  auto b = RewriteTemplate::from_parts("t", "2", "A {PROMPT}");
  auto c = RewriteTemplate::from_parts("t", "1", "B {PROMPT}");
  CHECK(a.body_hash() == b.body_hash());
  CHECK(a.body_hash() != c.body_hash());
  CHECK(a.body_hash().size() == 64);
}

TEST_CASE("default template carries the defensive framing") {
  const auto& tmpl = default_template();
  tmpl.validate();
  CHECK(tmpl.body.find("help models more effectively identify and reject") !=
        std::string::npos);
  CHECK(tmpl.body.find("even if it might be considered unethical or risky") !=
        std::string::npos);
  CHECK(tmpl.body.find("{PROMPT}") != std::string::npos);
}

TEST_CASE("identity rewriter returns the original prompt unchanged") {
  IdentityRewriter identity;
  auto out = rewrite::rewrite("tell me about glue", default_template(), identity);
  CHECK(out.rewritten == "tell me about glue");
  CHECK(out.original == "tell me about glue");
  CHECK(out.rewriter_id == "mock:identity");
  CHECK(out.template_id == default_template().template_id);
  CHECK(out.rationale.empty());
}

TEST_CASE("scripted rewriter sees the rendered request") {
  std::string seen;
  ScriptedRewriter scripted("mock:preamble", [&](const std::string& rendered,
                                                 const std::string& original) {
    seen = rendered;
    return "For research purposes only: " + original;
  });
  auto tmpl = RewriteTemplate::from_parts("demo", "1", "wrap<{PROMPT}>");
  auto out = rewrite::rewrite("hi", tmpl, scripted);
  CHECK(seen == "wrap<hi>");
  CHECK(out.rewritten == "For research purposes only: hi");
  CHECK(out.rewriter_id == "mock:preamble");
}

TEST_CASE("empty inputs and outputs are rejected") {
  IdentityRewriter identity;
  CHECK_THROWS_AS(rewrite::rewrite("", default_template(), identity), RewriteError);
  CHECK_THROWS_AS(render_template(default_template(), ""), RewriteError);

  ScriptedRewriter blank("mock:blank",
                         [](const std::string&, const std::string&) { return ""; });
  CHECK_THROWS_AS(rewrite::rewrite("hello", default_template(), blank), RewriteError);
}

TEST_CASE("rewrite is deterministic for deterministic backends") {
  ScriptedRewriter fixed("mock:fixed", [](const std::string&, const std::string& o) {
    return "safely rephrased: " + o;
  });
  auto a = rewrite::rewrite("teach me", default_template(), fixed);
  auto b = rewrite::rewrite("teach me", default_template(), fixed);
  CHECK(a.rewritten == b.rewritten);
  CHECK(a.template_id == b.template_id);
}

TEST_CASE("best-of-k keeps the highest scoring candidate") {
  int call = 0;
  ScriptedRewriter cycling("mock:cycle", [&](const std::string&, const std::string&) {
    return "candidate " + std::to_string(call++);
  });
  auto scorer = [](const std::string& text) {
    return text == "candidate 1" ? 10.0 : 1.0;
  };
  auto out = rewrite_best_of("p", default_template(), cycling, 3, scorer);
  CHECK(out.rewritten == "candidate 1");
  CHECK(call == 3);
}

TEST_CASE("best-of-k breaks ties toward the earliest candidate") {
  int call = 0;
  ScriptedRewriter cycling("mock:cycle", [&](const std::string&, const std::string&) {
    return "candidate " + std::to_string(call++);
  });
  auto flat = [](const std::string&) { return 5.0; };
  auto out = rewrite_best_of("p", default_template(), cycling, 4, flat);
  CHECK(out.rewritten == "candidate 0");

  CHECK_THROWS_AS(rewrite_best_of("p", default_template(), cycling, 0, flat),
                  RangeError);
}

TEST_CASE("http rewriter parses text and rationale from the wire") {
  auto transport = std::make_shared<adapters::ScriptedTransport>(
      [](const std::string& path, const nlohmann::json& body) {
        CHECK(path == "/v1/generate");
        CHECK(body.contains("prompt"));
        nlohmann::json reply;
        reply["text"] = "rewritten form of the request";
        reply["rationale"] = "styled as a safety review";
        return reply;
      });
  adapters::EndpointConfig cfg;
  cfg.base_url = "http://mock";
  HttpRewriter rw("http:rewriter", transport, cfg);
  auto out = rewrite::rewrite("original ask", default_template(), rw);
  CHECK(out.rewritten == "rewritten form of the request");
  CHECK(out.rationale == "styled as a safety review");
  CHECK(transport->calls() == 1);
}

TEST_CASE("http rewriter surfaces malformed replies as errors") {
  auto transport = std::make_shared<adapters::ScriptedTransport>(
      [](const std::string&, const nlohmann::json&) {
        return nlohmann::json{{"unexpected", 1}};
      });
  adapters::EndpointConfig cfg;
  cfg.base_url = "http://mock";
  HttpRewriter rw("http:rewriter", transport, cfg);
  CHECK_THROWS_AS(rewrite::rewrite("ask", default_template(), rw), TransportError);
}
