#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "forge/http_client.hpp"

namespace forge::rewrite {

// A prompt-wrapping template with exactly one {PROMPT} placeholder. The body
// frames the request in defensive language so the downstream rewriter
// produces a safety-styled paraphrase.
struct RewriteTemplate {
  std::string template_id;
  std::string version;
  std::string body;

  // Parses a UTF-8 text file with a YAML-style front matter header:
  //   ---
  //   template_id: ...
  //   version: ...
  //   ---
  //   <body>
  static RewriteTemplate load(const std::filesystem::path& path);
  static RewriteTemplate from_parts(std::string template_id, std::string version,
                                    std::string body);

  std::string body_hash() const;
  void validate() const;  // TemplateError unless exactly one placeholder
};

// Built-in defensive template, used when no template file is given.
const RewriteTemplate& default_template();

std::string render_template(const RewriteTemplate& tmpl, const std::string& prompt);

struct RewrittenPrompt {
  std::string original;
  std::string rewritten;
  std::string template_id;
  std::string rewriter_id;
  std::string rationale;  // optional reasoning summary from the rewriter
};

// Strategy interface. `rendered` is the template-wrapped request sent to the
// rewriter; `original` is the untouched user prompt, passed alongside so local
// mocks (identity in particular) can honor their contracts without having to
// invert the template.
class RewriterClient {
 public:
  virtual ~RewriterClient() = default;
  virtual const std::string& id() const = 0;
  virtual std::string rewrite(const std::string& rendered, const std::string& original) = 0;
  // Rationale captured from the most recent call, if the backend supplied one.
  virtual std::string last_rationale() const { return {}; }
};

class IdentityRewriter final : public RewriterClient {
 public:
  const std::string& id() const override { return id_; }
  std::string rewrite(const std::string&, const std::string& original) override {
    return original;
  }

 private:
  std::string id_ = "mock:identity";
};

// Applies a fixed transform, e.g. wrapping the prompt in a scripted preamble.
class ScriptedRewriter final : public RewriterClient {
 public:
  using Fn = std::function<std::string(const std::string& rendered,
                                       const std::string& original)>;
  ScriptedRewriter(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  const std::string& id() const override { return id_; }
  std::string rewrite(const std::string& rendered, const std::string& original) override {
    return fn_(rendered, original);
  }

 private:
  std::string id_;
  Fn fn_;
};

// JSON/HTTP rewriter: POST {prompt} -> {text, rationale?}.
class HttpRewriter final : public RewriterClient {
 public:
  HttpRewriter(std::string id, std::shared_ptr<adapters::JsonTransport> transport,
               adapters::EndpointConfig config);
  const std::string& id() const override { return id_; }
  std::string rewrite(const std::string& rendered, const std::string& original) override;
  std::string last_rationale() const override { return rationale_; }

 private:
  std::string id_;
  std::shared_ptr<adapters::JsonTransport> transport_;
  adapters::EndpointConfig config_;
  std::string rationale_;
};

RewrittenPrompt rewrite(const std::string& prompt, const RewriteTemplate& tmpl,
                        RewriterClient& rewriter);

// Draws k candidates (the rewriter is invoked k times) and keeps the one the
// scorer ranks highest. Ties keep the earliest candidate.
RewrittenPrompt rewrite_best_of(const std::string& prompt, const RewriteTemplate& tmpl,
                                RewriterClient& rewriter, int k,
                                const std::function<double(const std::string&)>& scorer);

}  // namespace forge::rewrite
