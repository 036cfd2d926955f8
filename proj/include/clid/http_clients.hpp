#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/embedding.hpp"
#include "clid/llm.hpp"

namespace clid {

/// Splits "https://host:port/prefix" into the scheme-host-port part httplib
/// wants and the path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, "http", "base URL needs a scheme: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, ""};
  auto prefix = url.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path), prefix};
}

/// OpenAI-compatible chat-completions client. The API key is read from an
/// environment variable so it never lands in configs or logs.
class HttpChatProvider : public LlmProvider {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o";
    std::string api_key_env = "CLID_LLM_API_KEY";
    std::chrono::seconds timeout{120};
  };

  explicit HttpChatProvider(Options options) : options_(std::move(options)) {
    std::tie(host_, prefix_) = split_base_url(options_.base_url);
    if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
  }

  std::string id() const override { return "http:" + options_.model; }

  std::string generate(const LlmRequest& request) override {
    httplib::Client client(host_);
    client.set_read_timeout(options_.timeout);
    client.set_connection_timeout(std::chrono::seconds(15));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const nlohmann::json body{{"model", options_.model},
                              {"temperature", request.decoding.temperature},
                              {"max_tokens", request.decoding.max_tokens},
                              {"messages", {{{"role", "user"}, {"content", request.prompt}}}}};
    auto res = client.Post(prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw RetriableFailure("request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) throw RetriableFailure("HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw Error(ErrorCode::transport, "llm", "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    try {
      const auto j = nlohmann::json::parse(res->body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("llm", std::string("unexpected chat response: ") + e.what(), res->body);
    }
  }

 private:
  Options options_;
  std::string host_;
  std::string prefix_;
  std::string api_key_;
};

/// Remote embedder: POST {prefix}/embed {"text": ...} -> {"embedding": [...]}.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::size_t dim, int max_attempts = 3) : dim_(dim), max_attempts_(max_attempts) {
    std::tie(host_, prefix_) = split_base_url(base_url);
  }

  std::string id() const override { return "http-embed:" + host_ + prefix_; }

  std::vector<float> embed(std::string_view text) override {
    httplib::Client client(host_);
    client.set_read_timeout(std::chrono::seconds(60));
    const nlohmann::json body{{"text", std::string(text)}};
    std::string failure;
    for (int attempt = 1; attempt <= std::max(1, max_attempts_); ++attempt) {
      auto res = client.Post(prefix_ + "/embed", body.dump(), "application/json");
      if (!res) {
        failure = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500 || res->status == 429) {
        failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw Error(ErrorCode::transport, "embed", "HTTP " + std::to_string(res->status));
      std::vector<float> v;
      try {
        v = nlohmann::json::parse(res->body).at("embedding").get<std::vector<float>>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("embed", std::string("unexpected embedding response: ") + e.what(), res->body);
      }
      if (v.size() != dim_)
        throw Error(ErrorCode::dimension_mismatch, "embed",
                    "expected " + std::to_string(dim_) + " dims, got " + std::to_string(v.size()));
      return v;
    }
    throw Error(ErrorCode::transport, "embed", "embedding request failed: " + failure);
  }

 private:
  std::string host_;
  std::string prefix_;
  std::size_t dim_;
  int max_attempts_;
};

}  // namespace clid
