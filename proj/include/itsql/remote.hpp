// SPDX-License-Identifier: Apache-2.0
#pragma once

// Remote providers speak OpenAI-compatible wire formats. TLS support comes
// from defining CPPHTTPLIB_OPENSSL_SUPPORT before this header (the CLI build
// does); plain http works for local test servers either way.

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>
#include <vector>

#include "itsql/agent.hpp"
#include "itsql/embedding.hpp"
#include "itsql/error.hpp"

namespace itsql {

struct RemoteConfig {
  std::string base_url;          // e.g. "https://api.openai.com"
  std::string api_key_env = "ITSQL_API_KEY";
  int retries = 3;
  int backoff_initial_ms = 1000;
  int timeout_s = 120;
};

namespace detail {

inline std::string require_api_key(const std::string& env_var) {
  const char* key = std::getenv(env_var.c_str());
  if (key == nullptr || *key == '\0')
    throw Error("ConfigError",
                "API key environment variable " + env_var + " is not set");
  return key;
}

inline nlohmann::json post_json_with_retries(const RemoteConfig& config,
                                             const std::string& path,
                                             const nlohmann::json& body,
                                             const std::string& error_kind) {
  std::string api_key = require_api_key(config.api_key_env);
  std::string last_error;
  int backoff_ms = config.backoff_initial_ms;
  for (int attempt = 0; attempt < config.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    httplib::Client client(config.base_url);
    client.set_connection_timeout(config.timeout_s);
    client.set_read_timeout(config.timeout_s);
    client.set_bearer_token_auth(api_key);
    auto response = client.Post(path, body.dump(), "application/json");
    if (!response) {
      last_error = "transport error: " + httplib::to_string(response.error());
      continue;
    }
    if (response->status != 200) {
      last_error = "HTTP " + std::to_string(response->status) + ": " +
                   response->body.substr(0, 500);
      // client errors other than rate limiting will not recover on retry
      if (response->status >= 400 && response->status < 500 &&
          response->status != 429)
        break;
      continue;
    }
    try {
      return nlohmann::json::parse(response->body);
    } catch (const std::exception& e) {
      last_error = std::string("bad JSON in response: ") + e.what();
    }
  }
  throw Error(error_kind, last_error);
}

}  // namespace detail

/// EmbeddingProvider backed by an OpenAI-style /v1/embeddings endpoint.
class RemoteEmbedder : public EmbeddingProvider {
 public:
  RemoteEmbedder(RemoteConfig config, std::string model)
      : config_(std::move(config)), model_(std::move(model)) {}

  std::size_t dimension() const override { return dimension_; }

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) override {
    if (texts.empty()) return {};
    nlohmann::json body{{"model", model_}, {"input", texts}};
    auto response = detail::post_json_with_retries(config_, "/v1/embeddings",
                                                   body, "EmbedderFailure");
    std::vector<std::vector<double>> out(texts.size());
    for (const auto& item : response.at("data")) {
      auto index = item.at("index").get<std::size_t>();
      if (index >= out.size())
        throw Error("EmbedderFailure", "embedding index out of range");
      out[index] = item.at("embedding").get<std::vector<double>>();
    }
    for (const auto& v : out) {
      if (v.empty())
        throw Error("DimensionMismatch",
                    "endpoint returned fewer embeddings than inputs");
      if (dimension_ == 0) dimension_ = v.size();
      if (v.size() != dimension_)
        throw Error("DimensionMismatch", "non-uniform embedding dimensions");
    }
    return out;
  }

 private:
  RemoteConfig config_;
  std::string model_;
  std::size_t dimension_ = 0;
};

/// LlmBackend speaking the chat-completion wire format. The serialized
/// prompt+history travels as a single user message; stop sequences keep the
/// model from hallucinating observations.
class RemoteChatBackend : public LlmBackend {
 public:
  explicit RemoteChatBackend(RemoteConfig config)
      : config_(std::move(config)) {}

  Completion generate(const std::string& prompt,
                      const DecodingConfig& decoding) override {
    nlohmann::json body{
        {"model", decoding.model},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"}, {"content", prompt}}})},
        {"temperature", decoding.temperature},
        {"top_p", decoding.top_p},
        {"n", decoding.n},
        {"stop", decoding.stop},
        {"max_tokens", decoding.max_tokens}};
    auto response = detail::post_json_with_retries(
        config_, "/v1/chat/completions", body, "BackendError");

    Completion completion;
    for (const auto& choice : response.at("choices"))
      completion.candidates.push_back(
          choice.at("message").at("content").get<std::string>());
    if (completion.candidates.empty())
      throw Error("BackendError", "endpoint returned no choices");
    if (response.contains("usage")) {
      completion.usage.prompt_tokens =
          response["usage"].value("prompt_tokens", 0LL);
      completion.usage.completion_tokens =
          response["usage"].value("completion_tokens", 0LL);
    }
    return completion;
  }

 private:
  RemoteConfig config_;
};

}  // namespace itsql
