#pragma once

// Live backend for any OpenAI-compatible chat-completion server.
//
// Environment: LLAMAC_API_BASE (e.g. http://localhost:8000 or
// https://api.openai.com/v1), LLAMAC_API_KEY, LLAMAC_MODEL. When the base URL
// has no path the request goes to /v1/chat/completions, otherwise to
// <path>/chat/completions. HTTPS needs CPPHTTPLIB_OPENSSL_SUPPORT.

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "llamac/backend.hpp"

namespace llamac {

struct HttpBackendConfig {
  std::string base_url = "http://localhost:8000";
  std::string api_key;
  std::string model = "gpt-4";
  int retries = 3;  // attempts after the first
  int timeout_seconds = 120;
  int backoff_ms = 500;

  static HttpBackendConfig from_env() {
    HttpBackendConfig c;
    if (const char* v = std::getenv("LLAMAC_API_BASE")) c.base_url = v;
    if (const char* v = std::getenv("LLAMAC_API_KEY")) c.api_key = v;
    if (const char* v = std::getenv("LLAMAC_MODEL")) c.model = v;
    return c;
  }
};

/// Splits "scheme://host[:port][/path]" into the client origin and the
/// request path.
inline std::pair<std::string, std::string> chat_endpoint(std::string_view base_url) {
  const auto scheme = base_url.find("://");
  const auto path_at = base_url.find('/', scheme == std::string_view::npos ? 0 : scheme + 3);
  std::string origin(base_url.substr(0, path_at));
  std::string path = path_at == std::string_view::npos ? "" : std::string(base_url.substr(path_at));
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {origin, path.empty() ? "/v1/chat/completions" : path + "/chat/completions"};
}

inline json chat_request_body(const std::string& model, const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.speaker}, {"content", m.text}});
  return {{"model", model},
          {"messages", messages},
          {"temperature", request.params.temperature},
          {"max_tokens", request.params.max_tokens},
          {"seed", request.params.seed}};
}

class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    std::tie(origin_, path_) = chat_endpoint(config_.base_url);
  }

  ChatExchange complete(const ChatRequest& request) override {
    const auto body = chat_request_body(config_.model, request).dump();
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms * attempt));
      httplib::Client client(origin_);
      client.set_connection_timeout(config_.timeout_seconds);
      client.set_read_timeout(config_.timeout_seconds);
      const auto start = std::chrono::steady_clock::now();
      auto res = client.Post(path_, headers, body, "application/json");
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
      json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded() || !reply.contains("choices") || reply.at("choices").empty()) {
        throw TransportError("malformed chat-completion reply");
      }
      ChatExchange ex;
      ex.role = request.role;
      ex.prompt_messages = request.messages;
      ex.response_text = reply.at("choices").at(0).at("message").value("content", "");
      if (reply.contains("usage") && reply.at("usage").is_object()) {
        const auto& u = reply.at("usage");
        ex.usage = TokenUsage::of(u.value("prompt_tokens", std::int64_t{0}), u.value("completion_tokens", std::int64_t{0}));
      } else {
        ex.usage = TokenUsage::of(estimate_tokens(request.messages), estimate_tokens(ex.response_text));
      }
      ex.latency_ms = elapsed.count();
      ex.backend_id = id();
      return ex;
    }
    throw TransportError(last_error + " after " + std::to_string(config_.retries + 1) + " attempts");
  }

  std::string id() const override { return "http:" + config_.model; }

 private:
  HttpBackendConfig config_;
  std::string origin_;
  std::string path_;
};

}  // namespace llamac
