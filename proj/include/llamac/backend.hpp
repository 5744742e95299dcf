#pragma once

// The model gateway: every LLM call in the framework goes through
// Gateway::complete, which enforces the context limit, forwards to a
// pluggable ChatBackend and appends the exchange to the transcript.

#include <array>
#include <cctype>
#include <chrono>
#include <functional>
#include <mutex>

#include "llamac/core.hpp"

namespace llamac {

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;

  static TokenUsage of(std::int64_t prompt, std::int64_t completion) {
    return {prompt, completion, prompt + completion};
  }

  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    total_tokens += o.total_tokens;
    return *this;
  }

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

inline void to_json(json& j, const TokenUsage& u) {
  j = json{{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens},
           {"total_tokens", u.total_tokens}};
}
inline void from_json(const json& j, TokenUsage& u) {
  j.at("prompt_tokens").get_to(u.prompt_tokens);
  j.at("completion_tokens").get_to(u.completion_tokens);
  j.at("total_tokens").get_to(u.total_tokens);
}

enum class RoleKind { CriticExplore, CriticExploit, Assessor, Actor, Debater };

inline constexpr std::array<RoleKind, 5> all_role_kinds{RoleKind::CriticExplore, RoleKind::CriticExploit,
                                                        RoleKind::Assessor, RoleKind::Actor, RoleKind::Debater};

inline std::string_view to_string(RoleKind k) {
  switch (k) {
    case RoleKind::CriticExplore: return "critic_explore";
    case RoleKind::CriticExploit: return "critic_exploit";
    case RoleKind::Assessor: return "assessor";
    case RoleKind::Actor: return "actor";
    case RoleKind::Debater: return "debater";
  }
  return "unknown";
}

// critic_explore | critic_exploit | assessor | actor_<i> | debater_<i>
struct RoleTag {
  RoleKind kind = RoleKind::Assessor;
  std::size_t index = 0;  // actors and debaters only

  static RoleTag critic(bool explore) { return {explore ? RoleKind::CriticExplore : RoleKind::CriticExploit, 0}; }
  static RoleTag assessor() { return {RoleKind::Assessor, 0}; }
  static RoleTag actor(AgentId a) { return {RoleKind::Actor, a.index}; }
  static RoleTag debater(std::size_t i) { return {RoleKind::Debater, i}; }

  bool indexed() const { return kind == RoleKind::Actor || kind == RoleKind::Debater; }

  std::string str() const {
    std::string out(to_string(kind));
    if (indexed()) out += "_" + std::to_string(index);
    return out;
  }

  static std::optional<RoleTag> parse(std::string_view s) {
    for (auto k : all_role_kinds) {
      const auto name = to_string(k);
      RoleTag tag{k, 0};
      if (!tag.indexed()) {
        if (s == name) return tag;
        continue;
      }
      if (s.size() > name.size() + 1 && s.substr(0, name.size()) == name && s[name.size()] == '_') {
        auto digits = s.substr(name.size() + 1);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), tag.index);
        if (ec == std::errc{} && ptr == digits.data() + digits.size()) return tag;
      }
    }
    return std::nullopt;
  }

  friend bool operator==(const RoleTag&, const RoleTag&) = default;
};

struct ChatMessage {
  std::string speaker;  // system | user | assistant
  std::string text;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionParams {
  double temperature = 0.7;
  int max_tokens = 1024;
  std::uint64_t seed = 0;
  friend bool operator==(const CompletionParams&, const CompletionParams&) = default;
};

inline CompletionParams default_params(RoleKind kind, std::uint64_t seed) {
  switch (kind) {
    case RoleKind::Assessor: return {0.2, 1024, seed};
    case RoleKind::Actor: return {0.3, 512, seed};
    default: return {0.7, 1024, seed};
  }
}

/// One model call. `context` carries the structured inputs the prompt was
/// rendered from; live backends ignore it, the scripted oracle reads it.
struct ChatRequest {
  RoleTag role;
  std::vector<ChatMessage> messages;
  CompletionParams params;
  json context;
};

struct ChatExchange {
  RoleTag role;
  std::vector<ChatMessage> prompt_messages;
  std::string response_text;
  TokenUsage usage;
  std::int64_t latency_ms = 0;
  std::string backend_id;
  friend bool operator==(const ChatExchange&, const ChatExchange&) = default;
};

inline void to_json(json& j, const ChatExchange& e) {
  json msgs = json::array();
  for (const auto& m : e.prompt_messages) msgs.push_back({{"speaker", m.speaker}, {"text", m.text}});
  j = json{{"role", e.role.str()},       {"messages", msgs},       {"response", e.response_text},
           {"usage", e.usage},           {"latency_ms", e.latency_ms}, {"backend", e.backend_id}};
}

inline void from_json(const json& j, ChatExchange& e) {
  auto role = RoleTag::parse(j.at("role").get<std::string>());
  if (!role) throw std::runtime_error("bad role tag " + j.at("role").dump());
  e.role = *role;
  e.prompt_messages.clear();
  for (const auto& m : j.at("messages")) e.prompt_messages.push_back({m.at("speaker"), m.at("text")});
  j.at("response").get_to(e.response_text);
  j.at("usage").get_to(e.usage);
  j.at("latency_ms").get_to(e.latency_ms);
  j.at("backend").get_to(e.backend_id);
}

// ---------------------------------------------------------------------------
// Errors

struct ContextLengthExceeded : std::runtime_error {
  ContextLengthExceeded(std::int64_t tokens, std::int64_t limit)
      : std::runtime_error("prompt of ~" + std::to_string(tokens) + " tokens exceeds context limit " +
                           std::to_string(limit)),
        tokens(tokens),
        limit(limit) {}
  std::int64_t tokens;
  std::int64_t limit;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Token estimate used wherever a backend reports no usage: one token per
// started group of four characters of each whitespace-separated piece.

inline std::int64_t estimate_tokens(std::string_view text) {
  std::int64_t tokens = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens += static_cast<std::int64_t>((i - start + 3) / 4);
  }
  return tokens;
}

inline std::int64_t estimate_tokens(const std::vector<ChatMessage>& messages) {
  std::int64_t total = 0;
  for (const auto& m : messages) total += estimate_tokens(m.text);
  return total;
}

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatExchange complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Thread-safe front door to a backend. Exchanges are appended to the sink
/// under one lock, so the transcript order is the completion order.
class Gateway {
 public:
  using Sink = std::function<void(const ChatExchange&)>;

  Gateway(ChatBackend& backend, std::int64_t context_limit, Sink sink = {})
      : backend_(backend), context_limit_(context_limit), sink_(std::move(sink)) {}

  ChatExchange complete(const ChatRequest& request) {
    const auto estimate = estimate_tokens(request.messages);
    if (context_limit_ > 0 && estimate > context_limit_) throw ContextLengthExceeded(estimate, context_limit_);
    ChatExchange ex = backend_.complete(request);
    std::lock_guard lock(mutex_);
    ++calls_;
    if (sink_) sink_(ex);
    return ex;
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }

  std::int64_t context_limit() const { return context_limit_; }

 private:
  ChatBackend& backend_;
  std::int64_t context_limit_;
  Sink sink_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

}  // namespace llamac
