#pragma once

// Structured-output parsing for model responses.
//
// A response may wrap its answer in prose and/or a ``` fence. We scan every
// balanced `{...}` in text order and return the first one that is valid JSON
// and satisfies the requested schema. Parsing never throws: the result is a
// value or a GrammarError, which is what scrutiny and re-ask logic consume.

#include <set>
#include <variant>

#include "llamac/core.hpp"

namespace llamac {

inline constexpr std::string_view grammar_version = "llamac-grammar/1";

struct GrammarError {
  std::string reason;
  std::size_t span_begin = 0;  // byte range of the offending block, if any
  std::size_t span_end = 0;
  friend bool operator==(const GrammarError&, const GrammarError&) = default;
};

template <class T>
using Parsed = std::variant<T, GrammarError>;

template <class T>
bool ok(const Parsed<T>& p) {
  return std::holds_alternative<T>(p);
}

enum class Schema { ActionMap, Verdict, FeedbackNote, SuggestionMap };

inline std::string_view to_string(Schema s) {
  switch (s) {
    case Schema::ActionMap: return "action_map";
    case Schema::Verdict: return "verdict";
    case Schema::FeedbackNote: return "feedback";
    case Schema::SuggestionMap: return "suggestion_map";
  }
  return "unknown";
}

namespace detail {

// End (one past) of the balanced object starting at `open`, honoring JSON
// string escapes; npos when unbalanced.
inline std::size_t balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace detail

/// `check` returns an empty string when the candidate conforms, else the
/// reason it does not.
template <class Check>
Parsed<json> parse_structured(std::string_view text, Schema schema, Check&& check) {
  std::optional<GrammarError> first_rejection;
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto end = detail::balanced_end(text, open);
    if (end == std::string_view::npos) continue;
    json candidate = json::parse(text.substr(open, end - open), nullptr, /*allow_exceptions=*/false);
    if (candidate.is_discarded() || !candidate.is_object()) continue;
    std::string why = check(candidate);
    if (why.empty()) return candidate;
    if (!first_rejection) first_rejection = GrammarError{std::move(why), open, end};
  }
  if (first_rejection) return *first_rejection;
  return GrammarError{"no " + std::string(to_string(schema)) + " block found", 0, text.size()};
}

// ---------------------------------------------------------------------------
// Typed schemas

template <Environment E>
struct ActionMapReply {
  JointAction<typename E::Action> joint;
  std::string thoughts;
  friend bool operator==(const ActionMapReply&, const ActionMapReply&) = default;
};

namespace detail {

// Reads {"agent_i": <action> | {"action": <action>, "rationale": "..."}}.
// Every agent in `required` must appear; with `exact`, no others may.
template <Environment E>
std::string read_agent_map(const E& env, const json& map, const std::set<AgentId>& required, bool exact,
                           std::map<AgentId, typename E::Action>& actions,
                           std::map<AgentId, std::string>* rationales) {
  if (!map.is_object()) return "agent map is not an object";
  for (const auto& [key, value] : map.items()) {
    auto agent = parse_agent_name(key);
    if (!agent || agent->index >= env.agent_count()) return "unknown agent '" + key + "'";
    if (exact && !required.contains(*agent)) return "unexpected agent '" + key + "'";
    const json* term = &value;
    if (value.is_object()) {
      if (!value.contains("action")) return "entry for " + key + " has no action";
      term = &value.at("action");
      if (rationales && value.contains("rationale") && value.at("rationale").is_string()) {
        (*rationales)[*agent] = value.at("rationale").template get<std::string>();
      }
    }
    auto action = env.parse_action(*term);
    if (!action) return "malformed action for " + key + ": " + term->dump();
    actions[*agent] = *action;
  }
  for (auto a : required) {
    if (!actions.contains(a)) return "missing agent " + a.name();
  }
  return {};
}

template <Environment E>
std::set<AgentId> all_agents(const E& env) {
  std::set<AgentId> out;
  for (std::size_t i = 0; i < env.agent_count(); ++i) out.insert(AgentId{i});
  return out;
}

}  // namespace detail

/// {"thoughts": "...", "actions": {"agent_0": <action>, ...}} covering every agent.
template <Environment E>
Parsed<ActionMapReply<E>> parse_action_map(const E& env, std::string_view text) {
  const auto required = detail::all_agents(env);
  ActionMapReply<E> reply;
  auto block = parse_structured(text, Schema::ActionMap, [&](const json& j) -> std::string {
    if (!j.contains("actions")) return "missing \"actions\"";
    std::map<AgentId, typename E::Action> actions;
    auto why = detail::read_agent_map(env, j.at("actions"), required, true, actions, nullptr);
    if (!why.empty()) return why;
    reply.joint.actions = std::move(actions);
    reply.thoughts = j.contains("thoughts") && j.at("thoughts").is_string() ? j.at("thoughts").get<std::string>() : "";
    return {};
  });
  if (auto* err = std::get_if<GrammarError>(&block)) return *err;
  return reply;
}

template <Environment E>
std::string format_action_map(const E& env, const JointAction<typename E::Action>& joint, std::string_view thoughts) {
  json actions = json::object();
  for (const auto& [agent, action] : joint.actions) actions[agent.name()] = env.format_action(action);
  return json{{"thoughts", thoughts}, {"actions", actions}}.dump();
}

template <Environment E>
struct SuggestionReply {
  std::map<AgentId, typename E::Action> actions;
  std::map<AgentId, std::string> rationales;
  friend bool operator==(const SuggestionReply&, const SuggestionReply&) = default;
};

/// {"suggestions": {"agent_i": {"action": ..., "rationale": "..."}}}. Agents in
/// `required` must be present; with `exact` no other agent may appear.
template <Environment E>
Parsed<SuggestionReply<E>> parse_suggestion_map(const E& env, std::string_view text, const std::set<AgentId>& required,
                                                bool exact) {
  SuggestionReply<E> reply;
  auto block = parse_structured(text, Schema::SuggestionMap, [&](const json& j) -> std::string {
    if (!j.contains("suggestions")) return "missing \"suggestions\"";
    SuggestionReply<E> tmp;
    auto why = detail::read_agent_map(env, j.at("suggestions"), required, exact, tmp.actions, &tmp.rationales);
    if (!why.empty()) return why;
    reply = std::move(tmp);
    return {};
  });
  if (auto* err = std::get_if<GrammarError>(&block)) return *err;
  return reply;
}

template <Environment E>
Parsed<SuggestionReply<E>> parse_suggestion_map(const E& env, std::string_view text) {
  return parse_suggestion_map(env, text, detail::all_agents(env), true);
}

template <Environment E>
std::string format_suggestion_map(const E& env, const SuggestionReply<E>& s) {
  json map = json::object();
  for (const auto& [agent, action] : s.actions) {
    auto it = s.rationales.find(agent);
    map[agent.name()] = {{"action", env.format_action(action)},
                         {"rationale", it == s.rationales.end() ? "" : it->second}};
  }
  return json{{"suggestions", map}}.dump();
}

/// The assessor's scrutiny reply. On "pass" it may also carry the corrected
/// suggestions; on "fail" it carries feedback for the proposers.
struct AssessorVerdict {
  bool pass = false;
  std::string feedback;
  std::string note;
  std::optional<json> suggestions;  // raw, validated later against the env
};

inline Parsed<AssessorVerdict> parse_verdict(std::string_view text) {
  AssessorVerdict out;
  auto block = parse_structured(text, Schema::Verdict, [&](const json& j) -> std::string {
    if (!j.contains("verdict") || !j.at("verdict").is_string()) return "missing \"verdict\"";
    const auto v = j.at("verdict").get<std::string>();
    if (v != "pass" && v != "fail") return "verdict must be \"pass\" or \"fail\"";
    AssessorVerdict tmp;
    tmp.pass = v == "pass";
    if (j.contains("feedback") && j.at("feedback").is_string()) tmp.feedback = j.at("feedback");
    if (j.contains("note") && j.at("note").is_string()) tmp.note = j.at("note");
    if (j.contains("suggestions")) tmp.suggestions = j.at("suggestions");
    out = std::move(tmp);
    return {};
  });
  if (auto* err = std::get_if<GrammarError>(&block)) return *err;
  return out;
}

/// Actor feedback is free text; a {"feedback": "..."} block is preferred
/// when present, otherwise the whole response is the feedback.
inline std::string parse_feedback_text(std::string_view text) {
  auto block = parse_structured(text, Schema::FeedbackNote, [](const json& j) -> std::string {
    return j.contains("feedback") && j.at("feedback").is_string() ? "" : "missing \"feedback\"";
  });
  if (auto* j = std::get_if<json>(&block)) return j->at("feedback").get<std::string>();
  return std::string(text);
}

}  // namespace llamac
