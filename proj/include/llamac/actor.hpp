#pragma once

// Decentralized actors: LLM-free plan confirmation, feedback generation for
// rejected suggestions, and the external feedback loop.

#include "llamac/critic.hpp"

namespace llamac {

enum class Decision { Execute, NeedsRevision };

struct AvailabilityCheck {
  bool pass = true;
  std::string detail;
};

struct ConfirmationResult {
  Decision decision = Decision::Execute;
  AvailabilityCheck availability;
  std::optional<DistanceCheck> distance;  // absent when not applicable

  std::string describe() const {
    std::string out = "availability: " + std::string(availability.pass ? "pass" : "fail");
    if (!availability.detail.empty()) out += " (" + availability.detail + ")";
    if (distance) {
      out += "\ndistance: " + std::string(distance->pass ? "pass" : "fail") + " (before " +
             std::to_string(distance->before) + ", after " + std::to_string(distance->after) + ")";
    }
    return out;
  }
};

inline json to_json_value(const ConfirmationResult& c) {
  json out{{"decision", c.decision == Decision::Execute ? "execute" : "needs_revision"},
           {"availability", {{"pass", c.availability.pass}, {"detail", c.availability.detail}}}};
  if (c.distance) {
    out["distance"] = {{"pass", c.distance->pass}, {"before", c.distance->before}, {"after", c.distance->after}};
  }
  return out;
}

template <Environment E>
ConfirmationResult plan_confirmation(const E& env, const Observation<typename E::View>& observation,
                                     const Suggestion<E>& suggestion, const StateOf<E>& state) {
  if (observation.agent != suggestion.agent) {
    throw std::invalid_argument("suggestion for " + suggestion.agent.name() + " confirmed by " +
                                observation.agent.name());
  }
  ConfirmationResult out;
  if (!env.is_legal(state, suggestion.agent, suggestion.action)) {
    out.availability = {false, env.action_text(suggestion.action) + " is not available to " + suggestion.agent.name()};
    out.decision = Decision::NeedsRevision;
    return out;
  }
  out.distance = env.distance_check(state, suggestion.agent, suggestion.action);
  if (out.distance && !out.distance->pass) out.decision = Decision::NeedsRevision;
  return out;
}

template <Environment E>
FeedbackNote<E> generate_feedback(Session<E>& s, const StateOf<E>& state, const Observation<typename E::View>& obs,
                                  const Suggestion<E>& suggestion, const ConfirmationResult& confirmation) {
  if (confirmation.decision == Decision::Execute) {
    throw std::invalid_argument("generate_feedback called for a confirmed suggestion");
  }
  const auto role = RoleTag::actor(obs.agent);
  Bindings bindings{{"agent", obs.agent.name()},
                    {"task", task_description(s.env)},
                    {"observation", obs.text},
                    {"suggestion", s.env.action_text(suggestion.action)},
                    {"issues", confirmation.describe()}};
  auto context = base_context(s, state, "actor_feedback");
  context["agent"] = obs.agent.name();
  context["suggestion"] = s.env.format_action(suggestion.action);
  context["checks"] = to_json_value(confirmation);
  auto ex = s.gateway.complete({role, instantiate_prompt(prompts::actor_feedback, bindings),
                                default_params(role.kind, s.seed), std::move(context)});
  std::string reason = parse_feedback_text(ex.response_text);
  if (reason.empty()) reason = confirmation.describe();
  return {obs.agent, suggestion, std::move(reason)};
}

template <Environment E>
struct ExternalResult {
  JointOf<E> joint;
  int iterations = 0;
  int revisions = 0;
  std::vector<AgentId> fallbacks;
};

/// Confirmed actors freeze their action; dissenters send feedback and the
/// critic revises their suggestions, for at most `limit` iterations. A last
/// LLM-free confirmation follows; agents still unresolved take the
/// environment's fallback action.
template <Environment E>
ExternalResult<E> external_feedback_loop(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem,
                                         SuggestionMap<E> suggestions, int limit) {
  if (limit < 1) throw std::invalid_argument("external feedback limit must be >= 1");
  const auto n = s.env.agent_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (!suggestions.contains(AgentId{i})) throw std::invalid_argument("suggestions miss " + AgentId{i}.name());
  }
  ExternalResult<E> out;
  std::map<AgentId, typename E::Action> frozen;

  auto confirm = [&](AgentId a) {
    return plan_confirmation(s.env, s.env.observe(state, a), suggestions.at(a), state);
  };

  for (int it = 1; it <= limit && frozen.size() < n; ++it) {
    out.iterations = it;
    s.event("external_iteration", it);
    std::vector<FeedbackNote<E>> notes;
    for (std::size_t i = 0; i < n; ++i) {
      const AgentId a{i};
      if (frozen.contains(a)) continue;
      auto result = confirm(a);
      if (result.decision == Decision::Execute) {
        frozen.emplace(a, suggestions.at(a).action);
      } else {
        notes.push_back(generate_feedback(s, state, s.env.observe(state, a), suggestions.at(a), result));
      }
    }
    if (notes.empty()) break;
    s.counters.external_feedback += static_cast<int>(notes.size());
    json named = json::array();
    for (const auto& note : notes) named.push_back({{"agent", note.agent.name()}, {"reason", note.reason}});
    s.event("external_feedback", it, {{"notes", named}});
    suggestions = revise_suggestions(s, state, mem, suggestions, notes);
    ++out.revisions;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const AgentId a{i};
    if (frozen.contains(a)) continue;
    if (confirm(a).decision == Decision::Execute) {
      frozen.emplace(a, suggestions.at(a).action);
    } else {
      frozen.emplace(a, s.env.fallback_action(state, a));
      out.fallbacks.push_back(a);
    }
  }
  if (!out.fallbacks.empty()) {
    s.counters.fallbacks += static_cast<int>(out.fallbacks.size());
    json agents = json::array();
    for (auto a : out.fallbacks) agents.push_back(a.name());
    s.event("external_exhausted_fallback", out.iterations, {{"agents", agents}});
  }
  out.joint.actions = std::move(frozen);
  return out;
}

}  // namespace llamac
