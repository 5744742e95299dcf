#pragma once

// The centralized critic: an exploration-biased proposer, an
// exploitation-biased proposer and the assessor that scrutinizes and merges
// their proposals (internal feedback), and later revises suggestions that
// actors reject (external feedback).
//
// Every iteration of the internal loop costs exactly three model calls: two
// proposals and one assessor reply that carries both the scrutiny verdict and,
// on a pass, the corrected suggestions. Extra assessor calls happen only when
// its reply is malformed (bounded re-ask).

#include <array>

#include "llamac/session.hpp"

namespace llamac {

enum class Preference { Explore, Exploit };

inline std::string_view to_string(Preference p) { return p == Preference::Explore ? "explore" : "exploit"; }

template <Environment E>
struct Proposal {
  Preference preference = Preference::Explore;
  std::optional<JointOf<E>> joint;  // empty when the reply did not parse
  std::string rationale;
  std::optional<GrammarError> grammar;
  std::string raw;
};

struct ScrutinyIssue {
  enum class Kind { Grammar, Conflict, Assessor };
  Kind kind = Kind::Grammar;
  std::optional<Preference> proposal;  // which proposal, if any
  std::string detail;
  std::optional<Conflict> conflict;
};

inline std::string_view to_string(ScrutinyIssue::Kind k) {
  switch (k) {
    case ScrutinyIssue::Kind::Grammar: return "GrammarIssue";
    case ScrutinyIssue::Kind::Conflict: return "ConflictIssue";
    case ScrutinyIssue::Kind::Assessor: return "AssessorIssue";
  }
  return "Issue";
}

struct ScrutinyVerdict {
  bool pass = false;  // == issues.empty()
  std::vector<ScrutinyIssue> issues;
  std::optional<AssessorVerdict> reply;
};

template <Environment E>
struct Suggestion {
  AgentId agent;
  typename E::Action action;
  std::string rationale;
  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

template <Environment E>
using SuggestionMap = std::map<AgentId, Suggestion<E>>;

template <Environment E>
JointOf<E> to_joint(const SuggestionMap<E>& s) {
  JointOf<E> out;
  for (const auto& [agent, sug] : s) out.actions[agent] = sug.action;
  return out;
}

struct InternalFeedbackState {
  int iteration = 0;
  int limit = 1;
  std::optional<std::string> feedback;
  std::vector<std::size_t> dialogue;  // gateway call ordinals of this loop
};

template <Environment E>
struct InternalResult {
  SuggestionMap<E> suggestions;
  InternalFeedbackState loop;
  bool approved = true;  // false when proceeding on a valid but unapproved proposal
  std::array<Proposal<E>, 2> last_proposals;
};

// Alongside F_ef.
template <Environment E>
struct FeedbackNote {
  AgentId agent;
  Suggestion<E> suggestion;
  std::string reason;
};

// ---------------------------------------------------------------------------

template <Environment E>
Proposal<E> propose(Session<E>& s, Preference pref, const StateOf<E>& state, const DecisionMemory<E>& mem,
                    const std::optional<std::string>& feedback) {
  auto bindings = base_bindings(s, state, mem);
  bindings["preference"] = std::string(pref == Preference::Explore ? prompts::explore_clause : prompts::exploit_clause);
  bindings["feedback"] = feedback.value_or("(none)");
  auto context = base_context(s, state, "propose");
  context["preference"] = to_string(pref);
  context["memory"] = memory_json(mem);
  context["feedback"] = feedback.value_or("");
  const auto role = RoleTag::critic(pref == Preference::Explore);
  auto ex = s.gateway.complete({role, instantiate_prompt(prompts::critic, bindings),
                                default_params(role.kind, s.seed), std::move(context)});
  Proposal<E> out;
  out.preference = pref;
  out.raw = ex.response_text;
  auto parsed = parse_action_map(s.env, ex.response_text);
  if (auto* reply = std::get_if<ActionMapReply<E>>(&parsed)) {
    out.joint = reply->joint;
    out.rationale = reply->thoughts;
  } else {
    out.grammar = std::get<GrammarError>(parsed);
  }
  return out;
}

/// Programmatic checks only: grammar, then conflicts inside each proposal.
template <Environment E>
std::vector<ScrutinyIssue> deterministic_checks(const E& env, const StateOf<E>& state,
                                                const std::array<Proposal<E>, 2>& proposals) {
  std::vector<ScrutinyIssue> issues;
  for (const auto& p : proposals) {
    if (!p.joint) {
      issues.push_back({ScrutinyIssue::Kind::Grammar, p.preference,
                        p.grammar ? p.grammar->reason : std::string("unparseable proposal"), std::nullopt});
      continue;
    }
    for (auto& c : env.detect_conflicts(state, *p.joint)) {
      issues.push_back({ScrutinyIssue::Kind::Conflict, p.preference, c.detail, c});
    }
  }
  return issues;
}

namespace detail {

template <Environment E>
std::string proposal_text(const E& env, const Proposal<E>& p) {
  if (!p.joint) return "(unparseable: " + (p.grammar ? p.grammar->reason : std::string("?")) + ")";
  return format_action_map(env, *p.joint, p.rationale);
}

template <Environment E>
json proposal_json(const E& env, const Proposal<E>& p) {
  if (!p.joint) return nullptr;
  return joint_json(env, *p.joint);
}

inline std::string issues_text(const std::vector<ScrutinyIssue>& issues) {
  if (issues.empty()) return "all passed";
  std::string out;
  for (const auto& i : issues) {
    out += "- " + std::string(to_string(i.kind));
    if (i.proposal) out += " in " + std::string(to_string(*i.proposal)) + " proposal";
    out += ": " + i.detail + "\n";
  }
  return out;
}

inline json issues_json(const std::vector<ScrutinyIssue>& issues) {
  json out = json::array();
  for (const auto& i : issues) {
    out.push_back({{"kind", to_string(i.kind)},
                   {"proposal", i.proposal ? json(to_string(*i.proposal)) : json(nullptr)},
                   {"detail", i.detail}});
  }
  return out;
}

}  // namespace detail

/// Deterministic checks first, then one assessor call. The programmatic
/// result cannot be overridden by the model: any issue fails the verdict.
/// An unparseable assessor reply is itself an issue, never an error.
template <Environment E>
ScrutinyVerdict veracity_scrutiny(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem,
                                  const std::array<Proposal<E>, 2>& proposals) {
  ScrutinyVerdict verdict;
  verdict.issues = deterministic_checks(s.env, state, proposals);

  auto bindings = base_bindings(s, state, mem);
  bindings["explore_proposal"] = detail::proposal_text(s.env, proposals[0]);
  bindings["exploit_proposal"] = detail::proposal_text(s.env, proposals[1]);
  bindings["issues"] = detail::issues_text(verdict.issues);
  auto context = base_context(s, state, "assess");
  context["memory"] = memory_json(mem);
  context["proposals"] = {{"explore", detail::proposal_json(s.env, proposals[0])},
                          {"exploit", detail::proposal_json(s.env, proposals[1])}};
  context["issues"] = detail::issues_json(verdict.issues);
  const auto role = RoleTag::assessor();
  auto ex = s.gateway.complete({role, instantiate_prompt(prompts::assessor, bindings),
                                default_params(role.kind, s.seed), std::move(context)});

  auto parsed = parse_verdict(ex.response_text);
  if (auto* reply = std::get_if<AssessorVerdict>(&parsed)) {
    verdict.reply = *reply;
    if (!reply->pass) {
      verdict.issues.push_back({ScrutinyIssue::Kind::Assessor, std::nullopt,
                                reply->feedback.empty() ? std::string("assessor rejected the proposals") : reply->feedback,
                                std::nullopt});
    }
  } else {
    verdict.issues.push_back({ScrutinyIssue::Kind::Grammar, std::nullopt,
                              "assessor reply: " + std::get<GrammarError>(parsed).reason, std::nullopt});
  }
  verdict.pass = verdict.issues.empty();
  return verdict;
}

namespace detail {

template <Environment E>
SuggestionMap<E> to_suggestions(const SuggestionReply<E>& reply) {
  SuggestionMap<E> out;
  for (const auto& [agent, action] : reply.actions) {
    auto it = reply.rationales.find(agent);
    out.emplace(agent, Suggestion<E>{agent, action, it == reply.rationales.end() ? "" : it->second});
  }
  return out;
}

template <Environment E>
std::optional<SuggestionMap<E>> suggestions_from_reply(const E& env, const json& raw) {
  auto parsed = parse_suggestion_map(env, json{{"suggestions", raw}}.dump());
  if (auto* reply = std::get_if<SuggestionReply<E>>(&parsed)) return to_suggestions(*reply);
  return std::nullopt;
}

}  // namespace detail

/// Merges the two proposals into one suggestion per agent. When the scrutiny
/// reply already carries valid suggestions no further call is made; otherwise
/// the assessor is re-asked up to the grammar limit.
template <Environment E>
SuggestionMap<E> belief_correction(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem,
                                   const std::array<Proposal<E>, 2>& proposals, const AssessorVerdict* reply) {
  std::string problem = "(none)";
  if (reply) {
    if (reply->suggestions) {
      if (auto out = detail::suggestions_from_reply(s.env, *reply->suggestions)) return *out;
      problem = "suggestions in the verdict were malformed or incomplete";
    } else {
      problem = "the verdict carried no suggestions";
    }
  }
  const int attempts = reply ? s.grammar_reask_limit : s.grammar_reask_limit + 1;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (reply || attempt > 0) {
      ++s.counters.grammar_reasks;
      s.event("grammar_reask", attempt + 1, {{"role", "assessor"}, {"problem", problem}});
    }
    auto bindings = base_bindings(s, state, mem);
    bindings["explore_proposal"] = detail::proposal_text(s.env, proposals[0]);
    bindings["exploit_proposal"] = detail::proposal_text(s.env, proposals[1]);
    bindings["feedback"] = problem;
    auto context = base_context(s, state, "correct");
    context["memory"] = memory_json(mem);
    context["proposals"] = {{"explore", detail::proposal_json(s.env, proposals[0])},
                            {"exploit", detail::proposal_json(s.env, proposals[1])}};
    const auto role = RoleTag::assessor();
    auto ex = s.gateway.complete({role, instantiate_prompt(prompts::assessor_correction, bindings),
                                  default_params(role.kind, s.seed), std::move(context)});
    auto parsed = parse_suggestion_map(s.env, ex.response_text);
    if (auto* ok_reply = std::get_if<SuggestionReply<E>>(&parsed)) return detail::to_suggestions(*ok_reply);
    problem = std::get<GrammarError>(parsed).reason;
  }
  throw GrammarLimitExceeded("assessor suggestions still malformed after " + std::to_string(s.grammar_reask_limit) +
                             " re-asks: " + problem);
}

template <Environment E>
SuggestionMap<E> belief_correction(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem,
                                   const std::array<Proposal<E>, 2>& proposals) {
  return belief_correction(s, state, mem, proposals, nullptr);
}

namespace detail {

inline std::string synthesize_internal_feedback(const std::vector<ScrutinyIssue>& issues,
                                                const std::string& explore_text, const std::string& exploit_text) {
  std::string out = "Your previous proposals were rejected.\nIssues:\n" + issues_text(issues);
  out += "Exploration proposal was: " + explore_text + "\n";
  out += "Exploitation proposal was: " + exploit_text + "\n";
  return out;
}

}  // namespace detail

/// Propose twice, scrutinize, then either merge (pass) or feed the issues back
/// and retry, for at most `limit` iterations. On exhaustion the most recent
/// proposal that passes the programmatic checks is used as-is (exploit first);
/// if there is none, InternalFeedbackExhausted is thrown.
template <Environment E>
InternalResult<E> internal_feedback_loop(Session<E>& s, const StateOf<E>& state, DecisionMemory<E>& mem, int limit) {
  if (limit < 1) throw std::invalid_argument("internal feedback limit must be >= 1");
  InternalResult<E> result;
  result.loop.limit = limit;
  std::optional<JointOf<E>> fallback;
  std::string fallback_reason;

  for (int it = 1; it <= limit; ++it) {
    result.loop.iteration = it;
    s.event("internal_iteration", it);
    const auto first_call = s.gateway.calls();
    std::array<Proposal<E>, 2> proposals{propose(s, Preference::Explore, state, mem, result.loop.feedback),
                                         propose(s, Preference::Exploit, state, mem, result.loop.feedback)};
    auto verdict = veracity_scrutiny(s, state, mem, proposals);
    for (auto c = first_call; c < s.gateway.calls(); ++c) result.loop.dialogue.push_back(c);
    result.last_proposals = proposals;

    if (verdict.pass) {
      result.suggestions = belief_correction(s, state, mem, proposals, &*verdict.reply);
      if (!verdict.reply->note.empty()) mem.add_note(verdict.reply->note);
      return result;
    }

    for (auto idx : {1, 0}) {
      const auto& p = proposals[static_cast<std::size_t>(idx)];
      if (p.joint && s.env.detect_conflicts(state, *p.joint).empty()) {
        fallback = p.joint;
        fallback_reason = "unapproved " + std::string(to_string(p.preference)) + " proposal after internal feedback";
        break;
      }
    }
    result.loop.feedback = detail::synthesize_internal_feedback(
        verdict.issues, detail::proposal_text(s.env, proposals[0]), detail::proposal_text(s.env, proposals[1]));
    if (verdict.reply && !verdict.reply->feedback.empty()) {
      *result.loop.feedback += "Assessor: " + verdict.reply->feedback + "\n";
    }
    ++s.counters.internal_feedback;
    s.event("internal_feedback", it, {{"issues", detail::issues_json(verdict.issues)}});
  }

  if (!fallback) {
    throw InternalFeedbackExhausted("no proposal passed scrutiny in " + std::to_string(limit) + " iterations");
  }
  s.event("internal_exhausted_proceed", limit);
  result.approved = false;
  for (const auto& [agent, action] : fallback->actions) {
    result.suggestions.emplace(agent, Suggestion<E>{agent, action, fallback_reason});
  }
  return result;
}

/// One assessor call that replaces the suggestions of the agents named in the
/// feedback; everyone else keeps their current suggestion.
template <Environment E>
SuggestionMap<E> revise_suggestions(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem,
                                    const SuggestionMap<E>& current, const std::vector<FeedbackNote<E>>& notes) {
  if (notes.empty()) throw std::invalid_argument("revise_suggestions needs at least one feedback note");
  std::set<AgentId> named;
  std::string feedback;
  json dissenters = json::array();
  json feedback_json = json::array();
  for (const auto& n : notes) {
    named.insert(n.agent);
    feedback += n.agent.name() + " (suggested " + s.env.action_text(n.suggestion.action) + "): " + n.reason + "\n";
    feedback_json.push_back({{"agent", n.agent.name()}, {"reason", n.reason}});
  }
  std::string agents;
  for (auto a : named) {
    agents += (agents.empty() ? "" : ", ") + a.name();
    dissenters.push_back(a.name());
  }

  std::string problem;
  for (int attempt = 0; attempt <= s.grammar_reask_limit; ++attempt) {
    if (attempt > 0) {
      ++s.counters.grammar_reasks;
      s.event("grammar_reask", attempt, {{"role", "assessor"}, {"problem", problem}});
    }
    auto bindings = base_bindings(s, state, mem);
    bindings["agents"] = agents;
    bindings["suggestions"] = format_action_map(s.env, to_joint(current), "");
    bindings["feedback"] = attempt == 0 ? feedback : feedback + "Previous reply problem: " + problem + "\n";
    auto context = base_context(s, state, "revise");
    context["memory"] = memory_json(mem);
    context["suggestions"] = joint_json(s.env, to_joint(current));
    context["dissenters"] = dissenters;
    context["feedback"] = feedback_json;
    const auto role = RoleTag::assessor();
    auto ex = s.gateway.complete({role, instantiate_prompt(prompts::assessor_revision, bindings),
                                  default_params(role.kind, s.seed), std::move(context)});
    auto parsed = parse_suggestion_map(s.env, ex.response_text, named, false);
    if (auto* reply = std::get_if<SuggestionReply<E>>(&parsed)) {
      auto out = current;
      for (auto a : named) {
        auto it = reply->rationales.find(a);
        out[a] = Suggestion<E>{a, reply->actions.at(a), it == reply->rationales.end() ? "" : it->second};
      }
      return out;
    }
    problem = std::get<GrammarError>(parsed).reason;
  }
  throw GrammarLimitExceeded("revised suggestions still malformed after " + std::to_string(s.grammar_reask_limit) +
                             " re-asks: " + problem);
}

}  // namespace llamac
