#pragma once

// The episode loop: critic (internal feedback), actors (external feedback),
// one environment step, memory update; repeated until the goal, the horizon
// or a failure. Also the gs baselines and the in-process greedy method.

#include "llamac/actor.hpp"
#include "llamac/scenario.hpp"
#include "llamac/scripted.hpp"

namespace llamac {

enum class Method { Llamac, Debate, OnlyExplore, OnlyExploit, Decentralized, ScriptedGreedy };

inline constexpr std::array<Method, 6> all_methods{Method::Llamac,      Method::Debate,        Method::OnlyExplore,
                                                   Method::OnlyExploit, Method::Decentralized, Method::ScriptedGreedy};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Llamac: return "llamac";
    case Method::Debate: return "debate";
    case Method::OnlyExplore: return "only_explore";
    case Method::OnlyExploit: return "only_exploit";
    case Method::Decentralized: return "decentralized";
    case Method::ScriptedGreedy: return "scripted_greedy";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (auto m : all_methods) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

enum class FailureReason { GrammarLimit, ContextLength, StepLimit, InternalExhausted, BackendError };

inline constexpr std::array<FailureReason, 5> all_failure_reasons{
    FailureReason::GrammarLimit, FailureReason::ContextLength, FailureReason::StepLimit,
    FailureReason::InternalExhausted, FailureReason::BackendError};

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::GrammarLimit: return "GrammarLimit";
    case FailureReason::ContextLength: return "ContextLength";
    case FailureReason::StepLimit: return "StepLimit";
    case FailureReason::InternalExhausted: return "InternalExhausted";
    case FailureReason::BackendError: return "BackendError";
  }
  return "unknown";
}

inline std::optional<FailureReason> parse_failure_reason(std::string_view s) {
  for (auto r : all_failure_reasons) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

struct RunConfig {
  Scenario scenario = GsConfig{};
  Method method = Method::Llamac;
  int if_limit = 3;
  int ef_limit = 3;
  int memory_window = 0;  // 0: full history for gs, 5 for grid
  int grammar_reask_limit = 3;
  int debate_rounds = 2;
  std::int64_t context_limit = 8192;  // estimated prompt tokens; 0 disables
  std::string backend = "scripted";   // label recorded in reports
  std::uint64_t seed = 0;

  bool is_gs() const { return std::holds_alternative<GsConfig>(scenario); }

  /// Episode length T.
  int horizon() const {
    if (const auto* gs = std::get_if<GsConfig>(&scenario)) return gs->max_rounds;
    return std::get<GridConfig>(scenario).effective_max_steps();
  }

  int effective_memory_window() const {
    if (memory_window > 0) return memory_window;
    return is_gs() ? std::max(1, horizon()) : 5;
  }

  void validate() const {
    std::visit([](const auto& c) { c.validate(); }, scenario);
    if (if_limit < 1) throw ConfigError("internal feedback limit must be >= 1");
    if (ef_limit < 1) throw ConfigError("external feedback limit must be >= 1");
    if (memory_window < 0) throw ConfigError("memory window must be >= 1");
    if (grammar_reask_limit < 0) throw ConfigError("grammar re-ask limit must be >= 0");
    if (debate_rounds < 1) throw ConfigError("debate rounds must be >= 1");
    const bool gs_only = method == Method::Debate || method == Method::OnlyExplore || method == Method::OnlyExploit ||
                         method == Method::Decentralized;
    if (gs_only && !is_gs()) throw ConfigError(std::string(to_string(method)) + " runs on the gs environment only");
  }
};

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"scenario", c.scenario},
           {"method", to_string(c.method)},
           {"if_limit", c.if_limit},
           {"ef_limit", c.ef_limit},
           {"memory_window", c.memory_window},
           {"grammar_reask_limit", c.grammar_reask_limit},
           {"debate_rounds", c.debate_rounds},
           {"context_limit", c.context_limit},
           {"backend", c.backend},
           {"seed", c.seed}};
}

inline void from_json(const json& j, RunConfig& c) {
  j.at("scenario").get_to(c.scenario);
  auto m = parse_method(j.at("method").get<std::string>());
  if (!m) throw ConfigError("unknown method " + j.at("method").dump());
  c.method = *m;
  j.at("if_limit").get_to(c.if_limit);
  j.at("ef_limit").get_to(c.ef_limit);
  j.at("memory_window").get_to(c.memory_window);
  j.at("grammar_reask_limit").get_to(c.grammar_reask_limit);
  j.at("debate_rounds").get_to(c.debate_rounds);
  j.at("context_limit").get_to(c.context_limit);
  j.at("backend").get_to(c.backend);
  j.at("seed").get_to(c.seed);
}

struct EpisodeResult {
  std::string method;
  std::string env;
  std::string size;
  std::uint64_t seed = 0;
  bool success = false;
  std::optional<FailureReason> failure_reason;
  std::string failure_detail;
  int steps = 0;
  int feedback_count = 0;  // internal + external
  int internal_feedback = 0;
  int external_feedback = 0;
  int grammar_reasks = 0;
  int fallbacks = 0;
  std::int64_t llm_calls = 0;
  std::map<std::string, TokenUsage> token_usage;  // by role kind
  std::vector<double> reward_trace;
  std::string transcript_path;

  TokenUsage total_tokens() const {
    TokenUsage out;
    for (const auto& [role, usage] : token_usage) out += usage;
    return out;
  }

  double final_reward() const { return reward_trace.empty() ? 0.0 : reward_trace.back(); }

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

inline void to_json(json& j, const EpisodeResult& r) {
  j = json{{"method", r.method},
           {"env", r.env},
           {"size", r.size},
           {"seed", r.seed},
           {"success", r.success},
           {"failure_reason", r.failure_reason ? json(to_string(*r.failure_reason)) : json(nullptr)},
           {"failure_detail", r.failure_detail},
           {"steps", r.steps},
           {"feedback_count", r.feedback_count},
           {"internal_feedback", r.internal_feedback},
           {"external_feedback", r.external_feedback},
           {"grammar_reasks", r.grammar_reasks},
           {"fallbacks", r.fallbacks},
           {"llm_calls", r.llm_calls},
           {"token_usage", r.token_usage},
           {"reward_trace", r.reward_trace},
           {"transcript_path", r.transcript_path}};
}

inline void from_json(const json& j, EpisodeResult& r) {
  j.at("method").get_to(r.method);
  j.at("env").get_to(r.env);
  j.at("size").get_to(r.size);
  j.at("seed").get_to(r.seed);
  j.at("success").get_to(r.success);
  r.failure_reason.reset();
  if (!j.at("failure_reason").is_null()) r.failure_reason = parse_failure_reason(j.at("failure_reason").get<std::string>());
  j.at("failure_detail").get_to(r.failure_detail);
  j.at("steps").get_to(r.steps);
  j.at("feedback_count").get_to(r.feedback_count);
  j.at("internal_feedback").get_to(r.internal_feedback);
  j.at("external_feedback").get_to(r.external_feedback);
  j.at("grammar_reasks").get_to(r.grammar_reasks);
  j.at("fallbacks").get_to(r.fallbacks);
  j.at("llm_calls").get_to(r.llm_calls);
  j.at("token_usage").get_to(r.token_usage);
  j.at("reward_trace").get_to(r.reward_trace);
  j.at("transcript_path").get_to(r.transcript_path);
}

/// Observers for everything an episode produces, in order.
struct EpisodeHooks {
  std::function<void(const ChatExchange&)> on_exchange;
  std::function<void(std::string_view kind, std::uint64_t step, int iteration, const json& detail)> on_event;
  std::function<void(const json&)> on_transition;
};

struct Episode {
  EpisodeResult result;
  std::vector<json> transitions;
};

namespace detail {

/// One model call that must yield actions for `required` agents; malformed
/// replies are re-asked up to the session's limit.
template <Environment E>
JointOf<E> ask_actions(Session<E>& s, RoleTag role, const PromptTemplate& tpl, Bindings bindings, const json& context,
                       const std::set<AgentId>& required) {
  std::string problem;
  for (int attempt = 0; attempt <= s.grammar_reask_limit; ++attempt) {
    if (attempt > 0) {
      ++s.counters.grammar_reasks;
      s.event("grammar_reask", attempt, {{"role", role.str()}, {"problem", problem}});
    }
    auto messages = instantiate_prompt(tpl, bindings);
    if (attempt > 0) messages.push_back({"user", "Your previous reply was rejected: " + problem});
    auto ex = s.gateway.complete({role, std::move(messages), default_params(role.kind, s.seed), context});
    JointOf<E> joint;
    auto block = parse_structured(ex.response_text, Schema::ActionMap, [&](const json& j) -> std::string {
      if (!j.contains("actions")) return "missing \"actions\"";
      std::map<AgentId, typename E::Action> actions;
      auto why = read_agent_map(s.env, j.at("actions"), required, true, actions, nullptr);
      if (why.empty()) joint.actions = std::move(actions);
      return why;
    });
    if (std::holds_alternative<json>(block)) return joint;
    problem = std::get<GrammarError>(block).reason;
  }
  throw GrammarLimitExceeded(role.str() + " reply still malformed after " + std::to_string(s.grammar_reask_limit) +
                             " re-asks: " + problem);
}

template <Environment E>
JointOf<E> single_proposer(Session<E>& s, Preference pref, const StateOf<E>& state, const DecisionMemory<E>& mem) {
  std::optional<std::string> feedback;
  for (int attempt = 0; attempt <= s.grammar_reask_limit; ++attempt) {
    if (attempt > 0) {
      ++s.counters.grammar_reasks;
      s.event("grammar_reask", attempt, {{"role", std::string(to_string(pref))}, {"problem", *feedback}});
    }
    auto p = propose(s, pref, state, mem, feedback);
    if (p.joint) return *p.joint;
    feedback = "Your previous reply could not be read: " + p.grammar->reason;
  }
  throw GrammarLimitExceeded("proposer reply still malformed after " + std::to_string(s.grammar_reask_limit) +
                             " re-asks");
}

template <Environment E>
JointOf<E> debate(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem, int rounds) {
  const auto everyone = all_agents(s.env);
  json record = json::array();
  std::string text;
  auto turn = [&](std::size_t debater, const std::string& round, std::string_view phase) {
    auto bindings = base_bindings(s, state, mem);
    bindings["debater"] = std::to_string(debater);
    bindings["round"] = round;
    bindings["debate"] = text.empty() ? "(none)" : text;
    auto context = base_context(s, state, phase);
    context["debater"] = debater;
    context["debate"] = record;
    auto joint = ask_actions(s, RoleTag::debater(debater), prompts::debater, bindings, context, everyone);
    return joint;
  };
  for (int r = 1; r <= rounds; ++r) {
    for (std::size_t d = 0; d < 2; ++d) {
      auto joint = turn(d, std::to_string(r), "debate");
      record.push_back({{"debater", d}, {"round", r}, {"actions", joint_json(s.env, joint)}});
      text += "debater " + std::to_string(d) + ", round " + std::to_string(r) + ": " +
              format_action_map(s.env, joint, "") + "\n";
    }
  }
  return turn(0, "final", "decide");
}

template <Environment E>
JointOf<E> decentralized(Session<E>& s, const StateOf<E>& state) {
  JointOf<E> out;
  for (std::size_t i = 0; i < s.env.agent_count(); ++i) {
    const AgentId a{i};
    const auto obs = s.env.observe(state, a);
    Bindings bindings{{"agent", a.name()},
                      {"task", task_description(s.env)},
                      {"action_grammar", s.env.action_grammar()},
                      {"observation", obs.text}};
    auto context = base_context(s, state, "decentralized");
    context["agent"] = a.name();
    auto joint = ask_actions(s, RoleTag::actor(a), prompts::decentralized_agent, bindings, context, {a});
    out.actions[a] = joint.actions.at(a);
  }
  return out;
}

/// Cross-agent conflicts cannot be seen by individual confirmations, so the
/// final joint action is checked once more: one revision for all but the
/// lowest-index agent of every conflict, then fallback for whoever still
/// conflicts.
template <Environment E>
JointOf<E> final_conflict_check(Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem,
                                JointOf<E> joint) {
  auto conflicts = s.env.detect_conflicts(state, joint);
  if (conflicts.empty()) return joint;
  SuggestionMap<E> current;
  for (const auto& [a, action] : joint.actions) current.emplace(a, Suggestion<E>{a, action, ""});
  std::set<AgentId> movers;
  for (const auto& c : conflicts) movers.insert(c.agents.begin() + 1, c.agents.end());
  std::vector<FeedbackNote<E>> notes;
  for (auto a : movers) notes.push_back({a, current.at(a), "joint action conflict: " + conflicts.front().detail});
  s.event("final_conflict", 1, {{"conflicts", conflicts.size()}});
  s.counters.external_feedback += static_cast<int>(notes.size());
  joint = to_joint(revise_suggestions(s, state, mem, current, notes));
  for (conflicts = s.env.detect_conflicts(state, joint); !conflicts.empty();
       conflicts = s.env.detect_conflicts(state, joint)) {
    for (auto it = conflicts.front().agents.begin() + 1; it != conflicts.front().agents.end(); ++it) {
      joint.actions[*it] = s.env.fallback_action(state, *it);
      ++s.counters.fallbacks;
    }
  }
  return joint;
}

/// Out-of-range actions would abort a gs round; they take the fallback.
template <Environment E>
JointOf<E> sanitize(Session<E>& s, const StateOf<E>& state, JointOf<E> joint) {
  for (auto& [a, action] : joint.actions) {
    if (!s.env.is_legal(state, a, action)) {
      s.event("sanitized", 0, {{"agent", a.name()}, {"action", s.env.format_action(action)}});
      action = s.env.fallback_action(state, a);
      ++s.counters.fallbacks;
    }
  }
  return joint;
}

template <Environment E>
json transition_json(const E& env, const TransitionOf<E>& t, const StepOutcome<typename E::Payload>& outcome,
                     const DecisionMemory<E>& mem) {
  json rewards = json::array();
  for (const auto& [a, r] : t.rewards) rewards.push_back(r);
  return {{"step", t.state.step_index},
          {"state", env.state_json(t.state)},
          {"joint", joint_json(env, t.joint_action)},
          {"rewards", rewards},
          {"next_state", env.state_json(t.next_state)},
          {"done", outcome.done},
          {"goal_reached", outcome.goal_reached},
          {"warnings", outcome.warnings},
          {"memory", render_memory(mem)}};
}

}  // namespace detail

template <Environment E>
JointOf<E> decide(Session<E>& s, const RunConfig& cfg, const StateOf<E>& state, DecisionMemory<E>& mem) {
  switch (cfg.method) {
    case Method::Llamac: {
      auto internal = internal_feedback_loop(s, state, mem, cfg.if_limit);
      auto external = external_feedback_loop(s, state, mem, std::move(internal.suggestions), cfg.ef_limit);
      return detail::final_conflict_check(s, state, mem, std::move(external.joint));
    }
    case Method::OnlyExplore: return detail::single_proposer(s, Preference::Explore, state, mem);
    case Method::OnlyExploit: return detail::single_proposer(s, Preference::Exploit, state, mem);
    case Method::Debate: return detail::debate(s, state, mem, cfg.debate_rounds);
    case Method::Decentralized: return detail::decentralized(s, state);
    case Method::ScriptedGreedy: return oracle::greedy_joint(s.env, state, stream_seed(s.seed, "scripted"));
  }
  throw ConfigError("unknown method");
}

template <Environment E>
Episode run_episode_on(const E& env, const RunConfig& cfg, ChatBackend& backend, const EpisodeHooks& hooks = {}) {
  Episode episode;
  auto& r = episode.result;
  r.method = to_string(cfg.method);
  r.env = env_name(cfg.scenario);
  r.size = size_label(cfg.scenario);
  r.seed = cfg.seed;

  Gateway gateway(backend, cfg.context_limit, [&](const ChatExchange& ex) {
    r.token_usage[std::string(to_string(ex.role.kind))] += ex.usage;
    ++r.llm_calls;
    if (hooks.on_exchange) hooks.on_exchange(ex);
  });
  Session<E> s{env, gateway, cfg.seed, cfg.grammar_reask_limit};
  std::uint64_t step = 0;
  s.on_event = [&](std::string_view kind, int iteration, const json& detail) {
    if (hooks.on_event) hooks.on_event(kind, step, iteration, detail);
  };

  auto state = environment_reset(env, stream_seed(cfg.seed, "env")).state;
  DecisionMemory<E> mem(static_cast<std::size_t>(cfg.effective_memory_window()));
  const auto horizon = static_cast<std::uint64_t>(std::max(0, cfg.horizon()));
  bool done = false;
  bool goal = false;

  auto fail = [&](FailureReason reason, const std::string& detail) {
    r.failure_reason = reason;
    r.failure_detail = detail;
  };

  try {
    while (!done && state.step_index < horizon) {
      step = state.step_index;
      auto joint = detail::sanitize(s, state, decide(s, cfg, state, mem));
      auto outcome = env.step(state, joint);
      TransitionOf<E> rec{state, std::move(joint), outcome.rewards, outcome.next_state};
      mem.push(rec);
      for (const auto& w : outcome.warnings) s.event("illegal_action", 0, {{"warning", w}});
      r.reward_trace.push_back(outcome.rewards.empty() ? 0.0 : outcome.rewards.begin()->second);
      auto record = detail::transition_json(env, rec, outcome, mem);
      if (hooks.on_transition) hooks.on_transition(record);
      episode.transitions.push_back(std::move(record));
      state = outcome.next_state;
      done = outcome.done;
      goal = outcome.goal_reached;
    }
    const bool reached = env.has_goal() ? goal : (horizon > 0 && state.step_index >= horizon);
    if (!reached) fail(FailureReason::StepLimit, "no goal within " + std::to_string(horizon) + " steps");
  } catch (const GrammarLimitExceeded& e) {
    fail(FailureReason::GrammarLimit, e.what());
  } catch (const ContextLengthExceeded& e) {
    fail(FailureReason::ContextLength, e.what());
  } catch (const InternalFeedbackExhausted& e) {
    fail(FailureReason::InternalExhausted, e.what());
  } catch (const std::exception& e) {
    fail(FailureReason::BackendError, e.what());
  }

  r.success = !r.failure_reason.has_value();
  r.steps = static_cast<int>(state.step_index);
  r.internal_feedback = s.counters.internal_feedback;
  r.external_feedback = s.counters.external_feedback;
  r.feedback_count = r.internal_feedback + r.external_feedback;
  r.grammar_reasks = s.counters.grammar_reasks;
  r.fallbacks = s.counters.fallbacks;
  return episode;
}

/// Validates the config (ConfigError on failure), then runs one episode.
/// Everything that goes wrong after that is reported as a failure reason.
inline Episode run_episode(const RunConfig& cfg, ChatBackend& backend, const EpisodeHooks& hooks = {}) {
  cfg.validate();
  if (const auto* gs = std::get_if<GsConfig>(&cfg.scenario)) return run_episode_on(GsEnv(*gs), cfg, backend, hooks);
  return run_episode_on(GridEnv(std::get<GridConfig>(cfg.scenario)), cfg, backend, hooks);
}

/// Seed of trial k in a batch; depends only on the base seed and k.
inline std::uint64_t trial_seed(std::uint64_t base, int k) { return splitmix64(base + static_cast<std::uint64_t>(k)); }

}  // namespace llamac
