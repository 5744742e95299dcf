#pragma once

// Per-episode plumbing shared by the critic, the actors and the baselines:
// the gateway, counters, loop-event hook and the structured context that
// accompanies every model request.

#include "llamac/backend.hpp"
#include "llamac/memory.hpp"
#include "llamac/parse.hpp"
#include "llamac/prompts.hpp"

namespace llamac {

struct GrammarLimitExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalFeedbackExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EpisodeCounters {
  int internal_feedback = 0;  // failed scrutiny rounds that produced F_if
  int external_feedback = 0;  // actor feedback notes
  int grammar_reasks = 0;
  int fallbacks = 0;
};

template <Environment E>
struct Session {
  const E& env;
  Gateway& gateway;
  std::uint64_t seed = 0;
  int grammar_reask_limit = 3;
  EpisodeCounters counters{};
  std::function<void(std::string_view kind, int iteration, const json& detail)> on_event{};

  void event(std::string_view kind, int iteration, const json& detail = json::object()) {
    if (on_event) on_event(kind, iteration, detail);
  }
};

// ---------------------------------------------------------------------------
// Task descriptions

inline std::string task_description(const GsEnv& env) {
  const auto& c = env.config();
  return "Task: " + std::to_string(c.n_agents) + " agents each choose an integer between " +
         std::to_string(c.action_min) + " and " + std::to_string(c.action_max) +
         " every round. The whole system receives one reward that depends only on the sum of all chosen integers "
         "and peaks at an unknown sum. Use the recorded rounds to find the allocation with the highest reward.";
}

inline std::string task_description(const GridEnv& env) {
  const auto& c = env.config();
  std::string out = "Task: a " + std::to_string(c.rows) + "x" + std::to_string(c.cols) +
                    " grid with one agent per cell (agent index = row * " + std::to_string(c.cols) +
                    " + col). Deliver every object to a target of the same color. ";
  if (c.mode == GridMode::Easy) {
    out += "An agent may move one object in its cell to a horizontally or vertically adjacent cell, or place it "
           "into a same-color target in its cell.";
  } else {
    out += "Objects sit on cell corners. An agent may move one object on a corner of its cell to another corner of "
           "its cell, or into a same-color target inside its cell. Two agents must never move the same object, and "
           "two different objects must never be sent to the same corner in one step.";
  }
  return out;
}

inline std::string agent_list(std::size_t n) {
  if (n == 0) return "";
  if (n == 1) return "agent_0";
  return "agent_0 .. agent_" + std::to_string(n - 1);
}

// ---------------------------------------------------------------------------
// Structured context for the scripted oracle

inline json memory_json(const DecisionMemory<GsEnv>& mem) {
  json out = json::array();
  for (const auto& t : mem.transitions()) {
    const auto& rec = t.next_state.payload.history.back();
    out.push_back({{"actions", rec.actions}, {"sum", rec.sum_x}, {"reward", rec.reward}});
  }
  return out;
}

inline json memory_json(const DecisionMemory<GridEnv>& mem) { return json{{"steps", mem.size()}}; }

template <Environment E>
json base_context(const Session<E>& s, const StateOf<E>& state, std::string_view phase) {
  return {{"env", std::string(E::kind)},
          {"config", s.env.config_json()},
          {"state", s.env.state_json(state)},
          {"phase", phase},
          {"seed", stream_seed(s.seed, "scripted")}};
}

template <Environment E>
Bindings base_bindings(const Session<E>& s, const StateOf<E>& state, const DecisionMemory<E>& mem) {
  std::string notes;
  for (const auto& n : mem.notes()) notes += "- " + n + "\n";
  if (notes.empty()) notes = "(none)";
  return {{"task", task_description(s.env)},
          {"agents", agent_list(s.env.agent_count())},
          {"action_grammar", s.env.action_grammar()},
          {"state", state.text},
          {"memory", render_memory(mem)},
          {"notes", notes}};
}

template <Environment E>
json joint_json(const E& env, const JointAction<typename E::Action>& joint) {
  json out = json::object();
  for (const auto& [agent, action] : joint.actions) out[agent.name()] = env.format_action(action);
  return out;
}

}  // namespace llamac
