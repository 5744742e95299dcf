#pragma once

// Deterministic stand-ins for the language model.
//
// ScriptedBackend answers every role from the structured request context with
// fixed oracle rules (see docs/oracle_rules.md). FaultInjectingBackend wraps
// any backend and rewrites chosen responses, which is how tests force
// conflicts, malformed replies and rejected suggestions.

#include <algorithm>
#include <numeric>

#include "llamac/env_grid.hpp"
#include "llamac/env_gs.hpp"
#include "llamac/session.hpp"

namespace llamac {
namespace oracle {

// ---------------------------------------------------------------------------
// gs rules, stated over the action sum x

struct GsSample {
  int sum = 0;
  double reward = 0.0;
};

inline std::vector<GsSample> gs_samples(const json& history) {
  std::vector<GsSample> out;
  for (const auto& h : history) out.push_back({h.at("sum").get<int>(), h.at("reward").get<double>()});
  return out;
}

inline int gs_start_sum(const GsConfig& c, std::uint64_t seed) {
  const int k = 1 + static_cast<int>(seed % 3);
  return std::clamp(c.n_agents * k, c.min_sum(), c.max_sum());
}

// Best sampled sum; ties go to the smaller sum.
inline int gs_best_sum(const std::vector<GsSample>& samples) {
  const GsSample* best = nullptr;
  for (const auto& s : samples) {
    if (!best || s.reward > best->reward || (s.reward == best->reward && s.sum < best->sum)) best = &s;
  }
  return best ? best->sum : 0;
}

struct GsProbe {
  int sum = 0;
  bool resolved = false;  // both neighbours of the best sum are explored
};

inline GsProbe gs_explore(const GsConfig& c, const std::vector<GsSample>& samples, int start) {
  if (samples.empty()) return {start, false};
  std::set<int> seen;
  for (const auto& s : samples) seen.insert(s.sum);
  const int best = gs_best_sum(samples);
  const int lo_seen = *seen.begin();
  const int hi_seen = *seen.rbegin();
  const int n = c.n_agents;
  if (best == hi_seen && best < c.max_sum()) return {std::min(best + n, c.max_sum()), false};
  if (best == lo_seen && best > c.min_sum()) return {std::max(best - n, c.min_sum()), false};
  auto above = seen.upper_bound(best);
  auto below = seen.lower_bound(best);
  const int hi = above == seen.end() ? c.max_sum() + 1 : *above;
  const int lo = below == seen.begin() ? c.min_sum() - 1 : *std::prev(below);
  const int gap_up = hi - best;
  const int gap_down = best - lo;
  if (gap_up <= 1 && gap_down <= 1) return {best + 1 <= c.max_sum() ? best + 1 : best - 1, true};
  if (gap_up >= gap_down) return {best + gap_up / 2, false};
  return {best - gap_down / 2, false};
}

inline int gs_exploit(const std::vector<GsSample>& samples, int start) {
  return samples.empty() ? start : gs_best_sum(samples);
}

// Assessor blend: follow the explorer to an untested sum while the bracket
// around the best sum is still open, except on the final round.
inline bool gs_take_explore(const GsConfig& c, const std::vector<GsSample>& samples, int start, int explore_sum) {
  const bool last_round = static_cast<int>(samples.size()) + 1 >= c.max_rounds;
  if (last_round || gs_explore(c, samples, start).resolved) return false;
  return std::none_of(samples.begin(), samples.end(), [&](const GsSample& s) { return s.sum == explore_sum; });
}

/// Splits `total` as evenly as possible; the agents receiving the remainder
/// come from a seeded permutation.
inline std::vector<int> gs_allocate(const GsConfig& c, int total, std::uint64_t seed) {
  total = std::clamp(total, c.min_sum(), c.max_sum());
  const int n = c.n_agents;
  std::vector<int> out(static_cast<std::size_t>(n), total / n);
  int rest = total % n;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  for (std::size_t i = 0; rest > 0; ++i, --rest) ++out[order[i]];
  return out;
}

inline json gs_actions_json(const std::vector<int>& alloc) {
  json out = json::object();
  for (std::size_t i = 0; i < alloc.size(); ++i) out[AgentId{i}.name()] = alloc[i];
  return out;
}

inline int gs_joint_sum(const json& joint) {
  int sum = 0;
  for (const auto& [k, v] : joint.items()) sum += v.get<int>();
  return sum;
}

// ---------------------------------------------------------------------------
// grid rules: greedy, conflict-free distance descent

inline EnvState<GridPayload> grid_state(const GridEnv& env, const json& state) {
  GridPayload p;
  p.rows = env.config().rows;
  p.cols = env.config().cols;
  p.mode = env.config().mode;
  p.targets = env.config().targets;
  for (const auto& o : state.at("objects")) {
    p.objects.push_back({o.at("id").get<std::string>(), o.at("color").get<std::string>(), o.at("row").get<int>(),
                         o.at("col").get<int>()});
  }
  p.delivered = state.at("delivered").get<std::vector<std::string>>();
  return GridEnv::make_state(state.at("step").get<std::uint64_t>(), std::move(p));
}

/// Distance gained by an action; deliveries rank above every move. Illegal
/// actions score below zero.
inline int grid_gain(const GridEnv& env, const EnvState<GridPayload>& st, AgentId a, const GridAction& action) {
  if (std::holds_alternative<NoOp>(action)) return 0;
  if (!env.is_legal(st, a, action)) return -1;
  auto check = env.distance_check(st, a, action);
  if (!check) return -1;
  if (is_delivery(action)) return 1000 + check->before;
  return check->before - check->after;
}

class GridPlanner {
 public:
  GridPlanner(const GridEnv& env, const EnvState<GridPayload>& st) : env_(env), st_(st) {}

  bool allowed(const GridAction& action) const {
    if (const auto* obj = moved_object(action); obj && objects_.contains(*obj)) return false;
    if (const auto* m = std::get_if<MoveToCorner>(&action); m && corners_.contains(m->to)) return false;
    return true;
  }

  void claim(const GridAction& action) {
    if (const auto* obj = moved_object(action)) objects_.insert(*obj);
    if (const auto* m = std::get_if<MoveToCorner>(&action)) corners_.insert(m->to);
  }

  GridAction best_for(AgentId a) const {
    GridAction best = NoOp{};
    int best_gain = 0;
    for (const auto& action : env_.legal_actions(st_, a)) {
      if (!allowed(action)) continue;
      const int g = grid_gain(env_, st_, a, action);
      if (g > best_gain) {
        best = action;
        best_gain = g;
      }
    }
    return best;
  }

 private:
  const GridEnv& env_;
  const EnvState<GridPayload>& st_;
  std::set<std::string> objects_;
  std::set<CornerPos> corners_;
};

/// Exploit visits agents in ascending order, explore in descending order, so
/// the two proposals differ whenever agents contend for an object.
inline JointAction<GridAction> grid_greedy(const GridEnv& env, const EnvState<GridPayload>& st, bool ascending) {
  GridPlanner planner(env, st);
  JointAction<GridAction> out;
  const auto n = env.agent_count();
  for (std::size_t k = 0; k < n; ++k) {
    const AgentId a{ascending ? k : n - 1 - k};
    auto action = planner.best_for(a);
    planner.claim(action);
    out.actions[a] = action;
  }
  return out;
}

inline std::optional<JointAction<GridAction>> grid_joint(const GridEnv& env, const json& j) {
  if (!j.is_object()) return std::nullopt;
  JointAction<GridAction> out;
  for (const auto& [k, v] : j.items()) {
    auto agent = parse_agent_name(k);
    auto action = env.parse_action(v);
    if (!agent || !action) return std::nullopt;
    out.actions[*agent] = *action;
  }
  if (!out.covers(env.agent_count())) return std::nullopt;
  return out;
}

/// Start from the exploit proposal and take the explore action of each
/// differing agent when it gains more and keeps the joint conflict-free.
inline JointAction<GridAction> grid_blend(const GridEnv& env, const EnvState<GridPayload>& st,
                                          const JointAction<GridAction>& explore,
                                          const JointAction<GridAction>& exploit) {
  auto out = exploit;
  for (const auto& [agent, action] : explore.actions) {
    const auto& current = out.actions.at(agent);
    if (current == action) continue;
    if (grid_gain(env, st, agent, action) <= grid_gain(env, st, agent, current)) continue;
    auto trial = out;
    trial.actions[agent] = action;
    if (env.detect_conflicts(st, trial).empty()) out = std::move(trial);
  }
  return out;
}

inline json grid_joint_json(const GridEnv& env, const JointAction<GridAction>& joint) {
  json out = json::object();
  for (const auto& [agent, action] : joint.actions) out[agent.name()] = env.format_action(action);
  return out;
}

// ---------------------------------------------------------------------------
// Reply rendering

inline std::string action_reply(const std::string& thoughts, const json& actions) {
  return thoughts + "\n```json\n" + json{{"thoughts", thoughts}, {"actions", actions}}.dump() + "\n```";
}

inline json suggestion_entries(const json& actions, const std::string& rationale) {
  json out = json::object();
  for (const auto& [k, v] : actions.items()) out[k] = {{"action", v}, {"rationale", rationale}};
  return out;
}

inline std::string verdict_pass(const json& actions, const std::string& note) {
  return json{{"verdict", "pass"}, {"note", note}, {"suggestions", suggestion_entries(actions, "blended plan")}}.dump();
}

inline std::string verdict_fail(const std::string& feedback) {
  return json{{"verdict", "fail"}, {"feedback", feedback}}.dump();
}

inline std::string suggestions_reply(const json& actions, const std::string& rationale) {
  return json{{"suggestions", suggestion_entries(actions, rationale)}}.dump();
}

inline std::string issues_feedback(const json& issues) {
  std::string out;
  for (const auto& i : issues) out += (out.empty() ? "" : "; ") + i.at("detail").get<std::string>();
  return out;
}

// ---------------------------------------------------------------------------
// Role policies

inline std::string gs_reply(const json& ctx) {
  const GsConfig c = ctx.at("config").get<GsConfig>();
  const auto seed = ctx.at("seed").get<std::uint64_t>();
  const auto& history = ctx.at("state").at("history");
  const auto samples = gs_samples(history);
  const int start = gs_start_sum(c, seed);
  const auto step = ctx.at("state").at("step").get<std::uint64_t>();
  const auto alloc_seed = splitmix64(seed + step);
  const auto phase = ctx.at("phase").get<std::string>();
  auto allocate = [&](int sum) { return gs_actions_json(gs_allocate(c, sum, alloc_seed)); };

  if (phase == "propose") {
    if (ctx.at("preference") == "explore") {
      const auto probe = gs_explore(c, samples, start);
      return action_reply("Probe total " + std::to_string(probe.sum) + ".", allocate(probe.sum));
    }
    const int sum = gs_exploit(samples, start);
    return action_reply("Repeat best total " + std::to_string(sum) + ".", allocate(sum));
  }

  if (phase == "assess" || phase == "correct") {
    const auto& proposals = ctx.at("proposals");
    const auto& explore = proposals.at("explore");
    const auto& exploit = proposals.at("exploit");
    if (phase == "assess" && !ctx.at("issues").empty()) return verdict_fail(issues_feedback(ctx.at("issues")));
    if (explore.is_null() || exploit.is_null()) {
      if (phase == "assess") return verdict_fail("a proposal could not be read");
      const auto& only = explore.is_null() ? exploit : explore;
      if (only.is_null()) return suggestions_reply(allocate(gs_exploit(samples, start)), "best known total");
      return suggestions_reply(only, "only readable proposal");
    }
    const int explore_sum = gs_joint_sum(explore);
    const bool take_explore = gs_take_explore(c, samples, start, explore_sum);
    const json& chosen = take_explore ? explore : exploit;
    const std::string note = take_explore ? "total " + std::to_string(explore_sum) + " is untested"
                                          : "total " + std::to_string(gs_joint_sum(exploit)) + " is the best known";
    if (phase == "assess") return verdict_pass(chosen, note);
    return suggestions_reply(chosen, note);
  }

  if (phase == "revise") {
    json out = json::object();
    for (const auto& a : ctx.at("dissenters")) {
      const auto name = a.get<std::string>();
      const auto& current = ctx.at("suggestions").at(name);
      out[name] = std::clamp(current.is_number_integer() ? current.get<int>() : c.action_min, c.action_min, c.action_max);
    }
    return suggestions_reply(out, "clamped into range");
  }

  if (phase == "actor_feedback") return json{{"feedback", "the suggested value is outside the allowed range"}}.dump();

  if (phase == "debate") {
    const auto debater = ctx.at("debater").get<int>();
    const int sum = debater == 0 ? gs_explore(c, samples, start).sum : gs_exploit(samples, start);
    return action_reply("Debater " + std::to_string(debater) + " argues for total " + std::to_string(sum) + ".",
                        allocate(sum));
  }

  if (phase == "decide") {
    const int sum = (gs_explore(c, samples, start).sum + gs_exploit(samples, start)) / 2;
    return action_reply("Settle on total " + std::to_string(sum) + ".", allocate(sum));
  }

  if (phase == "decentralized") {
    const auto agent = parse_agent_name(ctx.at("agent").get<std::string>()).value();
    std::vector<int> own;
    std::vector<double> rewards;
    for (const auto& h : history) {
      own.push_back(h.at("actions").at(agent.index).get<int>());
      rewards.push_back(h.at("reward").get<double>());
    }
    int next = start / c.n_agents;
    if (own.size() == 1) {
      next = own[0] + 1 <= c.action_max ? own[0] + 1 : own[0] - 1;
    } else if (own.size() >= 2) {
      const auto t = own.size() - 1;
      int dir = own[t] > own[t - 1] ? 1 : own[t] < own[t - 1] ? -1 : 1;
      if (rewards[t] < rewards[t - 1]) dir = -dir;
      next = own[t] + dir;
    }
    next = std::clamp(next, c.action_min, c.action_max);
    return action_reply("Try " + std::to_string(next) + ".", json{{agent.name(), next}});
  }

  return "no rule for phase " + phase;
}

inline std::string grid_reply(const json& ctx) {
  const GridEnv env(ctx.at("config").get<GridConfig>());
  const auto st = grid_state(env, ctx.at("state"));
  const auto phase = ctx.at("phase").get<std::string>();

  if (phase == "propose") {
    const bool explore = ctx.at("preference") == "explore";
    return action_reply(explore ? "Plan from the last agent backwards." : "Plan from the first agent forwards.",
                        grid_joint_json(env, grid_greedy(env, st, !explore)));
  }

  if (phase == "assess" || phase == "correct") {
    if (phase == "assess" && !ctx.at("issues").empty()) return verdict_fail(issues_feedback(ctx.at("issues")));
    auto explore = grid_joint(env, ctx.at("proposals").at("explore"));
    auto exploit = grid_joint(env, ctx.at("proposals").at("exploit"));
    JointAction<GridAction> chosen;
    if (explore && exploit) {
      chosen = grid_blend(env, st, *explore, *exploit);
    } else if (phase == "assess") {
      return verdict_fail("a proposal could not be read");
    } else {
      chosen = grid_greedy(env, st, true);
    }
    const auto actions = grid_joint_json(env, chosen);
    if (phase == "assess") return verdict_pass(actions, "");
    return suggestions_reply(actions, "blended plan");
  }

  if (phase == "revise") {
    auto current = grid_joint(env, ctx.at("suggestions"));
    std::set<AgentId> dissenters;
    for (const auto& a : ctx.at("dissenters")) dissenters.insert(parse_agent_name(a.get<std::string>()).value());
    GridPlanner planner(env, st);
    if (current) {
      for (const auto& [agent, action] : current->actions) {
        if (!dissenters.contains(agent)) planner.claim(action);
      }
    }
    json out = json::object();
    for (auto a : dissenters) {
      auto action = planner.best_for(a);
      planner.claim(action);
      out[a.name()] = env.format_action(action);
    }
    return suggestions_reply(out, "revised after actor feedback");
  }

  if (phase == "actor_feedback") {
    const auto agent = parse_agent_name(ctx.at("agent").get<std::string>()).value();
    const auto suggestion = env.parse_action(ctx.at("suggestion"));
    const auto& checks = ctx.at("checks");
    const auto better = GridPlanner(env, st).best_for(agent);
    std::string text;
    const auto* obj_id = suggestion ? moved_object(*suggestion) : nullptr;
    const auto* obj = obj_id ? st.payload.find_object(*obj_id) : nullptr;
    if (!checks.at("availability").at("pass").get<bool>()) {
      if (obj) {
        text = *obj_id + " is at " +
               (env.mode() == GridMode::Easy ? to_string(CellPos{obj->row, obj->col})
                                             : to_string(CornerPos{obj->row, obj->col})) +
               ", out of my reach from " + to_string(env.cell_of(agent)) + ".";
      } else {
        text = "the suggested object does not exist.";
      }
    } else {
      text = "moving " + (obj_id ? *obj_id : std::string("the object")) + " there takes it from distance " +
             std::to_string(checks.at("distance").at("before").get<int>()) + " to " +
             std::to_string(checks.at("distance").at("after").get<int>()) + ".";
    }
    text += " Better: " + render_action(better) + ".";
    return json{{"feedback", text}}.dump();
  }

  return "no rule for phase " + phase;
}

// ---------------------------------------------------------------------------
// The same rules applied in-process, with no model in the loop.

inline JointAction<GsAction> greedy_joint(const GsEnv& env, const EnvState<GsPayload>& state, std::uint64_t seed) {
  const auto& c = env.config();
  const auto samples = gs_samples(env.state_json(state).at("history"));
  const int start = gs_start_sum(c, seed);
  const int explore = gs_explore(c, samples, start).sum;
  const int sum = gs_take_explore(c, samples, start, explore) ? explore : gs_exploit(samples, start);
  const auto alloc = gs_allocate(c, sum, splitmix64(seed + state.step_index));
  JointAction<GsAction> out;
  for (std::size_t i = 0; i < alloc.size(); ++i) out.actions[AgentId{i}] = GsAction{alloc[i]};
  return out;
}

inline JointAction<GridAction> greedy_joint(const GridEnv& env, const EnvState<GridPayload>& state, std::uint64_t) {
  return grid_greedy(env, state, true);
}

inline std::string reply(const json& ctx) {
  if (!ctx.is_object() || !ctx.contains("env")) return "no context";
  return ctx.at("env") == "gs" ? gs_reply(ctx) : grid_reply(ctx);
}

}  // namespace oracle

class ScriptedBackend : public ChatBackend {
 public:
  ChatExchange complete(const ChatRequest& request) override {
    ChatExchange ex;
    ex.role = request.role;
    ex.prompt_messages = request.messages;
    ex.response_text = oracle::reply(request.context);
    ex.usage = TokenUsage::of(estimate_tokens(request.messages), estimate_tokens(ex.response_text));
    ex.latency_ms = 0;
    ex.backend_id = id();
    return ex;
  }

  std::string id() const override { return "scripted"; }
};

/// Rewrites the responses of the `first`..`first+count-1` calls (0-based,
/// counted per role kind) of one role kind. count < 0 means every call from
/// `first` on.
struct FaultRule {
  RoleKind kind = RoleKind::Assessor;
  int first = 0;
  int count = 1;
  std::function<std::string(const ChatRequest&, const std::string&)> rewrite;
};

class FaultInjectingBackend : public ChatBackend {
 public:
  FaultInjectingBackend(ChatBackend& inner, std::vector<FaultRule> rules) : inner_(inner), rules_(std::move(rules)) {}

  ChatExchange complete(const ChatRequest& request) override {
    ChatExchange ex = inner_.complete(request);
    const int index = seen_[request.role.kind]++;
    for (const auto& rule : rules_) {
      if (rule.kind != request.role.kind || index < rule.first) continue;
      if (rule.count >= 0 && index >= rule.first + rule.count) continue;
      ex.response_text = rule.rewrite(request, ex.response_text);
      ex.usage = TokenUsage::of(ex.usage.prompt_tokens, estimate_tokens(ex.response_text));
      ++injected_;
    }
    return ex;
  }

  std::string id() const override { return inner_.id(); }
  int injected() const { return injected_; }

 private:
  ChatBackend& inner_;
  std::vector<FaultRule> rules_;
  std::map<RoleKind, int> seen_;
  int injected_ = 0;
};

}  // namespace llamac
