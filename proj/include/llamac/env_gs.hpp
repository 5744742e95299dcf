#pragma once

// System resource allocation: every agent picks an integer and the whole
// system is rewarded by the Gaussian squeeze of the sum of those integers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "llamac/core.hpp"

namespace llamac {

struct NonPositiveSigma : std::domain_error {
  NonPositiveSigma() : std::domain_error("sigma must be > 0") {}
};

// R(x) = x * exp(-(x - mu)^2 / sigma^2)
inline double gaussian_squeeze(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw NonPositiveSigma{};
  const double d = x - mu;
  return x * std::exp(-(d * d) / (sigma * sigma));
}

struct GsConfig {
  int n_agents = 3;
  double mu = 7.5;
  double sigma = 1.5;
  int action_min = 0;
  int action_max = 9;
  int max_rounds = 20;

  // mu = 2.5 n, sigma = 0.5 n keeps the optimum strictly inside [0, 9 n].
  static GsConfig with_defaults(int n_agents) {
    GsConfig c;
    c.n_agents = n_agents;
    c.mu = 2.5 * n_agents;
    c.sigma = 0.5 * n_agents;
    return c;
  }

  void validate() const {
    if (n_agents < 1) throw ConfigError("gs: n_agents must be >= 1");
    if (action_min > action_max) throw ConfigError("gs: action_min > action_max");
    if (!(mu > 0.0)) throw ConfigError("gs: mu must be > 0");
    if (!(sigma > 0.0)) throw ConfigError("gs: sigma must be > 0");
    if (max_rounds < 0) throw ConfigError("gs: max_rounds must be >= 0");
  }

  int min_sum() const { return n_agents * action_min; }
  int max_sum() const { return n_agents * action_max; }

  friend bool operator==(const GsConfig&, const GsConfig&) = default;
};

inline void to_json(json& j, const GsConfig& c) {
  j = json{{"n_agents", c.n_agents}, {"mu", c.mu},        {"sigma", c.sigma},
           {"action_min", c.action_min}, {"action_max", c.action_max}, {"max_rounds", c.max_rounds}};
}

inline void from_json(const json& j, GsConfig& c) {
  j.at("n_agents").get_to(c.n_agents);
  j.at("mu").get_to(c.mu);
  j.at("sigma").get_to(c.sigma);
  j.at("action_min").get_to(c.action_min);
  j.at("action_max").get_to(c.action_max);
  j.at("max_rounds").get_to(c.max_rounds);
}

/// Positive root of 2x^2 - 2 mu x - sigma^2 = 0, the stationary point of R.
inline double gs_stationary_root(double mu, double sigma) {
  return (mu + std::sqrt(mu * mu + 2.0 * sigma * sigma)) / 2.0;
}

struct GsOptimum {
  int x_star = 0;
  double r_star = 0.0;
  double root = 0.0;          // clamped to [min_sum, max_sum]
  bool root_in_range = false;
};

// log R(x); -inf for x <= 0. Far from mu, R underflows to 0 in double while
// its logarithm still orders the sums correctly.
inline double log_gaussian_squeeze(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw NonPositiveSigma{};
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  const double d = x - mu;
  return std::log(x) - (d * d) / (sigma * sigma);
}

/// Exhaustive scan over every reachable sum, compared in log space. Ties go
/// to the smaller sum. Throws std::logic_error if the integer argmax is not
/// within 1 of the (clamped) stationary root, which would mean R is not
/// unimodal here.
inline GsOptimum brute_force_optimum(const GsConfig& config) {
  config.validate();
  GsOptimum best;
  best.x_star = config.min_sum();
  double best_log = log_gaussian_squeeze(best.x_star, config.mu, config.sigma);
  for (int x = config.min_sum() + 1; x <= config.max_sum(); ++x) {
    const double l = log_gaussian_squeeze(x, config.mu, config.sigma);
    if (l > best_log) {
      best.x_star = x;
      best_log = l;
    }
  }
  best.r_star = gaussian_squeeze(best.x_star, config.mu, config.sigma);
  const double root = gs_stationary_root(config.mu, config.sigma);
  best.root_in_range = root >= config.min_sum() && root <= config.max_sum();
  best.root = std::clamp(root, static_cast<double>(config.min_sum()),
                         static_cast<double>(config.max_sum()));
  if (std::abs(best.x_star - best.root) > 1.0) {
    throw std::logic_error("gs: integer argmax is not adjacent to the stationary root");
  }
  return best;
}

/// One integer allocation reaching `total`: fill agents in order up to the max.
inline std::vector<int> greedy_allocation(const GsConfig& config, int total) {
  std::vector<int> out(static_cast<std::size_t>(config.n_agents), config.action_min);
  int remaining = total - config.min_sum();
  for (auto& a : out) {
    const int add = std::clamp(remaining, 0, config.action_max - config.action_min);
    a += add;
    remaining -= add;
  }
  return out;
}

struct GsAction {
  int value = 0;
  friend bool operator==(const GsAction&, const GsAction&) = default;
};

struct GsRoundRecord {
  std::vector<int> actions;
  int sum_x = 0;
  double reward = 0.0;
  friend bool operator==(const GsRoundRecord&, const GsRoundRecord&) = default;
};

struct GsPayload {
  std::vector<GsRoundRecord> history;
  friend bool operator==(const GsPayload&, const GsPayload&) = default;
};

struct GsView {
  std::vector<int> own_actions;
  std::vector<double> system_rewards;
  friend bool operator==(const GsView&, const GsView&) = default;
};

inline std::string render_gs_state(const GsPayload& p) {
  std::ostringstream out;
  out << "Rounds played: " << p.history.size() << "\n";
  for (std::size_t r = 0; r < p.history.size(); ++r) {
    const auto& rec = p.history[r];
    out << "round " << (r + 1) << ": actions [";
    for (std::size_t i = 0; i < rec.actions.size(); ++i) {
      out << (i ? "," : "") << rec.actions[i];
    }
    double mean = rec.actions.empty() ? 0.0 : static_cast<double>(rec.sum_x) / rec.actions.size();
    out << "], sum " << rec.sum_x << ", average action " << format_real(mean)
        << ", system reward " << format_real(rec.reward) << "\n";
  }
  if (!p.history.empty()) {
    double total = 0.0;
    for (const auto& rec : p.history) total += rec.reward;
    out << "average system reward: " << format_real(total / p.history.size()) << "\n";
  }
  return out.str();
}

class GsEnv {
 public:
  using Payload = GsPayload;
  using View = GsView;
  using Action = GsAction;
  static constexpr std::string_view kind = "gs";

  explicit GsEnv(GsConfig config) : config_(config) { config_.validate(); }

  const GsConfig& config() const { return config_; }
  std::size_t agent_count() const { return static_cast<std::size_t>(config_.n_agents); }
  bool has_goal() const { return false; }

  // The allocation task has no random initial conditions; the seed is accepted
  // for interface uniformity.
  EnvState<Payload> initial_state(std::uint64_t /*seed*/) const { return make_state(0, {}); }

  StepOutcome<Payload> step(const EnvState<Payload>& state, const JointAction<Action>& joint) const {
    if (!joint.covers(agent_count())) {
      throw std::invalid_argument("gs: joint action must cover every agent exactly once");
    }
    GsRoundRecord rec;
    for (const auto& [agent, action] : joint.actions) {
      if (!in_range(action.value)) {
        throw IllegalAction(agent, "action " + std::to_string(action.value) + " outside [" +
                                       std::to_string(config_.action_min) + ", " +
                                       std::to_string(config_.action_max) + "]");
      }
      rec.actions.push_back(action.value);
      rec.sum_x += action.value;
    }
    rec.reward = gaussian_squeeze(rec.sum_x, config_.mu, config_.sigma);

    StepOutcome<Payload> out;
    Payload next = state.payload;
    next.history.push_back(rec);
    const bool done = static_cast<int>(next.history.size()) >= config_.max_rounds;
    out.next_state = make_state(state.step_index + 1, std::move(next));
    for (std::size_t i = 0; i < agent_count(); ++i) out.rewards[AgentId{i}] = rec.reward;
    out.done = done;
    out.goal_reached = false;
    return out;
  }

  Observation<View> observe(const EnvState<Payload>& state, AgentId agent) const {
    if (agent.index >= agent_count()) throw UnknownAgent(agent);
    Observation<View> obs;
    obs.agent = agent;
    for (const auto& rec : state.payload.history) {
      obs.payload.own_actions.push_back(rec.actions.at(agent.index));
      obs.payload.system_rewards.push_back(rec.reward);
    }
    std::ostringstream text;
    text << "You are " << agent.name() << ". Your past actions: [";
    for (std::size_t i = 0; i < obs.payload.own_actions.size(); ++i) {
      text << (i ? "," : "") << obs.payload.own_actions[i];
    }
    text << "]. System rewards: [";
    for (std::size_t i = 0; i < obs.payload.system_rewards.size(); ++i) {
      text << (i ? "," : "") << format_real(obs.payload.system_rewards[i]);
    }
    text << "].";
    obs.text = text.str();
    return obs;
  }

  std::vector<Action> legal_actions(const EnvState<Payload>&, AgentId agent) const {
    if (agent.index >= agent_count()) throw UnknownAgent(agent);
    std::vector<Action> out;
    for (int v = config_.action_min; v <= config_.action_max; ++v) out.push_back({v});
    return out;
  }

  bool is_legal(const EnvState<Payload>&, AgentId agent, const Action& action) const {
    return agent.index < agent_count() && in_range(action.value);
  }

  std::vector<Conflict> detect_conflicts(const EnvState<Payload>&, const JointAction<Action>&) const {
    return {};
  }

  std::optional<DistanceCheck> distance_check(const EnvState<Payload>&, AgentId, const Action&) const {
    return std::nullopt;
  }

  // Repeat the agent's previous action, or the lowest action on round one.
  Action fallback_action(const EnvState<Payload>& state, AgentId agent) const {
    if (state.payload.history.empty()) return {config_.action_min};
    return {state.payload.history.back().actions.at(agent.index)};
  }

  json format_action(const Action& action) const { return action.value; }
  std::string action_text(const Action& action) const { return std::to_string(action.value); }

  std::optional<Action> parse_action(const json& j) const {
    if (!j.is_number_integer()) return std::nullopt;
    return Action{j.get<int>()};
  }

  std::string action_grammar() const {
    return "a bare integer between " + std::to_string(config_.action_min) + " and " +
           std::to_string(config_.action_max);
  }

  json config_json() const { return config_; }

  json state_json(const EnvState<Payload>& state) const {
    json history = json::array();
    for (const auto& rec : state.payload.history) {
      history.push_back({{"actions", rec.actions}, {"sum", rec.sum_x}, {"reward", rec.reward}});
    }
    return {{"step", state.step_index}, {"history", history}};
  }

  static EnvState<Payload> make_state(std::uint64_t step, Payload payload) {
    EnvState<Payload> s;
    s.step_index = step;
    s.text = render_gs_state(payload);
    s.payload = std::move(payload);
    return s;
  }

 private:
  bool in_range(int v) const { return v >= config_.action_min && v <= config_.action_max; }

  GsConfig config_;
};

}  // namespace llamac
