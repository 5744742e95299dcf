#pragma once

// Shared vocabulary for every environment: agents, states, observations,
// joint actions and transition records, plus the Environment concept that
// the critic/actor/orchestrator templates are written against.

#include <charconv>
#include <compare>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace llamac {

using json = nlohmann::json;

struct AgentId {
  std::size_t index = 0;

  friend auto operator<=>(const AgentId&, const AgentId&) = default;

  std::string name() const { return "agent_" + std::to_string(index); }
};

// Inverse of AgentId::name(). Accepts "agent_<k>" only.
inline std::optional<AgentId> parse_agent_name(std::string_view text) {
  constexpr std::string_view prefix = "agent_";
  if (text.size() <= prefix.size() || text.substr(0, prefix.size()) != prefix) {
    return std::nullopt;
  }
  auto digits = text.substr(prefix.size());
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    return std::nullopt;
  }
  return AgentId{value};
}

template <class Payload>
struct EnvState {
  std::uint64_t step_index = 0;
  Payload payload;
  std::string text;  // always render(payload)

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

template <class View>
struct Observation {
  AgentId agent;
  View payload;
  std::string text;

  friend bool operator==(const Observation&, const Observation&) = default;
};

template <class Action>
struct JointAction {
  std::map<AgentId, Action> actions;

  friend bool operator==(const JointAction&, const JointAction&) = default;

  bool covers(std::size_t agent_count) const {
    if (actions.size() != agent_count) return false;
    for (std::size_t i = 0; i < agent_count; ++i) {
      if (!actions.contains(AgentId{i})) return false;
    }
    return true;
  }
};

using RewardMap = std::map<AgentId, double>;

template <class Payload>
struct StepOutcome {
  EnvState<Payload> next_state;
  RewardMap rewards;
  bool done = false;
  bool goal_reached = false;
  std::vector<std::string> warnings;  // illegal actions degraded to no-op
};

template <class Payload, class Action>
struct TransitionRecord {
  EnvState<Payload> state;
  JointAction<Action> joint_action;
  RewardMap rewards;
  EnvState<Payload> next_state;

  friend bool operator==(const TransitionRecord&, const TransitionRecord&) = default;
};

enum class ConflictKind { SameObjectMultiMove, DestinationCollision };

inline std::string_view to_string(ConflictKind kind) {
  return kind == ConflictKind::SameObjectMultiMove ? "SameObjectMultiMove" : "DestinationCollision";
}

struct Conflict {
  ConflictKind kind = ConflictKind::SameObjectMultiMove;
  std::vector<AgentId> agents;  // ascending
  std::string detail;

  friend bool operator==(const Conflict&, const Conflict&) = default;
};

// Result of the actor-side distance rule. Environments without a distance
// notion return std::nullopt, which counts as a pass.
struct DistanceCheck {
  bool pass = true;
  int before = 0;
  int after = 0;
};

// ---------------------------------------------------------------------------
// Errors

struct IllegalAction : std::runtime_error {
  IllegalAction(AgentId agent, const std::string& reason)
      : std::runtime_error(agent.name() + ": " + reason), agent(agent) {}
  AgentId agent;
};

struct UnknownAgent : std::out_of_range {
  explicit UnknownAgent(AgentId agent) : std::out_of_range("unknown agent " + agent.name()) {}
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Environment concept

template <class E>
concept Environment = requires(const E& env, const EnvState<typename E::Payload>& state,
                               const JointAction<typename E::Action>& joint,
                               const typename E::Action& action, AgentId agent,
                               std::uint64_t seed, const json& j) {
  typename E::Payload;
  typename E::View;
  typename E::Action;
  { E::kind } -> std::convertible_to<std::string_view>;
  { env.agent_count() } -> std::convertible_to<std::size_t>;
  { env.has_goal() } -> std::convertible_to<bool>;
  { env.initial_state(seed) } -> std::same_as<EnvState<typename E::Payload>>;
  { env.step(state, joint) } -> std::same_as<StepOutcome<typename E::Payload>>;
  { env.observe(state, agent) } -> std::same_as<Observation<typename E::View>>;
  { env.legal_actions(state, agent) } -> std::same_as<std::vector<typename E::Action>>;
  { env.is_legal(state, agent, action) } -> std::convertible_to<bool>;
  { env.detect_conflicts(state, joint) } -> std::same_as<std::vector<Conflict>>;
  { env.distance_check(state, agent, action) } -> std::same_as<std::optional<DistanceCheck>>;
  { env.fallback_action(state, agent) } -> std::same_as<typename E::Action>;
  { env.format_action(action) } -> std::same_as<json>;
  { env.action_text(action) } -> std::same_as<std::string>;
  { env.parse_action(j) } -> std::same_as<std::optional<typename E::Action>>;
  { env.action_grammar() } -> std::same_as<std::string>;
  { env.config_json() } -> std::same_as<json>;
  { env.state_json(state) } -> std::same_as<json>;
};

template <Environment E>
using StateOf = EnvState<typename E::Payload>;

template <Environment E>
using JointOf = JointAction<typename E::Action>;

template <Environment E>
using TransitionOf = TransitionRecord<typename E::Payload, typename E::Action>;

template <Environment E>
struct ResetResult {
  StateOf<E> state;
  std::map<AgentId, Observation<typename E::View>> observations;
};

// Initial state plus one observation per agent. Same seed, same result.
template <Environment E>
ResetResult<E> environment_reset(const E& env, std::uint64_t seed) {
  ResetResult<E> out{env.initial_state(seed), {}};
  for (std::size_t i = 0; i < env.agent_count(); ++i) {
    out.observations.emplace(AgentId{i}, env.observe(out.state, AgentId{i}));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small deterministic helpers shared by the environments and backends.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Portable generator: the same seed yields the same sequence on every
// platform, unlike the std distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % bound;
  }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Seed for a named consumer (env, scripted backend, ...) of an episode seed.
inline std::uint64_t stream_seed(std::uint64_t episode_seed, std::string_view stream) {
  return splitmix64(episode_seed ^ fnv1a64(stream));
}

// Shortest round-trip decimal rendering; locale independent.
inline std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

}  // namespace llamac
