#pragma once

// Grid transportation. One agent per cell; objects are carried to any target
// of the same color. Easy moves objects between adjacent cells; Hard moves them
// along the corner lattice, which is where inter-agent conflicts arise.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>
#include <variant>

#include "llamac/core.hpp"

namespace llamac {

enum class GridMode { Easy, Hard };

inline std::string_view to_string(GridMode mode) { return mode == GridMode::Easy ? "easy" : "hard"; }

inline std::optional<GridMode> parse_grid_mode(std::string_view s) {
  if (s == "easy") return GridMode::Easy;
  if (s == "hard") return GridMode::Hard;
  return std::nullopt;
}

struct CellPos {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const CellPos&, const CellPos&) = default;
};

struct CornerPos {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const CornerPos&, const CornerPos&) = default;
};

inline std::string to_string(CellPos p) {
  return "cell(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")";
}
inline std::string to_string(CornerPos p) {
  return "corner(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")";
}

// Top-left, top-right, bottom-left, bottom-right.
inline std::array<CornerPos, 4> corners_of(CellPos c) {
  return {CornerPos{c.row, c.col}, CornerPos{c.row, c.col + 1}, CornerPos{c.row + 1, c.col},
          CornerPos{c.row + 1, c.col + 1}};
}

inline int l1(int r0, int c0, int r1, int c1) { return std::abs(r0 - r1) + std::abs(c0 - c1); }

// Position is a cell in Easy and a corner in Hard.
struct GridObject {
  std::string id;
  std::string color;
  int row = 0;
  int col = 0;
  friend bool operator==(const GridObject&, const GridObject&) = default;
};

struct GridTarget {
  std::string id;
  std::string color;
  CellPos cell;
  friend bool operator==(const GridTarget&, const GridTarget&) = default;
};

struct GridConfig {
  int rows = 1;
  int cols = 1;
  GridMode mode = GridMode::Easy;
  std::vector<GridObject> objects;
  std::vector<GridTarget> targets;
  int max_steps = 0;  // 0 selects default_max_steps()

  int cells() const { return rows * cols; }

  int default_max_steps() const { return (mode == GridMode::Easy ? 10 : 15) * cells(); }
  int effective_max_steps() const { return max_steps > 0 ? max_steps : default_max_steps(); }

  void validate() const {
    if (rows < 1 || cols < 1) throw ConfigError("grid: rows and cols must be >= 1");
    const int max_r = mode == GridMode::Easy ? rows - 1 : rows;
    const int max_c = mode == GridMode::Easy ? cols - 1 : cols;
    std::set<std::string> ids;
    for (const auto& t : targets) {
      if (!ids.insert(t.id).second) throw ConfigError("grid: duplicate id " + t.id);
      if (t.cell.row < 0 || t.cell.row >= rows || t.cell.col < 0 || t.cell.col >= cols) {
        throw ConfigError("grid: target " + t.id + " out of bounds");
      }
    }
    for (const auto& o : objects) {
      if (!ids.insert(o.id).second) throw ConfigError("grid: duplicate id " + o.id);
      if (o.row < 0 || o.row > max_r || o.col < 0 || o.col > max_c) {
        throw ConfigError("grid: object " + o.id + " out of bounds");
      }
      const bool matched = std::any_of(targets.begin(), targets.end(),
                                       [&](const GridTarget& t) { return t.color == o.color; });
      if (!matched) throw ConfigError("grid: object " + o.id + " has no matching target");
    }
    if (max_steps < 0) throw ConfigError("grid: max_steps must be >= 0");
  }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

// ---------------------------------------------------------------------------
// Actions

struct NoOp {
  friend bool operator==(const NoOp&, const NoOp&) = default;
};
struct MoveToCell {
  std::string object_id;
  CellPos to;
  friend bool operator==(const MoveToCell&, const MoveToCell&) = default;
};
struct PlaceInTarget {
  std::string object_id;
  std::string target_id;
  friend bool operator==(const PlaceInTarget&, const PlaceInTarget&) = default;
};
struct MoveToCorner {
  std::string object_id;
  CornerPos to;
  friend bool operator==(const MoveToCorner&, const MoveToCorner&) = default;
};
struct MoveToTarget {
  std::string object_id;
  std::string target_id;
  friend bool operator==(const MoveToTarget&, const MoveToTarget&) = default;
};

using GridAction = std::variant<NoOp, MoveToCell, PlaceInTarget, MoveToCorner, MoveToTarget>;

inline const std::string* moved_object(const GridAction& a) {
  return std::visit(
      [](const auto& v) -> const std::string* {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, NoOp>) {
          return nullptr;
        } else {
          return &v.object_id;
        }
      },
      a);
}

inline bool is_delivery(const GridAction& a) {
  return std::holds_alternative<PlaceInTarget>(a) || std::holds_alternative<MoveToTarget>(a);
}

inline std::string render_action(const GridAction& a) {
  struct Visitor {
    std::string operator()(const NoOp&) const { return "noop"; }
    std::string operator()(const MoveToCell& m) const { return "move(" + m.object_id + ", " + to_string(m.to) + ")"; }
    std::string operator()(const PlaceInTarget& m) const { return "move(" + m.object_id + ", target(" + m.target_id + "))"; }
    std::string operator()(const MoveToCorner& m) const { return "move(" + m.object_id + ", " + to_string(m.to) + ")"; }
    std::string operator()(const MoveToTarget& m) const { return "move(" + m.object_id + ", target(" + m.target_id + "))"; }
  };
  return std::visit(Visitor{}, a);
}

namespace detail {

// Recursive-descent reader for the action terms produced by render_action.
class TermReader {
 public:
  explicit TermReader(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool eat(std::string_view lit) {
    skip_ws();
    if (s_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }
  std::optional<std::string> ident() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (pos_ == start) return std::nullopt;
    return std::string(s_.substr(start, pos_ - start));
  }
  std::optional<int> integer() {
    skip_ws();
    int v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{}) return std::nullopt;
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }
  bool at_end() {
    skip_ws();
    return pos_ == s_.size();
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses `noop`, `move(obj, cell(r,c))`, `move(obj, corner(r,c))` and
/// `move(obj, target(tgt))`. Target moves become PlaceInTarget in Easy and
/// MoveToTarget in Hard; cell moves are Easy only, corner moves Hard only.
inline std::optional<GridAction> parse_grid_action(std::string_view text, GridMode mode) {
  detail::TermReader in(text);
  if (in.eat("noop")) return in.at_end() ? std::optional<GridAction>(NoOp{}) : std::nullopt;
  if (!in.eat("move") || !in.eat("(")) return std::nullopt;
  auto obj = in.ident();
  if (!obj || !in.eat(",")) return std::nullopt;
  std::optional<GridAction> out;
  if (in.eat("target")) {
    if (!in.eat("(")) return std::nullopt;
    auto tgt = in.ident();
    if (!tgt || !in.eat(")")) return std::nullopt;
    if (mode == GridMode::Easy) {
      out = PlaceInTarget{*obj, *tgt};
    } else {
      out = MoveToTarget{*obj, *tgt};
    }
  } else {
    const bool cell = in.eat("cell");
    if (!cell && !in.eat("corner")) return std::nullopt;
    if (!in.eat("(")) return std::nullopt;
    auto r = in.integer();
    if (!r || !in.eat(",")) return std::nullopt;
    auto c = in.integer();
    if (!c || !in.eat(")")) return std::nullopt;
    if (cell && mode == GridMode::Easy) {
      out = MoveToCell{*obj, CellPos{*r, *c}};
    } else if (!cell && mode == GridMode::Hard) {
      out = MoveToCorner{*obj, CornerPos{*r, *c}};
    } else {
      return std::nullopt;
    }
  }
  if (!in.eat(")") || !in.at_end()) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// State

struct GridPayload {
  int rows = 1;
  int cols = 1;
  GridMode mode = GridMode::Easy;
  std::vector<GridObject> objects;  // undelivered, sorted by id
  std::vector<GridTarget> targets;
  std::vector<std::string> delivered;  // in delivery order

  friend bool operator==(const GridPayload&, const GridPayload&) = default;

  const GridObject* find_object(std::string_view id) const {
    for (const auto& o : objects) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }
  const GridTarget* find_target(std::string_view id) const {
    for (const auto& t : targets) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
};

struct GridView {
  CellPos cell;
  std::vector<GridObject> objects;  // in the cell (Easy) or on its corners (Hard)
  std::vector<GridTarget> targets;  // in the cell
  std::vector<GridAction> actions;
  friend bool operator==(const GridView&, const GridView&) = default;
};

struct UnknownObject : std::out_of_range {
  explicit UnknownObject(const std::string& id) : std::out_of_range("unknown object " + id) {}
};

struct ConflictingJointAction : std::logic_error {
  explicit ConflictingJointAction(const std::string& what) : std::logic_error(what) {}
};

/// Distance from a hypothetical position of an object of `color` to the
/// nearest matching target. Easy: cell L1. Hard: corner-lattice L1 to the
/// closest corner of a target cell. Returns -1 if no target matches.
inline int distance_to_nearest_target(const GridPayload& p, std::string_view color, int row, int col) {
  int best = -1;
  for (const auto& t : p.targets) {
    if (t.color != color) continue;
    int d = 0;
    if (p.mode == GridMode::Easy) {
      d = l1(row, col, t.cell.row, t.cell.col);
    } else {
      d = std::numeric_limits<int>::max();
      for (auto c : corners_of(t.cell)) d = std::min(d, l1(row, col, c.row, c.col));
    }
    if (best < 0 || d < best) best = d;
  }
  return best;
}

inline int manhattan_to_target(const GridPayload& p, std::string_view object_id) {
  const auto* obj = p.find_object(object_id);
  if (!obj) throw UnknownObject(std::string(object_id));
  return distance_to_nearest_target(p, obj->color, obj->row, obj->col);
}

inline std::string render_grid_state(const GridPayload& p) {
  std::ostringstream out;
  out << "grid " << p.rows << "x" << p.cols << " " << to_string(p.mode) << "\n";
  if (p.objects.empty()) out << "objects: none\n";
  auto objects = p.objects;
  std::sort(objects.begin(), objects.end(), [](const GridObject& a, const GridObject& b) {
    return std::tie(a.row, a.col, a.id) < std::tie(b.row, b.col, b.id);
  });
  for (const auto& o : objects) {
    out << "object " << o.id << " " << o.color << " at "
        << (p.mode == GridMode::Easy ? to_string(CellPos{o.row, o.col}) : to_string(CornerPos{o.row, o.col}))
        << "\n";
  }
  if (p.targets.empty()) out << "targets: none\n";
  auto targets = p.targets;
  std::sort(targets.begin(), targets.end(), [](const GridTarget& a, const GridTarget& b) {
    return std::tie(a.cell, a.id) < std::tie(b.cell, b.id);
  });
  for (const auto& t : targets) {
    out << "target " << t.id << " " << t.color << " at " << to_string(t.cell) << "\n";
  }
  if (!p.delivered.empty()) {
    out << "delivered:";
    for (const auto& d : p.delivered) out << " " << d;
    out << "\n";
  }
  return out.str();
}

class GridEnv {
 public:
  using Payload = GridPayload;
  using View = GridView;
  using Action = GridAction;
  static constexpr std::string_view kind = "grid";

  explicit GridEnv(GridConfig config) : config_(std::move(config)) { config_.validate(); }

  const GridConfig& config() const { return config_; }
  GridMode mode() const { return config_.mode; }
  std::size_t agent_count() const { return static_cast<std::size_t>(config_.cells()); }
  bool has_goal() const { return true; }
  int max_steps() const { return config_.effective_max_steps(); }

  CellPos cell_of(AgentId agent) const {
    return CellPos{static_cast<int>(agent.index) / config_.cols, static_cast<int>(agent.index) % config_.cols};
  }
  AgentId agent_at(CellPos cell) const {
    return AgentId{static_cast<std::size_t>(cell.row * config_.cols + cell.col)};
  }

  // Placement comes from the scenario; the seed only matters to generators.
  EnvState<Payload> initial_state(std::uint64_t /*seed*/) const {
    Payload p;
    p.rows = config_.rows;
    p.cols = config_.cols;
    p.mode = config_.mode;
    p.objects = config_.objects;
    std::sort(p.objects.begin(), p.objects.end(),
              [](const GridObject& a, const GridObject& b) { return a.id < b.id; });
    p.targets = config_.targets;
    return make_state(0, std::move(p));
  }

  std::vector<Action> legal_actions(const EnvState<Payload>& state, AgentId agent) const {
    check_agent(agent);
    const auto& p = state.payload;
    const CellPos cell = cell_of(agent);
    std::vector<Action> out;
    if (p.mode == GridMode::Easy) {
      static constexpr std::array<std::pair<int, int>, 4> dirs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
      for (const auto& o : p.objects) {
        if (o.row != cell.row || o.col != cell.col) continue;
        for (auto [dr, dc] : dirs) {
          CellPos to{cell.row + dr, cell.col + dc};
          if (to.row < 0 || to.row >= p.rows || to.col < 0 || to.col >= p.cols) continue;
          out.push_back(MoveToCell{o.id, to});
        }
        for (const auto& t : p.targets) {
          if (t.cell == cell && t.color == o.color) out.push_back(PlaceInTarget{o.id, t.id});
        }
      }
    } else {
      const auto corners = corners_of(cell);
      for (const auto& o : p.objects) {
        const CornerPos at{o.row, o.col};
        if (std::find(corners.begin(), corners.end(), at) == corners.end()) continue;
        for (auto c : corners) {
          if (c != at) out.push_back(MoveToCorner{o.id, c});
        }
        for (const auto& t : p.targets) {
          if (t.cell == cell && t.color == o.color) out.push_back(MoveToTarget{o.id, t.id});
        }
      }
    }
    out.push_back(NoOp{});
    return out;
  }

  bool is_legal(const EnvState<Payload>& state, AgentId agent, const Action& action) const {
    if (agent.index >= agent_count()) return false;
    if (std::holds_alternative<NoOp>(action)) return true;
    const auto legal = legal_actions(state, agent);
    return std::find(legal.begin(), legal.end(), action) != legal.end();
  }

  /// Purely syntactic: looks only at the joint action, never at execution.
  std::vector<Conflict> detect_conflicts(const EnvState<Payload>&, const JointAction<Action>& joint) const {
    std::vector<Conflict> out;
    std::map<std::string, std::vector<AgentId>> by_object;
    std::map<CornerPos, std::map<std::string, std::vector<AgentId>>> by_corner;
    for (const auto& [agent, action] : joint.actions) {
      if (const auto* obj = moved_object(action)) by_object[*obj].push_back(agent);
      if (const auto* m = std::get_if<MoveToCorner>(&action)) by_corner[m->to][m->object_id].push_back(agent);
    }
    for (const auto& [obj, agents] : by_object) {
      if (agents.size() < 2) continue;
      std::string detail = obj + " moved by";
      for (auto a : agents) detail += " " + a.name();
      out.push_back({ConflictKind::SameObjectMultiMove, agents, detail});
    }
    for (const auto& [corner, objects] : by_corner) {
      if (objects.size() < 2) continue;
      std::vector<AgentId> agents;
      std::string detail = "objects";
      for (const auto& [obj, movers] : objects) {
        detail += " " + obj;
        agents.insert(agents.end(), movers.begin(), movers.end());
      }
      std::sort(agents.begin(), agents.end());
      agents.erase(std::unique(agents.begin(), agents.end()), agents.end());
      detail += " sent to " + to_string(corner);
      out.push_back({ConflictKind::DestinationCollision, agents, detail});
    }
    return out;
  }

  std::optional<DistanceCheck> distance_check(const EnvState<Payload>& state, AgentId, const Action& action) const {
    const auto* obj_id = moved_object(action);
    if (!obj_id) return DistanceCheck{true, 0, 0};
    const auto* obj = state.payload.find_object(*obj_id);
    if (!obj) return std::nullopt;
    const int before = distance_to_nearest_target(state.payload, obj->color, obj->row, obj->col);
    if (is_delivery(action)) return DistanceCheck{true, before, 0};
    int row = 0, col = 0;
    if (const auto* m = std::get_if<MoveToCell>(&action)) {
      row = m->to.row;
      col = m->to.col;
    } else {
      const auto& c = std::get<MoveToCorner>(action);
      row = c.to.row;
      col = c.to.col;
    }
    const int after = distance_to_nearest_target(state.payload, obj->color, row, col);
    return DistanceCheck{after <= before, before, after};
  }

  Action fallback_action(const EnvState<Payload>&, AgentId) const { return NoOp{}; }

  /// Applies every move simultaneously. A conflicting joint action is a
  /// contract violation; an illegal individual action becomes a no-op.
  StepOutcome<Payload> step(const EnvState<Payload>& state, const JointAction<Action>& joint) const {
    if (!joint.covers(agent_count())) {
      throw std::invalid_argument("grid: joint action must cover every agent exactly once");
    }
    if (auto conflicts = detect_conflicts(state, joint); !conflicts.empty()) {
      throw ConflictingJointAction(conflicts.front().detail);
    }
    StepOutcome<Payload> out;
    Payload next = state.payload;
    int delivered = 0;
    for (const auto& [agent, action] : joint.actions) {
      if (std::holds_alternative<NoOp>(action)) continue;
      if (!is_legal(state, agent, action)) {
        out.warnings.push_back(agent.name() + ": illegal action " + render_action(action) + " degraded to noop");
        continue;
      }
      const std::string& id = *moved_object(action);
      auto it = std::find_if(next.objects.begin(), next.objects.end(),
                             [&](const GridObject& o) { return o.id == id; });
      if (is_delivery(action)) {
        next.delivered.push_back(id);
        next.objects.erase(it);
        ++delivered;
      } else if (const auto* m = std::get_if<MoveToCell>(&action)) {
        it->row = m->to.row;
        it->col = m->to.col;
      } else {
        const auto& c = std::get<MoveToCorner>(action);
        it->row = c.to.row;
        it->col = c.to.col;
      }
    }
    const bool goal = next.objects.empty();
    const auto step = state.step_index + 1;
    out.next_state = make_state(step, std::move(next));
    for (std::size_t i = 0; i < agent_count(); ++i) out.rewards[AgentId{i}] = static_cast<double>(delivered);
    out.goal_reached = goal;
    out.done = goal || static_cast<int>(step) >= max_steps();
    return out;
  }

  Observation<View> observe(const EnvState<Payload>& state, AgentId agent) const {
    check_agent(agent);
    const auto& p = state.payload;
    Observation<View> obs;
    obs.agent = agent;
    obs.payload.cell = cell_of(agent);
    const auto corners = corners_of(obs.payload.cell);
    for (const auto& o : p.objects) {
      const bool here = p.mode == GridMode::Easy
                            ? (CellPos{o.row, o.col} == obs.payload.cell)
                            : std::find(corners.begin(), corners.end(), CornerPos{o.row, o.col}) != corners.end();
      if (here) obs.payload.objects.push_back(o);
    }
    for (const auto& t : p.targets) {
      if (t.cell == obs.payload.cell) obs.payload.targets.push_back(t);
    }
    obs.payload.actions = legal_actions(state, agent);

    std::ostringstream text;
    text << "You are " << agent.name() << " at " << to_string(obs.payload.cell) << ".\n";
    if (p.mode == GridMode::Easy) {
      text << "objects here: [" << join_ids(obs.payload.objects) << "]\n";
    } else {
      for (auto c : corners) {
        std::vector<GridObject> at;
        for (const auto& o : obs.payload.objects) {
          if (CornerPos{o.row, o.col} == c) at.push_back(o);
        }
        text << to_string(c) << ": [" << join_ids(at) << "]\n";
      }
    }
    text << "targets here: [" << join_ids(obs.payload.targets) << "]\n";
    text << "available actions: [";
    for (std::size_t i = 0; i < obs.payload.actions.size(); ++i) {
      text << (i ? ", " : "") << render_action(obs.payload.actions[i]);
    }
    text << "]\n";
    obs.text = text.str();
    return obs;
  }

  json format_action(const Action& action) const { return render_action(action); }
  std::string action_text(const Action& action) const { return render_action(action); }

  std::optional<Action> parse_action(const json& j) const {
    if (!j.is_string()) return std::nullopt;
    return parse_grid_action(j.get<std::string>(), config_.mode);
  }

  std::string action_grammar() const {
    if (config_.mode == GridMode::Easy) {
      return "a string: \"move(<object_id>, cell(<row>,<col>))\" to an adjacent cell, "
             "\"move(<object_id>, target(<target_id>))\" for a target in the same cell, or \"noop\"";
    }
    return "a string: \"move(<object_id>, corner(<row>,<col>))\" to another corner of your cell, "
           "\"move(<object_id>, target(<target_id>))\" for a target in your cell, or \"noop\"";
  }

  json config_json() const;

  json state_json(const EnvState<Payload>& state) const {
    json objects = json::array();
    for (const auto& o : state.payload.objects) {
      objects.push_back({{"id", o.id}, {"color", o.color}, {"row", o.row}, {"col", o.col}});
    }
    return {{"step", state.step_index}, {"objects", objects}, {"delivered", state.payload.delivered}};
  }

  static EnvState<Payload> make_state(std::uint64_t step, Payload payload) {
    EnvState<Payload> s;
    s.step_index = step;
    s.text = render_grid_state(payload);
    s.payload = std::move(payload);
    return s;
  }

 private:
  void check_agent(AgentId agent) const {
    if (agent.index >= agent_count()) throw UnknownAgent(agent);
  }

  template <class T>
  static std::string join_ids(const std::vector<T>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ", ";
      out += items[i].id;
    }
    return out;
  }

  GridConfig config_;
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const GridConfig& c) {
  json objects = json::array();
  for (const auto& o : c.objects) {
    objects.push_back({{"id", o.id}, {"color", o.color}, {"row", o.row}, {"col", o.col}});
  }
  json targets = json::array();
  for (const auto& t : c.targets) {
    targets.push_back({{"id", t.id}, {"color", t.color}, {"row", t.cell.row}, {"col", t.cell.col}});
  }
  j = json{{"rows", c.rows},       {"cols", c.cols},       {"mode", to_string(c.mode)},
           {"objects", objects},   {"targets", targets},   {"max_steps", c.max_steps}};
}

inline void from_json(const json& j, GridConfig& c) {
  j.at("rows").get_to(c.rows);
  j.at("cols").get_to(c.cols);
  auto mode = parse_grid_mode(j.at("mode").get<std::string>());
  if (!mode) throw ConfigError("grid: bad mode");
  c.mode = *mode;
  c.objects.clear();
  for (const auto& o : j.at("objects")) {
    c.objects.push_back({o.at("id"), o.at("color"), o.at("row"), o.at("col")});
  }
  c.targets.clear();
  for (const auto& t : j.at("targets")) {
    c.targets.push_back({t.at("id"), t.at("color"), CellPos{t.at("row"), t.at("col")}});
  }
  j.at("max_steps").get_to(c.max_steps);
}

inline json GridEnv::config_json() const { return config_; }

// ---------------------------------------------------------------------------
// Scenario generation

inline int default_object_count(int rows, int cols) {
  const int cells = rows * cols;
  return std::min(cells, std::max(2, cells / 4));
}

/// Uniform random placement, rejecting instances where every object already
/// sits on a matching target. Grids too small to avoid that (1x1) give up
/// after a bounded number of draws.
inline GridConfig generate_grid_scenario(int rows, int cols, GridMode mode, int n_objects, std::uint64_t seed) {
  static constexpr std::array<std::string_view, 4> palette{"red", "blue", "green", "yellow"};
  if (rows < 1 || cols < 1 || n_objects < 0) throw ConfigError("grid: bad generator parameters");
  SplitMix64 rng(stream_seed(seed, "env"));
  constexpr int max_draws = 1000;
  for (int draw = 0;; ++draw) {
    GridConfig c;
    c.rows = rows;
    c.cols = cols;
    c.mode = mode;
    std::map<std::string_view, int> per_color;
    for (int k = 0; k < n_objects; ++k) {
      const auto color = palette[static_cast<std::size_t>(k) % palette.size()];
      const int ordinal = ++per_color[color];
      const std::string suffix = std::string(color) + "_" + std::to_string(ordinal);
      const int span_r = mode == GridMode::Easy ? rows : rows + 1;
      const int span_c = mode == GridMode::Easy ? cols : cols + 1;
      GridObject o{"object_" + suffix, std::string(color), static_cast<int>(rng.below(span_r)),
                   static_cast<int>(rng.below(span_c))};
      GridTarget t{"target_" + suffix, std::string(color),
                   CellPos{static_cast<int>(rng.below(rows)), static_cast<int>(rng.below(cols))}};
      c.objects.push_back(o);
      c.targets.push_back(t);
    }
    GridEnv env(c);
    const auto s = env.initial_state(seed);
    const bool solved_already = n_objects > 0 && std::all_of(s.payload.objects.begin(), s.payload.objects.end(),
                                                             [&](const GridObject& o) {
                                                               return manhattan_to_target(s.payload, o.id) == 0;
                                                             });
    if (!solved_already || draw + 1 >= max_draws) return c;
  }
}

}  // namespace llamac
