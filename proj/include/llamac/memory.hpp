#pragma once

#include <deque>
#include <sstream>

#include "llamac/env_grid.hpp"
#include "llamac/env_gs.hpp"

namespace llamac {

struct OutOfOrderTransition : std::logic_error {
  using std::logic_error::logic_error;
};

/// Sliding window over the last L transitions plus a bounded list of
/// free-text lessons written by the assessor.
template <Environment E>
class DecisionMemory {
 public:
  static constexpr std::size_t max_notes = 10;

  explicit DecisionMemory(std::size_t window) : window_(window) {
    if (window_ < 1) throw ConfigError("memory window must be >= 1");
  }

  void push(TransitionOf<E> record) {
    if (record.next_state.step_index != record.state.step_index + 1) {
      throw OutOfOrderTransition("transition must advance exactly one step");
    }
    if (!transitions_.empty() && record.state.step_index != transitions_.back().next_state.step_index) {
      throw OutOfOrderTransition("transition at step " + std::to_string(record.state.step_index) +
                                 " does not follow step " +
                                 std::to_string(transitions_.back().next_state.step_index));
    }
    transitions_.push_back(std::move(record));
    while (transitions_.size() > window_) transitions_.pop_front();
  }

  void add_note(std::string note) {
    notes_.push_back(std::move(note));
    while (notes_.size() > max_notes) notes_.pop_front();
  }

  std::size_t window() const { return window_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  const std::deque<TransitionOf<E>>& transitions() const { return transitions_; }
  const std::deque<std::string>& notes() const { return notes_; }

 private:
  std::size_t window_;
  std::deque<TransitionOf<E>> transitions_;
  std::deque<std::string> notes_;
};

template <Environment E>
DecisionMemory<E> memory_push(DecisionMemory<E> mem, TransitionOf<E> record) {
  mem.push(std::move(record));
  return mem;
}

/// `[{action:[4,7,9], system_reward:[12.3]}, ...]`, one entry per round.
inline std::string render_memory_gs(const DecisionMemory<GsEnv>& mem) {
  std::string out = "[";
  bool first = true;
  for (const auto& t : mem.transitions()) {
    if (!first) out += ", ";
    first = false;
    out += "{action:[";
    bool first_action = true;
    for (const auto& [agent, a] : t.joint_action.actions) {
      if (!first_action) out += ",";
      first_action = false;
      out += std::to_string(a.value);
    }
    const double reward = t.next_state.payload.history.back().reward;
    out += "], system_reward:[" + format_real(reward) + "]}";
  }
  out += "]";
  return out;
}

inline std::string render_memory_grid(const DecisionMemory<GridEnv>& mem) {
  std::ostringstream out;
  out << "memory (last " << mem.window() << " steps):\n";
  for (const auto& t : mem.transitions()) {
    const auto& before = t.state.payload;
    out << "step " << t.state.step_index << ": objects";
    for (const auto& o : before.objects) {
      out << " " << o.id << "@"
          << (before.mode == GridMode::Easy ? to_string(CellPos{o.row, o.col}) : to_string(CornerPos{o.row, o.col}));
    }
    out << "; joint [";
    bool first = true;
    for (const auto& [agent, a] : t.joint_action.actions) {
      if (std::holds_alternative<NoOp>(a)) continue;
      out << (first ? "" : ", ") << agent.name() << ": " << render_action(a);
      first = false;
    }
    const auto delivered = t.next_state.payload.delivered.size() - before.delivered.size();
    out << "]; delivered " << delivered << "\n";
  }
  return out.str();
}

inline std::string render_memory(const DecisionMemory<GsEnv>& mem) { return render_memory_gs(mem); }
inline std::string render_memory(const DecisionMemory<GridEnv>& mem) { return render_memory_grid(mem); }

}  // namespace llamac
