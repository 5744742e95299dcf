#pragma once

// Prompt templates. Each template is a versioned text with a comment header,
// a [system] section and a [user] section; `{{name}}` marks a placeholder.
// The same texts are shipped under prompts/ and a unit test keeps the two
// copies identical.

#include <map>
#include <set>

#include "llamac/backend.hpp"

namespace llamac {

struct UnboundPlaceholder : std::invalid_argument {
  explicit UnboundPlaceholder(const std::string& name)
      : std::invalid_argument("unbound placeholder {{" + name + "}}"), name(name) {}
  std::string name;
};

struct PromptTemplate {
  std::string name;
  std::string body;

  std::set<std::string> placeholders() const {
    std::set<std::string> out;
    for (std::size_t open = body.find("{{"); open != std::string::npos; open = body.find("{{", open + 2)) {
      const auto close = body.find("}}", open + 2);
      if (close == std::string::npos) break;
      out.insert(body.substr(open + 2, close - open - 2));
    }
    return out;
  }
};

using Bindings = std::map<std::string, std::string>;

namespace detail {

inline std::string substitute(std::string_view text, const Bindings& bindings) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 2, close - open - 2));
    auto it = bindings.find(key);
    if (it == bindings.end()) throw UnboundPlaceholder(key);
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

inline std::string trim_newlines(std::string s) {
  while (!s.empty() && s.front() == '\n') s.erase(s.begin());
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace detail

/// Header lines (leading `#`) are dropped; [system] and [user] sections become
/// one message each. Substitution is single-pass, so bound values containing
/// braces are never re-expanded.
inline std::vector<ChatMessage> instantiate_prompt(const PromptTemplate& tpl, const Bindings& bindings) {
  for (const auto& name : tpl.placeholders()) {
    if (!bindings.contains(name)) throw UnboundPlaceholder(name);
  }
  std::string_view body = tpl.body;
  while (!body.empty() && body.front() == '#') {
    const auto nl = body.find('\n');
    body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
  }
  const auto sys = body.find("[system]\n");
  const auto usr = body.find("[user]\n");
  if (sys == std::string_view::npos || usr == std::string_view::npos || usr < sys) {
    throw std::invalid_argument("template " + tpl.name + " needs [system] then [user] sections");
  }
  auto system_text = body.substr(sys + 9, usr - sys - 9);
  auto user_text = body.substr(usr + 7);
  return {{"system", detail::trim_newlines(detail::substitute(system_text, bindings))},
          {"user", detail::trim_newlines(detail::substitute(user_text, bindings))}};
}

namespace prompts {

inline constexpr std::string_view explore_clause =
    "Preference: EXPLORE. Value what the team can learn. Prefer joint actions that test untried options "
    "and could pay off over later steps, even if the immediate reward is uncertain.";

inline constexpr std::string_view exploit_clause =
    "Preference: EXPLOIT. Value the reward you can secure now. Prefer the joint action that the recorded "
    "history shows to be best, and change it only when the evidence is clear.";

inline const PromptTemplate critic{"critic", R"(# template: critic
# version: 1
# Internal-feedback proposer: task, state, memory, feedback, output format.
[system]
You are one of two planning critics coordinating a team of agents.
{{task}}
{{preference}}
Respond with your reasoning followed by one JSON object:
{"thoughts": "<reasoning>", "actions": {"agent_0": <action>, ...}}
Give exactly one action for every agent ({{agents}}). Each action is {{action_grammar}}.
[user]
Current state:
{{state}}
Memory:
{{memory}}
Lessons so far:
{{notes}}
Feedback on your previous proposal:
{{feedback}}
)"};

inline const PromptTemplate assessor{"assessor", R"(# template: assessor
# version: 1
# Internal-feedback assessor: scrutiny of both proposals, then belief
# correction into one suggestion per agent.
[system]
You are the assessor. Two critics with different preferences proposed joint actions for the team.
{{task}}
First check both proposals for format errors, conflicts between agents and reasoning mistakes.
If either is unusable, reply {"verdict": "fail", "feedback": "<what must change>"}.
Otherwise blend them into one suggestion per agent that balances trying new options against securing reward, and reply
{"verdict": "pass", "note": "<one lesson worth remembering>", "suggestions": {"agent_0": {"action": <action>, "rationale": "<why>"}, ...}}
Cover every agent ({{agents}}). Each action is {{action_grammar}}.
[user]
Current state:
{{state}}
Memory:
{{memory}}
Lessons so far:
{{notes}}
Exploration proposal:
{{explore_proposal}}
Exploitation proposal:
{{exploit_proposal}}
Automatic checks:
{{issues}}
)"};

inline const PromptTemplate assessor_correction{"assessor_correction", R"(# template: assessor_correction
# version: 1
# Belief correction on its own, used for re-asks.
[system]
You are the assessor. Merge the two proposals below into one suggestion per agent.
{{task}}
Reply {"suggestions": {"agent_0": {"action": <action>, "rationale": "<why>"}, ...}} covering every agent ({{agents}}).
Each action is {{action_grammar}}.
[user]
Current state:
{{state}}
Memory:
{{memory}}
Exploration proposal:
{{explore_proposal}}
Exploitation proposal:
{{exploit_proposal}}
Previous reply problem:
{{feedback}}
)"};

inline const PromptTemplate assessor_revision{"assessor_revision", R"(# template: assessor_revision
# version: 1
# External-feedback revision: new suggestions only for the agents that
# objected.
[system]
You are the assessor. Some agents rejected their suggested actions after checking them against their own observations.
{{task}}
Reply {"suggestions": {"<agent>": {"action": <action>, "rationale": "<why>"}, ...}} for exactly these agents: {{agents}}.
Each action is {{action_grammar}}. Do not create conflicts with the other agents' current suggestions.
[user]
Current state:
{{state}}
Memory:
{{memory}}
Current suggestions:
{{suggestions}}
Agent feedback:
{{feedback}}
)"};

inline const PromptTemplate actor_feedback{"actor_feedback", R"(# template: actor_feedback
# version: 1
# External-feedback actor prompt: only agents whose plan confirmation failed
# make this call.
[system]
You are {{agent}}, one agent in a team. A central critic suggested an action for you, and the automatic plan check rejected it.
{{task}}
Explain what is wrong with the suggestion and what would be better.
Reply {"feedback": "<explanation>"}.
[user]
Your observation:
{{observation}}
Suggested action:
{{suggestion}}
Plan check results:
{{issues}}
)"};

inline const PromptTemplate debater{"debater", R"(# template: debater
# version: 1
# Multi-agent debate baseline.
[system]
You are debater {{debater}} in a discussion about the team's next joint action.
{{task}}
Respond with your reasoning followed by {"thoughts": "<reasoning>", "actions": {"agent_0": <action>, ...}} covering every agent ({{agents}}).
Each action is {{action_grammar}}.
[user]
Current state:
{{state}}
Memory:
{{memory}}
Debate so far (round {{round}}):
{{debate}}
)"};

inline const PromptTemplate decentralized_agent{"decentralized_agent", R"(# template: decentralized_agent
# version: 1
# Decentralized baseline: each agent decides alone from its own history.
[system]
You are {{agent}}. You cannot see what the other agents do.
{{task}}
Reply {"thoughts": "<reasoning>", "actions": {"{{agent}}": <action>}}. Your action is {{action_grammar}}.
[user]
Your observation:
{{observation}}
)"};

inline const std::vector<const PromptTemplate*>& all() {
  static const std::vector<const PromptTemplate*> list{&critic,          &assessor, &assessor_correction,
                                                       &assessor_revision, &actor_feedback, &debater,
                                                       &decentralized_agent};
  return list;
}

}  // namespace prompts
}  // namespace llamac
