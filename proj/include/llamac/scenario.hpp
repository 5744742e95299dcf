#pragma once

// Scenario files: one directive per line, `#` starts a comment.
//
//   env gs                      env grid-easy | grid-hard
//   agents 3                    size 2x2
//   mu 7.5                      max_steps 40
//   sigma 1.5                   object object_red_1 red 0 1
//   action_min 0                target target_red_1 red 1 1
//   action_max 9
//   rounds 20
//
// Grid object coordinates are a cell in Easy and a corner in Hard. Unknown
// directives are errors. render_scenario() emits the canonical form, whose
// FNV-1a hash identifies the scenario in transcripts.

#include <fstream>
#include <sstream>
#include <variant>

#include "llamac/env_grid.hpp"
#include "llamac/env_gs.hpp"

namespace llamac {

using Scenario = std::variant<GsConfig, GridConfig>;

struct ScenarioError : std::runtime_error {
  ScenarioError(int line, const std::string& what)
      : std::runtime_error("scenario line " + std::to_string(line) + ": " + what) {}
};

inline std::string env_name(const Scenario& s) {
  if (const auto* g = std::get_if<GridConfig>(&s)) return g->mode == GridMode::Easy ? "grid-easy" : "grid-hard";
  return "gs";
}

inline std::string size_label(const Scenario& s) {
  if (const auto* g = std::get_if<GridConfig>(&s)) return std::to_string(g->rows) + "x" + std::to_string(g->cols);
  return std::to_string(std::get<GsConfig>(s).n_agents);
}

inline std::optional<std::pair<int, int>> parse_size(std::string_view text) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) return std::nullopt;
  int r = 0, c = 0;
  auto a = std::from_chars(text.data(), text.data() + x, r);
  auto b = std::from_chars(text.data() + x + 1, text.data() + text.size(), c);
  if (a.ec != std::errc{} || a.ptr != text.data() + x || b.ec != std::errc{} ||
      b.ptr != text.data() + text.size() || r < 1 || c < 1) {
    return std::nullopt;
  }
  return std::pair{r, c};
}

inline Scenario parse_scenario(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  std::optional<Scenario> out;
  auto need = [&](auto* cfg, const char* what) {
    if (!cfg) throw ScenarioError(lineno, std::string(what) + " before or without a matching env line");
    return cfg;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string key;
    if (!(words >> key)) continue;
    auto fail = [&](const std::string& why) { throw ScenarioError(lineno, why); };
    auto read = [&](auto& value) {
      if (!(words >> value)) fail("bad value for '" + key + "'");
    };
    GsConfig* gs = out ? std::get_if<GsConfig>(&*out) : nullptr;
    GridConfig* grid = out ? std::get_if<GridConfig>(&*out) : nullptr;

    if (key == "env") {
      if (out) fail("duplicate env line");
      std::string name;
      read(name);
      if (name == "gs") {
        out = GsConfig{};
      } else if (name == "grid-easy" || name == "grid-hard") {
        GridConfig g;
        g.mode = name == "grid-easy" ? GridMode::Easy : GridMode::Hard;
        out = g;
      } else {
        fail("unknown env '" + name + "'");
      }
    } else if (key == "agents") {
      read(need(gs, "agents")->n_agents);
    } else if (key == "mu") {
      read(need(gs, "mu")->mu);
    } else if (key == "sigma") {
      read(need(gs, "sigma")->sigma);
    } else if (key == "action_min") {
      read(need(gs, "action_min")->action_min);
    } else if (key == "action_max") {
      read(need(gs, "action_max")->action_max);
    } else if (key == "rounds") {
      read(need(gs, "rounds")->max_rounds);
    } else if (key == "size") {
      std::string s;
      read(s);
      auto rc = parse_size(s);
      if (!rc) fail("size must be RxC");
      need(grid, "size")->rows = rc->first;
      grid->cols = rc->second;
    } else if (key == "max_steps") {
      read(need(grid, "max_steps")->max_steps);
    } else if (key == "object") {
      GridObject o;
      read(o.id);
      read(o.color);
      read(o.row);
      read(o.col);
      need(grid, "object")->objects.push_back(o);
    } else if (key == "target") {
      GridTarget t;
      read(t.id);
      read(t.color);
      read(t.cell.row);
      read(t.cell.col);
      need(grid, "target")->targets.push_back(t);
    } else {
      fail("unknown directive '" + key + "'");
    }
    std::string extra;
    if (words >> extra) fail("trailing text '" + extra + "'");
  }
  if (!out) throw ScenarioError(lineno, "missing env line");
  try {
    std::visit([](const auto& c) { c.validate(); }, *out);
  } catch (const ConfigError& e) {
    throw ScenarioError(lineno, e.what());
  }
  return *out;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline std::string render_scenario(const Scenario& s) {
  std::ostringstream out;
  out << "env " << env_name(s) << "\n";
  if (const auto* gs = std::get_if<GsConfig>(&s)) {
    out << "agents " << gs->n_agents << "\n"
        << "mu " << format_real(gs->mu) << "\n"
        << "sigma " << format_real(gs->sigma) << "\n"
        << "action_min " << gs->action_min << "\n"
        << "action_max " << gs->action_max << "\n"
        << "rounds " << gs->max_rounds << "\n";
  } else {
    const auto& g = std::get<GridConfig>(s);
    out << "size " << g.rows << "x" << g.cols << "\n";
    out << "max_steps " << g.max_steps << "\n";
    for (const auto& o : g.objects) out << "object " << o.id << " " << o.color << " " << o.row << " " << o.col << "\n";
    for (const auto& t : g.targets) {
      out << "target " << t.id << " " << t.color << " " << t.cell.row << " " << t.cell.col << "\n";
    }
  }
  return out.str();
}

inline std::string scenario_hash(const Scenario& s) { return hex64(fnv1a64(render_scenario(s))); }

inline void to_json(json& j, const Scenario& s) {
  j = json{{"env", env_name(s)}};
  std::visit([&](const auto& c) { j["config"] = c; }, s);
}

inline void from_json(const json& j, Scenario& s) {
  const auto name = j.at("env").get<std::string>();
  if (name == "gs") {
    s = j.at("config").get<GsConfig>();
  } else {
    s = j.at("config").get<GridConfig>();
  }
}

}  // namespace llamac
