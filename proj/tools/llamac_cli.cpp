// llamac: run, replay and summarize coordination episodes.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "llamac/http_backend.hpp"
#include "llamac/llamac.hpp"

namespace {

using namespace llamac;

struct RunArgs {
  std::string env = "gs";
  std::string size = "2x2";
  int agents = 3;
  std::string method = "llamac";
  std::string backend = "scripted";
  std::uint64_t seed = 0;
  int trials = 1;
  std::string record = "llamac-run";
  std::string replay_from;
  std::string scenario;
  std::optional<double> mu;
  std::optional<double> sigma;
  std::optional<int> rounds;
  std::optional<int> objects;
  int if_limit = 3;
  int ef_limit = 3;
  int mem_window = 0;
  int max_steps = 0;
  std::int64_t context_limit = 8192;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

GsConfig gs_config(const RunArgs& a) {
  auto c = GsConfig::with_defaults(a.agents);
  if (a.mu) c.mu = *a.mu;
  if (a.sigma) c.sigma = *a.sigma;
  if (a.rounds) c.max_rounds = *a.rounds;
  return c;
}

int cmd_run(const RunArgs& a) {
  RunConfig cfg;
  cfg.method = *parse_method(a.method);
  cfg.if_limit = a.if_limit;
  cfg.ef_limit = a.ef_limit;
  cfg.memory_window = a.mem_window;
  cfg.context_limit = a.context_limit;
  cfg.backend = a.backend;
  cfg.seed = a.seed;

  ScenarioSource scenario_for;
  if (!a.scenario.empty()) {
    cfg.scenario = load_scenario(a.scenario);
    if (auto* gs = std::get_if<GsConfig>(&cfg.scenario)) {
      if (a.rounds) gs->max_rounds = *a.rounds;
    } else if (a.max_steps > 0) {
      std::get<GridConfig>(cfg.scenario).max_steps = a.max_steps;
    }
  } else if (a.env == "gs") {
    cfg.scenario = gs_config(a);
  } else {
    const auto size = parse_size(a.size);
    if (!size) throw ConfigError("--size must look like RxC");
    const auto mode = a.env == "grid-easy" ? GridMode::Easy : GridMode::Hard;
    const auto [rows, cols] = *size;
    const int objects = a.objects.value_or(default_object_count(rows, cols));
    const int max_steps = a.max_steps;
    scenario_for = [=](std::uint64_t seed) -> Scenario {
      auto c = generate_grid_scenario(rows, cols, mode, objects, seed);
      c.max_steps = max_steps;
      return c;
    };
    cfg.scenario = scenario_for(a.seed);
  }

  std::map<std::uint64_t, std::vector<ChatExchange>> recorded;
  if (a.backend == "replay") {
    if (a.replay_from.empty()) throw ConfigError("--backend replay needs --replay-from DIR");
    for (const auto& entry : std::filesystem::directory_iterator(a.replay_from)) {
      if (entry.path().extension() != ".jsonl") continue;
      auto t = read_transcript(entry.path().string());
      recorded[t.header.at("seed").get<std::uint64_t>()] = std::move(t.exchanges);
    }
  }
  BackendFactory factory = [&](const RunConfig& trial) -> std::unique_ptr<ChatBackend> {
    if (a.backend == "http") return std::make_unique<HttpBackend>(HttpBackendConfig::from_env());
    if (a.backend == "replay") {
      auto it = recorded.find(trial.seed);
      if (it == recorded.end()) throw ConfigError("no transcript recorded for seed " + std::to_string(trial.seed));
      return std::make_unique<ReplayBackend>(it->second);
    }
    return std::make_unique<ScriptedBackend>();
  };

  const auto results = run_batch(cfg, a.trials, factory, a.record, scenario_for);
  std::string csv = csv_header();
  for (const auto& r : results) csv += csv_row(r);
  const auto summaries = summarize(results);
  const auto dir = std::filesystem::path(a.record);
  write_file((dir / "trials.csv").string(), csv);
  write_file((dir / "aggregate.csv").string(), aggregate_csv(summaries));
  std::cout << format_report(summaries);
  return 0;
}

int cmd_replay(const std::vector<std::string>& paths) {
  int status = 0;
  for (const auto& path : paths) {
    auto outcome = replay_transcript(path);
    const bool same = outcome.identical();
    std::cout << path << ": " << (same ? "identical" : "DIFFERENT") << "\n"
              << json(outcome.replayed.result).dump(2) << "\n";
    if (!same) status = 1;
  }
  return status;
}

int cmd_report(const std::vector<std::string>& paths) {
  std::vector<TrialRow> rows;
  for (const auto& path : paths) {
    auto more = parse_trials_csv(read_file(path));
    rows.insert(rows.end(), more.begin(), more.end());
  }
  std::cout << format_report(summarize(rows));
  return 0;
}

int cmd_oracle_gs(int agents, double mu, double sigma, int action_min, int action_max) {
  GsConfig c;
  c.n_agents = agents;
  c.mu = mu;
  c.sigma = sigma;
  c.action_min = action_min;
  c.action_max = action_max;
  c.validate();
  const auto opt = brute_force_optimum(c);
  std::cout << "x* = " << opt.x_star << "\n"
            << "R* = " << format_real(opt.r_star) << "\n"
            << "stationary root (clamped) = " << format_real(opt.root) << "\n"
            << "allocation = [";
  const auto alloc = greedy_allocation(c, opt.x_star);
  for (std::size_t i = 0; i < alloc.size(); ++i) std::cout << (i ? ", " : "") << alloc[i];
  std::cout << "]\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"llamac: centralized critic, decentralized actors"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run a batch of episodes");
  std::vector<std::string> methods;
  for (auto m : all_methods) methods.emplace_back(to_string(m));
  run_cmd->add_option("--env", run.env, "environment")->check(CLI::IsMember({"gs", "grid-easy", "grid-hard"}));
  run_cmd->add_option("--size", run.size, "grid size RxC");
  run_cmd->add_option("--agents", run.agents, "gs agent count")->check(CLI::PositiveNumber);
  run_cmd->add_option("--method", run.method, "decision method")->check(CLI::IsMember(methods));
  run_cmd->add_option("--backend", run.backend, "model backend")->check(CLI::IsMember({"http", "scripted", "replay"}));
  run_cmd->add_option("--seed", run.seed, "base seed");
  run_cmd->add_option("--trials", run.trials, "number of trials")->check(CLI::PositiveNumber);
  run_cmd->add_option("--record", run.record, "output directory for transcripts and CSV files");
  run_cmd->add_option("--replay-from", run.replay_from, "transcript directory for --backend replay");
  run_cmd->add_option("--scenario", run.scenario, "scenario file")->check(CLI::ExistingFile);
  run_cmd->add_option("--mu", run.mu, "gs mu");
  run_cmd->add_option("--sigma", run.sigma, "gs sigma");
  run_cmd->add_option("--rounds", run.rounds, "gs rounds");
  run_cmd->add_option("--objects", run.objects, "objects in generated grid scenarios");
  run_cmd->add_option("--if-limit", run.if_limit, "internal feedback iterations");
  run_cmd->add_option("--ef-limit", run.ef_limit, "external feedback iterations");
  run_cmd->add_option("--mem-window", run.mem_window, "memory window (0 = default)");
  run_cmd->add_option("--max-steps", run.max_steps, "grid step limit (0 = default)");
  run_cmd->add_option("--context-limit", run.context_limit, "prompt token limit (0 = none)");

  std::vector<std::string> replay_paths;
  auto* replay_cmd = app.add_subcommand("replay", "re-run recorded transcripts and compare");
  replay_cmd->add_option("transcripts", replay_paths, "transcript files")->required()->check(CLI::ExistingFile);

  std::vector<std::string> report_paths;
  auto* report_cmd = app.add_subcommand("report", "summarize trials.csv files");
  report_cmd->add_option("csv", report_paths, "trials.csv files")->required()->check(CLI::ExistingFile);

  int agents = 3;
  double mu = 7.5;
  double sigma = 1.5;
  int action_min = 0;
  int action_max = 9;
  auto* oracle_cmd = app.add_subcommand("oracle-gs", "exhaustive gs optimum and one allocation reaching it");
  oracle_cmd->add_option("--agents", agents, "agent count")->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--mu", mu, "mu");
  oracle_cmd->add_option("--sigma", sigma, "sigma");
  oracle_cmd->add_option("--action-min", action_min, "smallest action");
  oracle_cmd->add_option("--action-max", action_max, "largest action");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*replay_cmd) return cmd_replay(replay_paths);
    if (*report_cmd) return cmd_report(report_paths);
    if (*oracle_cmd) return cmd_oracle_gs(agents, mu, sigma, action_min, action_max);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
