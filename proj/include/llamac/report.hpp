#pragma once

// Per-trial CSV, batch aggregates and the plain-text summary tables.
//
// trials.csv columns (one row per episode):
//   method,env,size,seed,success,steps,feedback,prompt_tokens,completion_tokens,
//   failure_reason,internal_feedback,external_feedback,
//   critic_explore_tokens,critic_exploit_tokens,assessor_tokens,actor_tokens,debater_tokens
// success is 0/1, failure_reason is empty on success, *_tokens are total tokens
// per role kind.

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "llamac/transcript.hpp"

namespace llamac {

struct EmptyInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TrialRow {
  std::string method;
  std::string env;
  std::string size;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  int feedback = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::string failure_reason;
  int internal_feedback = 0;
  int external_feedback = 0;
  std::map<std::string, std::int64_t> role_tokens;  // every role kind present

  static TrialRow of(const EpisodeResult& r) {
    TrialRow row{r.method, r.env, r.size, r.seed, r.success, r.steps, r.feedback_count};
    const auto total = r.total_tokens();
    row.prompt_tokens = total.prompt_tokens;
    row.completion_tokens = total.completion_tokens;
    row.failure_reason = r.failure_reason ? std::string(to_string(*r.failure_reason)) : "";
    row.internal_feedback = r.internal_feedback;
    row.external_feedback = r.external_feedback;
    for (auto k : all_role_kinds) {
      auto it = r.token_usage.find(std::string(to_string(k)));
      row.role_tokens[std::string(to_string(k))] = it == r.token_usage.end() ? 0 : it->second.total_tokens;
    }
    return row;
  }

  friend bool operator==(const TrialRow&, const TrialRow&) = default;
};

inline std::vector<std::string> csv_columns() {
  std::vector<std::string> cols{"method",        "env",           "size",
                                "seed",          "success",       "steps",
                                "feedback",      "prompt_tokens", "completion_tokens",
                                "failure_reason", "internal_feedback", "external_feedback"};
  for (auto k : all_role_kinds) cols.push_back(std::string(to_string(k)) + "_tokens");
  return cols;
}

inline std::string csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) out += (out.empty() ? "" : ",") + c;
  return out + "\n";
}

inline std::string csv_row(const TrialRow& r) {
  std::string out = r.method + "," + r.env + "," + r.size + "," + std::to_string(r.seed) + "," +
                    (r.success ? "1" : "0") + "," + std::to_string(r.steps) + "," + std::to_string(r.feedback) + "," +
                    std::to_string(r.prompt_tokens) + "," + std::to_string(r.completion_tokens) + "," +
                    r.failure_reason + "," + std::to_string(r.internal_feedback) + "," +
                    std::to_string(r.external_feedback);
  for (auto k : all_role_kinds) out += "," + std::to_string(r.role_tokens.at(std::string(to_string(k))));
  return out + "\n";
}

inline std::string csv_row(const EpisodeResult& r) { return csv_row(TrialRow::of(r)); }

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("bad " + what + " '" + s + "'");
  return value;
}

}  // namespace detail

inline std::vector<TrialRow> parse_trials_csv(std::string_view text) {
  std::vector<TrialRow> rows;
  const auto columns = csv_columns();
  bool header = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (header) {
      if (f != columns) throw std::invalid_argument("unexpected CSV header");
      header = false;
      continue;
    }
    if (f.size() != columns.size()) throw std::invalid_argument("CSV row has " + std::to_string(f.size()) + " fields");
    TrialRow r;
    r.method = f[0];
    r.env = f[1];
    r.size = f[2];
    r.seed = detail::parse_number<std::uint64_t>(f[3], "seed");
    r.success = f[4] == "1";
    r.steps = detail::parse_number<int>(f[5], "steps");
    r.feedback = detail::parse_number<int>(f[6], "feedback");
    r.prompt_tokens = detail::parse_number<std::int64_t>(f[7], "prompt_tokens");
    r.completion_tokens = detail::parse_number<std::int64_t>(f[8], "completion_tokens");
    r.failure_reason = f[9];
    r.internal_feedback = detail::parse_number<int>(f[10], "internal_feedback");
    r.external_feedback = detail::parse_number<int>(f[11], "external_feedback");
    std::size_t i = 12;
    for (auto k : all_role_kinds) {
      r.role_tokens[std::string(to_string(k))] = detail::parse_number<std::int64_t>(f[i++], "token count");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

struct Summary {
  std::string method;
  std::string env;
  std::string size;
  int trials = 0;
  int successes = 0;
  MeanSd steps;
  MeanSd feedback;
  MeanSd internal_feedback;
  MeanSd external_feedback;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::map<std::string, std::int64_t> role_tokens;

  double success_rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

/// One summary per (method, env, size), in order of first appearance.
inline std::vector<Summary> summarize(const std::vector<TrialRow>& rows) {
  if (rows.empty()) throw EmptyInput("no trials to summarize");
  std::vector<Summary> out;
  std::vector<std::vector<const TrialRow*>> groups;
  for (const auto& r : rows) {
    std::size_t g = 0;
    while (g < out.size() && !(out[g].method == r.method && out[g].env == r.env && out[g].size == r.size)) ++g;
    if (g == out.size()) {
      out.push_back({r.method, r.env, r.size});
      groups.emplace_back();
    }
    groups[g].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    auto& s = out[g];
    std::vector<double> steps, feedback, internal, external;
    for (auto k : all_role_kinds) s.role_tokens[std::string(to_string(k))] = 0;
    for (const auto* r : groups[g]) {
      ++s.trials;
      s.successes += r->success ? 1 : 0;
      steps.push_back(r->steps);
      feedback.push_back(r->feedback);
      internal.push_back(r->internal_feedback);
      external.push_back(r->external_feedback);
      s.prompt_tokens += r->prompt_tokens;
      s.completion_tokens += r->completion_tokens;
      for (const auto& [role, n] : r->role_tokens) s.role_tokens[role] += n;
    }
    s.steps = mean_sd(steps);
    s.feedback = mean_sd(feedback);
    s.internal_feedback = mean_sd(internal);
    s.external_feedback = mean_sd(external);
  }
  return out;
}

inline std::vector<Summary> summarize(const std::vector<EpisodeResult>& results) {
  std::vector<TrialRow> rows;
  for (const auto& r : results) rows.push_back(TrialRow::of(r));
  return summarize(rows);
}

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string percent(double rate) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f%%", 100.0 * rate);
  return buf;
}

inline std::string format_mean_sd(const MeanSd& m) { return fixed2(m.mean) + "(" + fixed2(m.sd) + ")"; }

// aggregate.csv: one row per summary.
inline std::string aggregate_csv(const std::vector<Summary>& summaries) {
  std::string out =
      "method,env,size,trials,success_rate,steps_mean,steps_sd,feedback_mean,feedback_sd,"
      "internal_feedback_mean,external_feedback_mean,prompt_tokens,completion_tokens,total_tokens\n";
  for (const auto& s : summaries) {
    out += s.method + "," + s.env + "," + s.size + "," + std::to_string(s.trials) + "," +
           format_real(s.success_rate()) + "," + format_real(s.steps.mean) + "," + format_real(s.steps.sd) + "," +
           format_real(s.feedback.mean) + "," + format_real(s.feedback.sd) + "," +
           format_real(s.internal_feedback.mean) + "," + format_real(s.external_feedback.mean) + "," +
           std::to_string(s.prompt_tokens) + "," + std::to_string(s.completion_tokens) + "," +
           std::to_string(s.prompt_tokens + s.completion_tokens) + "\n";
  }
  return out;
}

namespace detail {

inline std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size()) line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

/// Success rate plus mean(sd) of steps and feedback, split into internal and
/// external feedback.
inline std::string format_results_table(const std::vector<Summary>& summaries) {
  std::vector<std::vector<std::string>> rows{
      {"method", "env", "size", "trials", "Success", "Steps", "Feedback", "Internal", "External"}};
  for (const auto& s : summaries) {
    rows.push_back({s.method, s.env, s.size, std::to_string(s.trials),
                    percent(s.success_rate()),
                    format_mean_sd(s.steps), format_mean_sd(s.feedback), format_mean_sd(s.internal_feedback),
                    format_mean_sd(s.external_feedback)});
  }
  return detail::render_rows(rows);
}

/// Summed total tokens per role kind; the last column equals the sum of the
/// role columns.
inline std::string format_token_table(const std::vector<Summary>& summaries) {
  std::vector<std::string> head{"method", "env", "size"};
  for (auto k : all_role_kinds) head.emplace_back(to_string(k));
  head.emplace_back("total");
  std::vector<std::vector<std::string>> rows{head};
  for (const auto& s : summaries) {
    std::vector<std::string> row{s.method, s.env, s.size};
    for (auto k : all_role_kinds) row.push_back(std::to_string(s.role_tokens.at(std::string(to_string(k)))));
    row.push_back(std::to_string(s.prompt_tokens + s.completion_tokens));
    rows.push_back(std::move(row));
  }
  return detail::render_rows(rows);
}

inline std::string format_report(const std::vector<Summary>& summaries) {
  return format_results_table(summaries) + "\ntokens\n" + format_token_table(summaries);
}

// ---------------------------------------------------------------------------
// Batches

using BackendFactory = std::function<std::unique_ptr<ChatBackend>(const RunConfig&)>;
using ScenarioSource = std::function<Scenario(std::uint64_t seed)>;

/// Runs `trials` episodes with seeds trial_seed(base.seed, k). With a record
/// directory each trial k is written to <dir>/trial_<k>.jsonl. A scenario
/// source, when given, draws each trial's scenario from its seed.
inline std::vector<EpisodeResult> run_batch(const RunConfig& base, int trials, const BackendFactory& factory,
                                            const std::optional<std::string>& record_dir = std::nullopt,
                                            const ScenarioSource& scenario_for = {}) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  base.validate();
  if (record_dir) std::filesystem::create_directories(*record_dir);
  std::vector<EpisodeResult> out;
  for (int k = 0; k < trials; ++k) {
    RunConfig cfg = base;
    cfg.seed = trial_seed(base.seed, k);
    if (scenario_for) cfg.scenario = scenario_for(cfg.seed);
    auto backend = factory(cfg);
    if (record_dir) {
      const auto path = (std::filesystem::path(*record_dir) / ("trial_" + std::to_string(k) + ".jsonl")).string();
      out.push_back(run_recorded(cfg, *backend, path).result);
    } else {
      out.push_back(run_episode(cfg, *backend).result);
    }
  }
  return out;
}

}  // namespace llamac
