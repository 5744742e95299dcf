#pragma once

// Line-delimited episode transcripts and deterministic replay.
//
// One JSON object per line, in this order:
//   header      {"type":"header","schema","grammar","config","seed","scenario_hash","backend"}
//   exchange    {"type":"exchange", <ChatExchange fields>}
//   event       {"type":"event","kind","step","iteration","detail"}
//   transition  {"type":"transition", <transition fields>}
//   result      {"type":"result","result":<EpisodeResult>}
// The last line is always the result; a file without it is truncated.

#include <fstream>

#include "llamac/orchestrator.hpp"

namespace llamac {

inline constexpr std::string_view transcript_schema = "llamac-transcript/1";

struct VersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TranscriptTruncated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReplayDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TranscriptEvent {
  std::string kind;
  std::uint64_t step = 0;
  int iteration = 0;
  json detail;
  friend bool operator==(const TranscriptEvent&, const TranscriptEvent&) = default;
};

struct Transcript {
  json header;
  std::vector<ChatExchange> exchanges;
  std::vector<TranscriptEvent> events;
  std::vector<json> transitions;
  EpisodeResult result;

  RunConfig config() const { return header.at("config").get<RunConfig>(); }
};

inline json transcript_header(const RunConfig& cfg, std::string_view backend_id) {
  return {{"type", "header"},
          {"schema", transcript_schema},
          {"grammar", grammar_version},
          {"config", cfg},
          {"seed", cfg.seed},
          {"scenario_hash", scenario_hash(cfg.scenario)},
          {"backend", backend_id}};
}

/// Appends records as they happen; call finish() with the result.
class TranscriptWriter {
 public:
  TranscriptWriter(const std::string& path, const RunConfig& cfg, std::string_view backend_id)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write transcript " + path);
    write(transcript_header(cfg, backend_id));
  }

  const std::string& path() const { return path_; }

  EpisodeHooks hooks() {
    EpisodeHooks h;
    h.on_exchange = [this](const ChatExchange& ex) {
      json j = ex;
      j["type"] = "exchange";
      write(j);
    };
    h.on_event = [this](std::string_view kind, std::uint64_t step, int iteration, const json& detail) {
      write({{"type", "event"}, {"kind", kind}, {"step", step}, {"iteration", iteration}, {"detail", detail}});
    };
    h.on_transition = [this](const json& t) {
      json j = t;
      j["type"] = "transition";
      write(j);
    };
    return h;
  }

  void finish(const EpisodeResult& result) {
    write({{"type", "result"}, {"result", result}});
    out_.flush();
  }

 private:
  void write(const json& j) { out_ << j.dump() << '\n'; }

  std::string path_;
  std::ofstream out_;
};

inline Transcript parse_transcript(std::string_view text) {
  Transcript t;
  bool have_header = false;
  bool have_result = false;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw TranscriptTruncated("line " + std::to_string(lineno + 1) + " is incomplete");
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (have_result) throw std::runtime_error("records after the result line");
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
      throw TranscriptTruncated("line " + std::to_string(lineno) + " is not a record");
    }
    const auto type = j.at("type").get<std::string>();
    if (!have_header) {
      if (type != "header") throw std::runtime_error("transcript does not start with a header");
      if (j.value("schema", "") != transcript_schema) {
        throw VersionMismatch("transcript schema " + j.value("schema", "?") + ", expected " +
                              std::string(transcript_schema));
      }
      if (j.value("grammar", "") != grammar_version) {
        throw VersionMismatch("grammar " + j.value("grammar", "?") + ", expected " + std::string(grammar_version));
      }
      t.header = std::move(j);
      have_header = true;
    } else if (type == "exchange") {
      t.exchanges.push_back(j.get<ChatExchange>());
    } else if (type == "event") {
      t.events.push_back({j.at("kind"), j.at("step"), j.at("iteration"), j.at("detail")});
    } else if (type == "transition") {
      j.erase("type");
      t.transitions.push_back(std::move(j));
    } else if (type == "result") {
      t.result = j.at("result").get<EpisodeResult>();
      have_result = true;
    } else {
      throw std::runtime_error("unknown record type " + type);
    }
  }
  if (!have_header) throw TranscriptTruncated("empty transcript");
  if (!have_result) throw TranscriptTruncated("transcript has no result record");
  return t;
}

inline Transcript read_transcript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read transcript " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_transcript(buf.str());
}

/// Serves recorded exchanges in order. A request whose role or prompt differs
/// from the recording means the run has diverged.
class ReplayBackend : public ChatBackend {
 public:
  explicit ReplayBackend(std::vector<ChatExchange> exchanges) : exchanges_(std::move(exchanges)) {}

  ChatExchange complete(const ChatRequest& request) override {
    if (next_ >= exchanges_.size()) throw ReplayDivergence("replay ran past the recorded exchanges");
    const auto& ex = exchanges_[next_];
    if (ex.role != request.role) {
      throw ReplayDivergence("exchange " + std::to_string(next_) + ": recorded role " + ex.role.str() + ", requested " +
                             request.role.str());
    }
    if (ex.prompt_messages != request.messages) {
      throw ReplayDivergence("exchange " + std::to_string(next_) + ": prompt differs from the recording");
    }
    ++next_;
    return ex;
  }

  std::string id() const override { return "replay"; }
  std::size_t consumed() const { return next_; }
  std::size_t available() const { return exchanges_.size(); }

 private:
  std::vector<ChatExchange> exchanges_;
  std::size_t next_ = 0;
};

struct ReplayOutcome {
  Episode replayed;
  Transcript recorded;

  bool identical() const {
    return replayed.result == recorded.result && replayed.transitions == recorded.transitions;
  }
};

/// Re-runs the recorded episode against its own responses.
inline ReplayOutcome replay_transcript(const std::string& path) {
  ReplayOutcome out{{}, read_transcript(path)};
  ReplayBackend backend(out.recorded.exchanges);
  out.replayed = run_episode(out.recorded.config(), backend);
  out.replayed.result.transcript_path = out.recorded.result.transcript_path;
  if (backend.consumed() != backend.available() && out.replayed.result.success) {
    out.replayed.result.failure_detail = "replay left " + std::to_string(backend.available() - backend.consumed()) +
                                         " recorded exchanges unused";
  }
  return out;
}

/// Runs one episode and records it; the result's transcript_path is `path`.
inline Episode run_recorded(const RunConfig& cfg, ChatBackend& backend, const std::string& path) {
  TranscriptWriter writer(path, cfg, backend.id());
  auto episode = run_episode(cfg, backend, writer.hooks());
  episode.result.transcript_path = path;
  writer.finish(episode.result);
  return episode;
}

}  // namespace llamac
