// Copyright 2026 The Improv Narrator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// narrator: service entry point and offline utilities.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "narrator/http_server.hpp"
#include "narrator/utf8.hpp"
#include "narrator/service.hpp"

#ifndef NARRATOR_DATA_DIR
#define NARRATOR_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace narrator;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path.string());
  out << text;
}

void EmitJson(const Json& j) { std::cout << j.dump() << '\n' << std::flush; }

// Filter, segmenter and seed settings shared by several subcommands.
struct DataOptions {
  std::string data_dir = NARRATOR_DATA_DIR;
  std::string blocklist;
  std::string lexicons;
  std::string abbreviations;
  std::string seed_corpus;

  void Register(CLI::App* app, bool with_seed) {
    app->add_option("--data-dir", data_dir, "Directory holding the shipped data files")
        ->capture_default_str();
    app->add_option("--blocklist", blocklist, "Blocklist file (default: <data-dir>/blocklist.txt)");
    app->add_option("--lexicons", lexicons, "Mock scorer lexicon directory (default: <data-dir>/lexicons)");
    app->add_option("--abbreviations", abbreviations,
                    "Abbreviation list (default: <data-dir>/abbreviations.txt)");
    if (with_seed) {
      app->add_option("--seed-corpus", seed_corpus, "Seed corpus (default: <data-dir>/seed_corpus.txt)");
    }
  }

  fs::path Pick(const std::string& explicit_path, const char* name) const {
    return explicit_path.empty() ? fs::path(data_dir) / name : fs::path(explicit_path);
  }

  ServiceConfig ToConfig() const {
    ServiceConfig c;
    c.blocklist = Pick(blocklist, "blocklist.txt");
    c.lexicon_dir = Pick(lexicons, "lexicons");
    c.abbreviations = Pick(abbreviations, "abbreviations.txt");
    c.seed_corpus = Pick(seed_corpus, "seed_corpus.txt");
    c.session.filter = FilterPolicy::Default();
    c.session.filter.blocklist_path = c.blocklist.string();
    for (const auto& p : {c.blocklist, c.lexicon_dir, c.abbreviations}) {
      if (!fs::exists(p)) throw Error(ErrorCode::kFileMissing, p.string());
    }
    if (!fs::exists(c.seed_corpus)) c.seed_corpus.clear();
    return c;
  }
};

// ---- serve ------------------------------------------------------------------

std::atomic<ApiServer*> g_server{nullptr};

void OnSignal(int) {
  if (ApiServer* s = g_server.load()) s->Stop();
}

int Serve(const std::string& config_path, const std::string& host, int port) {
  ServiceConfig config = ServiceConfig::Load(config_path);
  if (!host.empty()) config.host = host;
  if (port >= 0) config.port = port;
  spdlog::set_level(spdlog::level::from_str(config.log_level));

  SessionHub::Options options;
  if (!config.transcript_dir.empty()) options.transcript_dir = config.transcript_dir;
  options.stage_dwell_ms = config.stage_dwell_ms;
  options.stage_history = config.stage_history;
  auto hub = std::make_shared<SessionHub>(BuildRuntime(config), std::make_shared<SystemClock>(), options);
  std::vector<std::string> failures;
  const auto recovered = hub->Recover(&failures);

  ApiServer server(hub, ApiServer::Options{config.auth_token});
  int bound = config.port;
  if (config.port == 0) {
    bound = server.BindToAnyPort(config.host);
    if (bound < 0) throw Error(ErrorCode::kInvalidConfig, "cannot bind " + config.host);
  } else if (!server.Bind(config.host, config.port)) {
    throw Error(ErrorCode::kInvalidConfig, "cannot bind " + config.host + ":" + std::to_string(config.port));
  }
  g_server.store(&server);
  std::signal(SIGINT, OnSignal);
  std::signal(SIGTERM, OnSignal);
  EmitJson(Json{{"listening", config.host}, {"port", bound}, {"recovered", recovered}, {"recovery_failures", failures}});
  spdlog::info("listening on {}:{}", config.host, bound);
  server.ListenAfterBind();
  g_server.store(nullptr);
  spdlog::info("stopped");
  return kOk;
}

// ---- replay -----------------------------------------------------------------

int ReplayCommand(const std::string& transcript, const std::string& fixtures, bool verify, bool json,
                  const DataOptions& data) {
  const auto events = ParseTranscript(ReadFile(transcript));
  ServiceConfig config = data.ToConfig();
  Session session;
  if (verify) {
    if (fixtures.empty()) throw UsageError("--verify needs --fixtures");
    config.backend = BackendKind::kReplay;
    config.fixtures = fixtures;
    Runtime rt = BuildRuntime(config);
    session = Replay(events, *rt.backend, *rt.filter, *rt.segmenter, rt.seed_index.get()).session;
  } else {
    session = Rehydrate(events, *BuildRuntime(config).segmenter);
  }
  const auto lines = PublishedLines(session);
  if (json) {
    for (const auto& l : lines) EmitJson(Json{{"published", l}});
    EmitJson(Json{{"session_id", session.session_id},
                  {"events", events.size()},
                  {"generated_sentences", GeneratedSentenceCount(events)},
                  {"published_lines", lines.size()},
                  {"verified", verify}});
  } else {
    for (const auto& l : lines) std::cout << l << '\n';
    std::cout << (verify ? "verified " : "read ") << events.size() << " events, "
              << GeneratedSentenceCount(events) << " generated sentences, " << lines.size()
              << " published lines\n";
  }
  return kOk;
}

// ---- seed -------------------------------------------------------------------

int SeedIndexCommand(const std::string& corpus, const std::string& out, const std::string& mode, bool json) {
  auto index = SeedIndex::Build(SeedCorpus::Load(corpus), std::make_shared<HashedTrigramEmbedder>(),
                                ParseIndexMode(mode));
  index.Save(out);
  if (json) {
    EmitJson(Json{{"index", out}, {"entries", index.size()}, {"mode", mode}});
  } else {
    std::cout << "wrote " << index.size() << " entries to " << out << '\n';
  }
  return kOk;
}

int SeedQueryCommand(const std::string& index_path, const std::string& suggestion, std::size_t k) {
  if (k == 0) throw UsageError("-k must be at least 1");
  const auto index = SeedIndex::Load(index_path, std::make_shared<HashedTrigramEmbedder>());
  for (const auto& m : index.Query(suggestion, k)) EmitJson(m);
  return kOk;
}

// ---- filter-check -------------------------------------------------------------

int FilterCheckCommand(const std::string& policy_path, const DataOptions& data) {
  ServiceConfig config = data.ToConfig();
  FilterPolicy policy = config.session.filter;
  if (!policy_path.empty()) {
    try {
      policy = Json::parse(ReadFile(policy_path)).get<FilterPolicy>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, policy_path + ": " + e.what());
    }
    policy.Validate();
  }
  config.session.filter = policy;
  Runtime rt = BuildRuntime(config);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    EmitJson(Json{{"sentence", line}, {"verdict", rt.filter->Check(line, policy)}});
  }
  return kOk;
}

// ---- record -----------------------------------------------------------------

int RecordCommand(const std::string& backend, const std::string& config_path, const std::string& fixtures_out,
                  const std::string& transcript_out, const Json& overrides, const DataOptions& data) {
  ServiceConfig config = config_path.empty() ? data.ToConfig() : ServiceConfig::Load(config_path);
  if (backend == "mock") {
    config.backend = BackendKind::kMock;
  } else if (backend == "remote") {
    if (config.backend != BackendKind::kRemote) throw UsageError("--backend remote needs a --config with a remote backend");
  } else {
    throw UsageError("--backend must be mock or remote");
  }
  Runtime rt = BuildRuntime(config);
  auto store = fs::exists(fixtures_out) ? FixtureStore::Load(fixtures_out) : std::make_shared<FixtureStore>();
  SystemClock clock;
  auto recording = std::make_shared<RecordingBackend>(rt.backend, store, [&clock] {
    return FormatRfc3339(clock.Now());
  });
  SessionConfig session_config = ApplyConfigOverrides(config.session, overrides);
  session_config.generation.backend_id = recording->id();
  ActionResult state = CreateSession(session_config, clock);
  std::vector<SessionEvent> log = state.events;
  Services services{*recording, *rt.filter, clock, *rt.segmenter, rt.seed_index.get()};

  auto flush = [&] {
    store->Save(fixtures_out);
    WriteFile(transcript_out, SerializeTranscript(log));
  };
  for (const auto& e : state.events) EmitJson(e);
  std::string line;
  std::int64_t line_no = 0;
  int status = kOk;
  while (std::getline(std::cin, line)) {
    ++line_no;
    if (utf8::CollapseWhitespace(line).empty()) continue;
    try {
      const OperatorAction action = ActionFromJson(Json::parse(line));
      ActionResult next = ApplyAction(state.session, action, services);
      for (const auto& e : next.events) {
        EmitJson(e);
        log.push_back(e);
      }
      state.session = std::move(next.session);
      flush();
    } catch (const Json::exception& e) {
      EmitJson(Json{{"line", line_no}, {"error", {{"code", "ParseError"}, {"message", e.what()}}}});
      status = kFailure;
    } catch (const Error& e) {
      Json body = ErrorBody(e);
      body["line"] = line_no;
      EmitJson(body);
      status = kFailure;
    }
  }
  flush();
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  auto console = spdlog::stderr_color_mt("narrator");
  spdlog::set_default_logger(console);
  spdlog::set_level(spdlog::level::warn);

  CLI::App app{"Human-in-the-loop narration service"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "Machine-readable JSON lines on stdout");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string config_path, host;
  int port = -1;
  serve->add_option("--config", config_path, "Service config JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Override the listen host");
  serve->add_option("--port", port, "Override the listen port (0 picks a free one)");

  auto* replay = app.add_subcommand("replay", "Read or verify a recorded session");
  std::string transcript, fixtures;
  bool verify = false;
  DataOptions replay_data;
  replay->add_option("--transcript", transcript, "Transcript JSONL")->required()->check(CLI::ExistingFile);
  replay->add_option("--fixtures", fixtures, "Completion fixtures JSONL")->check(CLI::ExistingFile);
  replay->add_flag("--verify", verify, "Re-execute against the fixtures and fail on divergence");
  replay->add_flag("--json", json, "Machine-readable JSON lines on stdout");
  replay_data.Register(replay, true);

  auto* seed_index = app.add_subcommand("seed-index", "Build a seed index file");
  std::string corpus, out, mode = "approx";
  seed_index->add_option("--corpus", corpus, "Corpus, one sentence per line")->required()->check(CLI::ExistingFile);
  seed_index->add_option("--out", out, "Index file to write")->required();
  seed_index->add_option("--mode", mode, "exact or approx")
      ->check(CLI::IsMember({"exact", "approx"}))
      ->capture_default_str();
  seed_index->add_flag("--json", json, "Machine-readable JSON lines on stdout");

  auto* seed_query = app.add_subcommand("seed-query", "Query a seed index (JSON lines)");
  std::string index_path, suggestion;
  std::size_t k = 5;
  seed_query->add_option("--index", index_path, "Index file")->required()->check(CLI::ExistingFile);
  seed_query->add_option("--suggestion", suggestion, "Audience suggestion")->required();
  seed_query->add_option("-k", k, "Number of matches")->capture_default_str();
  seed_query->add_flag("--json", json, "Accepted for symmetry; output is always JSON");

  auto* filter_check = app.add_subcommand("filter-check", "Filter stdin lines, one JSON verdict per line");
  std::string policy_path;
  DataOptions filter_data;
  filter_check->add_option("--policy", policy_path, "Filter policy JSON")->check(CLI::ExistingFile);
  filter_check->add_flag("--json", json, "Accepted for symmetry; output is always JSON");
  filter_data.Register(filter_check, false);

  auto* record = app.add_subcommand("record", "Apply JSON actions from stdin while capturing fixtures");
  std::string backend = "remote", record_config, fixtures_out, transcript_out, overrides_text = "{}";
  DataOptions record_data;
  record->add_option("--backend", backend, "mock or remote")
      ->check(CLI::IsMember({"mock", "remote"}))
      ->capture_default_str();
  record->add_option("--config", record_config, "Service config JSON (backend, filter)")->check(CLI::ExistingFile);
  record->add_option("--fixtures-out", fixtures_out, "Fixture JSONL to create or extend")->required();
  record->add_option("--transcript-out", transcript_out, "Transcript JSONL to write")->required();
  record->add_option("--session-config", overrides_text, "Session config overrides as JSON");
  record->add_flag("--json", json, "Accepted for symmetry; output is always JSON");
  record_data.Register(record, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*serve) return Serve(config_path, host, port);
    if (*replay) return ReplayCommand(transcript, fixtures, verify, json, replay_data);
    if (*seed_index) return SeedIndexCommand(corpus, out, mode, json);
    if (*seed_query) return SeedQueryCommand(index_path, suggestion, k);
    if (*filter_check) return FilterCheckCommand(policy_path, filter_data);
    if (*record) {
      Json overrides;
      try {
        overrides = Json::parse(overrides_text);
      } catch (const Json::exception&) {
        throw UsageError("--session-config is not JSON");
      }
      return RecordCommand(backend, record_config, fixtures_out, transcript_out, overrides, record_data);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    if (json) {
      EmitJson(ErrorBody(e));
    }
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
