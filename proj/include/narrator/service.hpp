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

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "narrator/backend.hpp"
#include "narrator/clock.hpp"
#include "narrator/filter.hpp"
#include "narrator/json_io.hpp"
#include "narrator/remote_scorer.hpp"
#include "narrator/seed.hpp"
#include "narrator/segmenter.hpp"
#include "narrator/session.hpp"

namespace narrator {

enum class BackendKind { kMock, kReplay, kRemote };
enum class ScorerKind { kMock, kRemote };

// Service configuration, read from a JSON file. Relative paths resolve
// against the directory holding the file.
//
//   {
//     "listen": {"host": "127.0.0.1", "port": 8080},
//     "auth_token_env": "NARRATOR_TOKEN",
//     "backend": {"kind": "mock" | "replay" | "remote",
//                 "fixtures": "...",
//                 "remote": {"base_url", "path", "model", "api_key_env",
//                            "timeout_ms", "adapter", "temperature", "top_p"}},
//     "filter": {"blocklist": "...",
//                "scorer": {"kind": "mock", "lexicon_dir": "..."} |
//                          {"kind": "remote", "base_url", "path", "adapter",
//                           "api_key_env", "timeout_ms"},
//                "thresholds": {...}, "on_scoring_error": "FailClosed"},
//     "generation": {"runs_k": 3, "budget_chars": 100,
//                    "max_completion_chars": 400, "sampling_seed": null},
//     "seed": {"corpus": "...", "index_cache": "...", "mode": "approx"},
//     "abbreviations": "...",
//     "transcript_dir": "...",
//     "stage": {"dwell_ms": 5000, "history": 20},
//     "log_level": "info"
//   }
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string auth_token;  // empty disables auth

  BackendKind backend = BackendKind::kMock;
  std::filesystem::path fixtures;
  RemoteBackendConfig remote_backend;

  std::filesystem::path blocklist;
  ScorerKind scorer = ScorerKind::kMock;
  std::filesystem::path lexicon_dir;
  RemoteScorerConfig remote_scorer;

  SessionConfig session;

  std::filesystem::path seed_corpus;
  std::filesystem::path seed_index_cache;
  IndexMode seed_mode = IndexMode::kApproximate;

  std::filesystem::path abbreviations;
  std::filesystem::path transcript_dir;

  std::int64_t stage_dwell_ms = 5000;
  std::size_t stage_history = 20;
  std::string log_level = "info";

  // Throws InvalidConfig, or FileMissing for referenced files that do not
  // exist.
  static ServiceConfig Load(const std::filesystem::path& path);
  static ServiceConfig FromJson(const Json& j, const std::filesystem::path& base_dir);
};

// The long-lived collaborators built from a config.
struct Runtime {
  std::shared_ptr<ModelBackend> backend;
  std::shared_ptr<FilterPipeline> filter;
  std::shared_ptr<SentenceSegmenter> segmenter;
  std::shared_ptr<SeedIndex> seed_index;  // null without a seed corpus
  SessionConfig session_defaults;
};

Runtime BuildRuntime(const ServiceConfig& config);

enum class AvatarState { kIdle, kSpeaking, kListening };
std::string_view AvatarStateName(AvatarState state);

// What the audience-facing display may show. Never includes pending
// candidates or filter evidence.
struct StageView {
  std::string session_id;
  SessionState state = SessionState::kCreated;
  std::vector<std::string> lines;  // latest published narration, oldest first
  AvatarState avatar = AvatarState::kIdle;
};

Json StageViewToJson(const StageView& view);

// In-memory sessions for one process. Mutations of a session are serialized;
// readers get immutable snapshots and never wait for a running action.
class SessionHub {
 public:
  struct Options {
    std::optional<std::filesystem::path> transcript_dir;
    std::int64_t stage_dwell_ms = 5000;
    std::size_t stage_history = 20;
  };

  SessionHub(Runtime runtime, std::shared_ptr<Clock> clock, Options options);
  ~SessionHub();

  // Returns the new session id. Throws InvalidConfig.
  std::string Create(const Json& overrides);

  // Throws SessionNotFound for unknown ids; other errors come from
  // ApplyAction.
  std::vector<SessionEvent> Apply(const std::string& id, const OperatorAction& action);

  std::shared_ptr<const Session> Snapshot(const std::string& id) const;
  StageView Stage(const std::string& id) const;
  std::string Transcript(const std::string& id) const;

  // Events with sequence > since. Waits up to `wait` for one to appear.
  // Returns an empty list on timeout or shutdown.
  std::vector<SessionEvent> EventsSince(const std::string& id, std::uint64_t since,
                                        std::chrono::milliseconds wait) const;

  std::vector<SeedMatch> QuerySeeds(const std::string& suggestion, std::size_t k) const;

  // Restores every `*.jsonl` transcript in the configured directory. With a
  // replay backend sessions are re-executed and verified; otherwise they are
  // rehydrated from the log with pending sets dropped. Returns the restored
  // ids; unreadable transcripts are skipped and reported in `failures`.
  std::vector<std::string> Recover(std::vector<std::string>* failures = nullptr);

  // Installs an existing event log as a live session.
  void Adopt(const std::vector<SessionEvent>& events, Session session);

  std::vector<std::string> SessionIds() const;

  // Wakes every waiting event reader; later waits return immediately.
  void Shutdown();
  bool shutting_down() const;

  const Runtime& runtime() const { return runtime_; }

 private:
  struct Live;
  std::shared_ptr<Live> Find(const std::string& id) const;
  void Persist(Live& live, const std::vector<SessionEvent>& events, bool sync);

  Runtime runtime_;
  std::shared_ptr<Clock> clock_;
  Options options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::atomic<bool> shutting_down_{false};
};

}  // namespace narrator
