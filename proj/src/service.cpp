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

#include "narrator/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "narrator/error.hpp"

namespace narrator {
namespace {

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

void RequireFile(const std::filesystem::path& path, const char* what) {
  if (!path.empty() && !std::filesystem::exists(path)) {
    throw Error(ErrorCode::kFileMissing, std::string(what) + " not found: " + path.string());
  }
}

std::string ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CompletionAdapter ParseCompletionAdapter(const std::string& name) {
  if (name == "generic") return CompletionAdapter::kGeneric;
  if (name == "openai") return CompletionAdapter::kOpenAI;
  throw Error(ErrorCode::kInvalidConfig, "unknown completion adapter: " + name);
}

ScorerAdapter ParseScorerAdapter(const std::string& name) {
  if (name == "generic") return ScorerAdapter::kGeneric;
  if (name == "perspective") return ScorerAdapter::kPerspective;
  throw Error(ErrorCode::kInvalidConfig, "unknown scorer adapter: " + name);
}

}  // namespace

ServiceConfig ServiceConfig::Load(const std::filesystem::path& path) {
  const std::string text = ReadAll(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return FromJson(j, std::filesystem::absolute(path).parent_path());
}

ServiceConfig ServiceConfig::FromJson(const Json& j, const std::filesystem::path& base_dir) {
  ServiceConfig c;
  try {
    if (j.contains("listen")) {
      const auto& l = j.at("listen");
      c.host = l.value("host", c.host);
      c.port = l.value("port", c.port);
    }
    if (j.contains("auth_token")) c.auth_token = j.at("auth_token").get<std::string>();
    if (j.contains("auth_token_env")) {
      const auto name = j.at("auth_token_env").get<std::string>();
      const char* value = std::getenv(name.c_str());
      if (value == nullptr || *value == '\0') {
        throw Error(ErrorCode::kInvalidConfig, "auth token variable " + name + " is not set");
      }
      c.auth_token = value;
    }

    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      const auto kind = b.value("kind", "mock");
      if (kind == "mock") {
        c.backend = BackendKind::kMock;
      } else if (kind == "replay") {
        c.backend = BackendKind::kReplay;
        c.fixtures = Resolve(base_dir, b.at("fixtures").get<std::string>());
      } else if (kind == "remote") {
        c.backend = BackendKind::kRemote;
        const auto& r = b.at("remote");
        c.remote_backend.base_url = r.at("base_url").get<std::string>();
        c.remote_backend.path = r.value("path", c.remote_backend.path);
        c.remote_backend.model = r.value("model", "");
        c.remote_backend.api_key_env = r.value("api_key_env", "");
        c.remote_backend.timeout_ms = r.value("timeout_ms", c.remote_backend.timeout_ms);
        c.remote_backend.adapter = ParseCompletionAdapter(r.value("adapter", "generic"));
        if (r.contains("temperature")) c.remote_backend.temperature = r.at("temperature").get<double>();
        if (r.contains("top_p")) c.remote_backend.top_p = r.at("top_p").get<double>();
      } else {
        throw Error(ErrorCode::kInvalidConfig, "unknown backend kind: " + kind);
      }
    }

    c.session.filter = FilterPolicy::Default();
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      if (f.contains("blocklist")) c.blocklist = Resolve(base_dir, f.at("blocklist").get<std::string>());
      c.session.filter.blocklist_path = c.blocklist.string();
      if (f.contains("thresholds")) {
        for (const auto& [attr, value] : f.at("thresholds").items()) {
          c.session.filter.thresholds[attr] = value.get<double>();
        }
      }
      if (f.contains("on_scoring_error")) {
        c.session.filter.on_scoring_error =
            ParseScoringErrorPolicy(f.at("on_scoring_error").get<std::string>());
      }
      if (f.contains("scorer")) {
        const auto& s = f.at("scorer");
        const auto kind = s.value("kind", "mock");
        if (kind == "mock") {
          c.scorer = ScorerKind::kMock;
          if (s.contains("lexicon_dir")) c.lexicon_dir = Resolve(base_dir, s.at("lexicon_dir").get<std::string>());
        } else if (kind == "remote") {
          c.scorer = ScorerKind::kRemote;
          c.remote_scorer.base_url = s.at("base_url").get<std::string>();
          c.remote_scorer.path = s.value("path", c.remote_scorer.path);
          c.remote_scorer.adapter = ParseScorerAdapter(s.value("adapter", "generic"));
          c.remote_scorer.api_key_env = s.value("api_key_env", "");
          c.remote_scorer.timeout_ms = s.value("timeout_ms", c.remote_scorer.timeout_ms);
        } else {
          throw Error(ErrorCode::kInvalidConfig, "unknown scorer kind: " + kind);
        }
      }
    }
    c.remote_scorer.attributes = c.session.filter.attributes();

    if (j.contains("generation")) {
      c.session = ApplyConfigOverrides(c.session, j.at("generation"));
    }
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      c.seed_corpus = Resolve(base_dir, s.value("corpus", ""));
      c.seed_index_cache = Resolve(base_dir, s.value("index_cache", ""));
      c.seed_mode = ParseIndexMode(s.value("mode", "approx"));
    }
    c.abbreviations = Resolve(base_dir, j.value("abbreviations", ""));
    c.transcript_dir = Resolve(base_dir, j.value("transcript_dir", ""));
    if (j.contains("stage")) {
      c.stage_dwell_ms = j.at("stage").value("dwell_ms", c.stage_dwell_ms);
      c.stage_history = j.at("stage").value("history", c.stage_history);
    }
    c.log_level = j.value("log_level", c.log_level);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }

  c.session.generation.backend_id = c.backend == BackendKind::kMock     ? "mock"
                                    : c.backend == BackendKind::kReplay ? "replay"
                                                                        : "remote";
  c.session.Validate();
  RequireFile(c.fixtures, "fixtures");
  RequireFile(c.blocklist, "blocklist");
  RequireFile(c.lexicon_dir, "lexicon directory");
  RequireFile(c.seed_corpus, "seed corpus");
  RequireFile(c.abbreviations, "abbreviation list");
  if (!c.transcript_dir.empty()) std::filesystem::create_directories(c.transcript_dir);
  return c;
}

Runtime BuildRuntime(const ServiceConfig& config) {
  Runtime rt;
  switch (config.backend) {
    case BackendKind::kMock:
      rt.backend = std::make_shared<MockBackend>();
      break;
    case BackendKind::kReplay:
      rt.backend = std::make_shared<ReplayBackend>(FixtureStore::Load(config.fixtures));
      break;
    case BackendKind::kRemote:
      rt.backend = std::make_shared<RemoteBackend>(config.remote_backend);
      break;
  }
  Blocklist blocklist = config.blocklist.empty() ? Blocklist() : Blocklist::Load(config.blocklist);
  std::shared_ptr<ToxicityScorer> scorer;
  if (config.scorer == ScorerKind::kRemote) {
    scorer = std::make_shared<RemoteScorer>(config.remote_scorer);
  } else if (!config.lexicon_dir.empty()) {
    scorer = LexiconScorer::FromDirectory(config.lexicon_dir);
  } else {
    scorer = std::make_shared<LexiconScorer>(std::map<std::string, LexiconScorer::Lexicon>{});
  }
  rt.filter = std::make_shared<FilterPipeline>(std::move(blocklist), std::move(scorer), config.session.filter);
  rt.segmenter = config.abbreviations.empty()
                     ? std::make_shared<SentenceSegmenter>()
                     : std::make_shared<SentenceSegmenter>(SentenceSegmenter::FromFile(config.abbreviations));
  if (!config.seed_corpus.empty()) {
    auto corpus = SeedCorpus::Load(config.seed_corpus);
    auto embedder = std::make_shared<HashedTrigramEmbedder>();
    rt.seed_index = std::make_shared<SeedIndex>(
        config.seed_index_cache.empty()
            ? SeedIndex::Build(std::move(corpus), embedder, config.seed_mode)
            : SeedIndex::LoadOrBuild(config.seed_index_cache, corpus, embedder, config.seed_mode));
  }
  rt.session_defaults = config.session;
  return rt;
}

std::string_view AvatarStateName(AvatarState state) {
  switch (state) {
    case AvatarState::kIdle: return "Idle";
    case AvatarState::kSpeaking: return "Speaking";
    case AvatarState::kListening: return "Listening";
  }
  return "Idle";
}

Json StageViewToJson(const StageView& view) {
  return Json{{"session_id", view.session_id},
              {"state", SessionStateName(view.state)},
              {"lines", view.lines},
              {"latest", view.lines.empty() ? Json(nullptr) : Json(view.lines.back())},
              {"avatar_state", AvatarStateName(view.avatar)}};
}

struct SessionHub::Live {
  std::mutex action_mutex;  // serializes mutations

  mutable std::mutex state_mutex;
  mutable std::condition_variable appended;
  std::shared_ptr<const Session> snapshot;
  std::vector<SessionEvent> events;
  std::string last_publication_at;

  std::filesystem::path transcript_path;
  int transcript_fd = -1;

  ~Live() {
    if (transcript_fd >= 0) ::close(transcript_fd);
  }
};

SessionHub::SessionHub(Runtime runtime, std::shared_ptr<Clock> clock, Options options)
    : runtime_(std::move(runtime)), clock_(std::move(clock)), options_(std::move(options)) {
  if (options_.transcript_dir) std::filesystem::create_directories(*options_.transcript_dir);
}

SessionHub::~SessionHub() { Shutdown(); }

std::shared_ptr<SessionHub::Live> SessionHub::Find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kSessionNotFound, "no session " + id);
  return it->second;
}

void SessionHub::Persist(Live& live, const std::vector<SessionEvent>& events, bool sync) {
  if (!options_.transcript_dir || events.empty()) return;
  if (live.transcript_fd < 0) {
    live.transcript_fd = ::open(live.transcript_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (live.transcript_fd < 0) {
      spdlog::error("cannot open transcript {}", live.transcript_path.string());
      return;
    }
  }
  const std::string text = SerializeTranscript(events);
  std::size_t written = 0;
  while (written < text.size()) {
    const ssize_t n = ::write(live.transcript_fd, text.data() + written, text.size() - written);
    if (n <= 0) {
      spdlog::error("transcript write failed for {}", live.transcript_path.string());
      return;
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync) ::fsync(live.transcript_fd);
}

void SessionHub::Adopt(const std::vector<SessionEvent>& events, Session session) {
  auto live = std::make_shared<Live>();
  live->snapshot = std::make_shared<const Session>(std::move(session));
  live->events = events;
  for (const auto& e : events) {
    if (std::holds_alternative<PublicationCompleted>(e.body)) live->last_publication_at = e.timestamp;
  }
  const std::string id = live->snapshot->session_id;
  if (options_.transcript_dir) live->transcript_path = *options_.transcript_dir / (id + ".jsonl");
  std::unique_lock lock(map_mutex_);
  sessions_[id] = std::move(live);
}

std::string SessionHub::Create(const Json& overrides) {
  SessionConfig config = ApplyConfigOverrides(runtime_.session_defaults, overrides);
  ActionResult created = CreateSession(config, *clock_);
  const std::string id = created.session.session_id;
  auto live = std::make_shared<Live>();
  live->snapshot = std::make_shared<const Session>(std::move(created.session));
  live->events = created.events;
  if (options_.transcript_dir) live->transcript_path = *options_.transcript_dir / (id + ".jsonl");
  Persist(*live, created.events, true);
  {
    std::unique_lock lock(map_mutex_);
    sessions_[id] = live;
  }
  spdlog::info("session {} created", id);
  return id;
}

std::vector<SessionEvent> SessionHub::Apply(const std::string& id, const OperatorAction& action) {
  auto live = Find(id);
  std::lock_guard serial(live->action_mutex);
  std::shared_ptr<const Session> current;
  {
    std::lock_guard lock(live->state_mutex);
    current = live->snapshot;
  }
  Services services{*runtime_.backend, *runtime_.filter, *clock_, *runtime_.segmenter,
                    runtime_.seed_index.get()};
  ActionResult result = ApplyAction(*current, action, services);

  bool published = false;
  for (const auto& e : result.events) {
    published = published || std::holds_alternative<PublicationCompleted>(e.body) ||
                std::holds_alternative<EndSession>(e.body);
  }
  Persist(*live, result.events, published);
  {
    std::lock_guard lock(live->state_mutex);
    live->snapshot = std::make_shared<const Session>(std::move(result.session));
    for (const auto& e : result.events) {
      if (std::holds_alternative<PublicationCompleted>(e.body)) live->last_publication_at = e.timestamp;
      live->events.push_back(e);
    }
  }
  live->appended.notify_all();
  return result.events;
}

std::shared_ptr<const Session> SessionHub::Snapshot(const std::string& id) const {
  auto live = Find(id);
  std::lock_guard lock(live->state_mutex);
  return live->snapshot;
}

StageView SessionHub::Stage(const std::string& id) const {
  auto live = Find(id);
  std::shared_ptr<const Session> session;
  std::string last_publication;
  {
    std::lock_guard lock(live->state_mutex);
    session = live->snapshot;
    last_publication = live->last_publication_at;
  }
  StageView view;
  view.session_id = session->session_id;
  view.state = session->state;
  auto published = PublishedLines(*session);
  const std::size_t keep = std::min(published.size(), options_.stage_history);
  view.lines.assign(published.end() - static_cast<std::ptrdiff_t>(keep), published.end());
  if (session->state == SessionState::kRunning) {
    view.avatar = AvatarState::kListening;
    if (!last_publication.empty()) {
      const auto since = clock_->Now() - ParseRfc3339(last_publication);
      if (since.count() < options_.stage_dwell_ms) view.avatar = AvatarState::kSpeaking;
    }
  }
  return view;
}

std::string SessionHub::Transcript(const std::string& id) const {
  auto live = Find(id);
  std::lock_guard lock(live->state_mutex);
  return SerializeTranscript(live->events);
}

std::vector<SessionEvent> SessionHub::EventsSince(const std::string& id, std::uint64_t since,
                                                  std::chrono::milliseconds wait) const {
  auto live = Find(id);
  std::unique_lock lock(live->state_mutex);
  auto ready = [&] {
    return shutting_down_.load() || (!live->events.empty() && live->events.back().sequence > since);
  };
  if (!ready()) live->appended.wait_for(lock, wait, ready);
  std::vector<SessionEvent> out;
  // Sequences are dense from 1, so event n sits at index n - 1.
  for (std::size_t i = static_cast<std::size_t>(std::min<std::uint64_t>(since, live->events.size()));
       i < live->events.size(); ++i) {
    out.push_back(live->events[i]);
  }
  return out;
}

std::vector<SeedMatch> SessionHub::QuerySeeds(const std::string& suggestion, std::size_t k) const {
  if (!runtime_.seed_index) throw Error(ErrorCode::kSeedIndexUnavailable, "no seed corpus is configured");
  if (k == 0) throw Error(ErrorCode::kInvalidAction, "k must be >= 1");
  return runtime_.seed_index->Query(suggestion, k);
}

std::vector<std::string> SessionHub::Recover(std::vector<std::string>* failures) {
  std::vector<std::string> restored;
  if (!options_.transcript_dir) return restored;
  for (const auto& entry : std::filesystem::directory_iterator(*options_.transcript_dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    try {
      const auto events = ParseTranscript(ReadAll(entry.path()));
      if (events.empty()) continue;
      Session session;
      if (dynamic_cast<ReplayBackend*>(runtime_.backend.get()) != nullptr) {
        session = Replay(events, *runtime_.backend, *runtime_.filter, *runtime_.segmenter,
                         runtime_.seed_index.get())
                      .session;
      } else {
        session = Rehydrate(events, *runtime_.segmenter);
      }
      const std::string id = session.session_id;
      Adopt(events, std::move(session));
      restored.push_back(id);
      spdlog::info("recovered session {} ({} events)", id, events.size());
    } catch (const std::exception& e) {
      spdlog::warn("could not recover {}: {}", entry.path().string(), e.what());
      if (failures) failures->push_back(entry.path().string() + ": " + e.what());
    }
  }
  return restored;
}

std::vector<std::string> SessionHub::SessionIds() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

void SessionHub::Shutdown() {
  shutting_down_.store(true);
  std::shared_lock lock(map_mutex_);
  for (const auto& [_, live] : sessions_) {
    std::lock_guard state(live->state_mutex);
    live->appended.notify_all();
  }
}

bool SessionHub::shutting_down() const { return shutting_down_.load(); }

}  // namespace narrator
