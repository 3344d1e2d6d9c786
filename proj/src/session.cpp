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

#include "narrator/session.hpp"

#include <random>
#include <set>

#include "narrator/digest.hpp"
#include "narrator/error.hpp"
#include "narrator/json_io.hpp"
#include "narrator/utf8.hpp"

namespace narrator {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string NewSessionId() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id = "s-";
  const std::uint64_t bits = rng();
  for (int i = 15; i >= 0; --i) id.push_back(kHex[(bits >> (i * 4)) & 0xF]);
  return id;
}

std::int64_t MillisBetween(const std::string& from, const std::string& to) {
  if (from.empty() || to.empty()) return 0;
  return (ParseRfc3339(to) - ParseRfc3339(from)).count();
}

void RequireNotEnded(const Session& session) {
  if (session.state == SessionState::kEnded) {
    throw Error(ErrorCode::kSessionEnded, "session " + session.session_id + " has ended");
  }
}

void EnterRunning(Session& session) {
  if (session.state == SessionState::kCreated || session.state == SessionState::kSeeded) {
    session.state = SessionState::kRunning;
  }
}

void AppendSegmented(Session& session, std::string_view text, LineSource source,
                     const SentenceSegmenter& segmenter) {
  for (auto& sentence : segmenter.Split(text)) session.context.Append(std::move(sentence), source);
}

const CandidateSentence* FindCandidate(const Session& session, const PublishItem& item) {
  for (const auto& set : session.pending_sets) {
    if (set.set_id != item.set_id) continue;
    if (item.index >= set.sentences.size()) return nullptr;
    return &set.sentences[item.index];
  }
  return nullptr;
}

// Builds the lines a SelectAndPublish would publish, enforcing the selection
// and filter rules.
std::vector<PublishedLine> PreparePublication(const Session& session, const SelectAndPublish& action,
                                              const Services& services) {
  std::vector<PublishedLine> lines;
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto& [pos, _] : action.edits) {
    if (pos >= action.items.size()) {
      throw Error(ErrorCode::kInvalidSelection, "edit refers to unselected item " + std::to_string(pos));
    }
  }
  for (std::size_t pos = 0; pos < action.items.size(); ++pos) {
    const PublishItem& item = action.items[pos];
    const CandidateSentence* candidate = FindCandidate(session, item);
    if (candidate == nullptr) {
      throw Error(ErrorCode::kInvalidSelection,
                  "no pending sentence " + item.set_id + "#" + std::to_string(item.index));
    }
    if (!seen.emplace(item.set_id, item.index).second) {
      throw Error(ErrorCode::kInvalidSelection,
                  "sentence " + item.set_id + "#" + std::to_string(item.index) + " selected twice");
    }
    PublishedLine line;
    line.set_id = item.set_id;
    line.index = item.index;
    if (auto edit = action.edits.find(pos); edit != action.edits.end()) {
      line.text = utf8::CollapseWhitespace(edit->second);
      if (line.text.empty()) throw Error(ErrorCode::kInvalidAction, "edited text is empty");
      line.edited = line.text != candidate->text;
    } else {
      line.text = candidate->text;
    }
    line.verdict = line.edited ? services.filter.Check(line.text, session.config.filter)
                               : candidate->verdict;
    if (line.verdict.blocked()) {
      if (!action.override_block) {
        throw Error(ErrorCode::kBlockedWithoutOverride,
                    "\"" + line.text + "\" is blocked (" +
                        std::string(FilterStageName(line.verdict.stage)) + ")");
      }
      line.overridden = true;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

void SessionConfig::Validate() const {
  generation.Validate();
  filter.Validate();
}

std::string_view ActorName(Actor actor) { return actor == Actor::kOperator ? "Operator" : "System"; }

std::string_view EventTypeName(const EventBody& body) {
  return std::visit(Overloaded{
                        [](const TypeContext&) { return "TypeContext"; },
                        [](const RequestGeneration&) { return "RequestGeneration"; },
                        [](const SelectAndPublish&) { return "SelectAndPublish"; },
                        [](const SkipGeneration&) { return "SkipGeneration"; },
                        [](const SeedQuery&) { return "SeedQuery"; },
                        [](const SeedAccept&) { return "SeedAccept"; },
                        [](const SceneNote&) { return "SceneNote"; },
                        [](const EndSession&) { return "EndSession"; },
                        [](const SessionCreated&) { return "SessionCreated"; },
                        [](const GenerationCompleted&) { return "GenerationCompleted"; },
                        [](const PublicationCompleted&) { return "PublicationCompleted"; },
                        [](const SeedQueryCompleted&) { return "SeedQueryCompleted"; },
                    },
                    body);
}

Actor ActorOf(const EventBody& body) {
  return AsOperatorAction(body) ? Actor::kOperator : Actor::kSystem;
}

EventBody ToEventBody(const OperatorAction& action) {
  return std::visit([](const auto& a) -> EventBody { return a; }, action);
}

std::optional<OperatorAction> AsOperatorAction(const EventBody& body) {
  return std::visit(
      [](const auto& e) -> std::optional<OperatorAction> {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_constructible_v<OperatorAction, T> &&
                      !std::is_same_v<T, SessionCreated> && !std::is_same_v<T, GenerationCompleted> &&
                      !std::is_same_v<T, PublicationCompleted> &&
                      !std::is_same_v<T, SeedQueryCompleted>) {
          return OperatorAction(e);
        } else {
          return std::nullopt;
        }
      },
      body);
}

std::string_view SessionStateName(SessionState state) {
  switch (state) {
    case SessionState::kCreated: return "Created";
    case SessionState::kSeeded: return "Seeded";
    case SessionState::kRunning: return "Running";
    case SessionState::kEnded: return "Ended";
  }
  return "Created";
}

SessionState ParseSessionState(std::string_view name) {
  for (auto s : {SessionState::kCreated, SessionState::kSeeded, SessionState::kRunning,
                 SessionState::kEnded}) {
    if (SessionStateName(s) == name) return s;
  }
  throw Error(ErrorCode::kParseError, "unknown session state: " + std::string(name));
}

void FoldEvent(Session& session, const SessionEvent& event, const SentenceSegmenter& segmenter) {
  if (event.sequence != session.last_sequence + 1) {
    throw Error(ErrorCode::kInvalidAction, "event sequence " + std::to_string(event.sequence) +
                                               " does not follow " +
                                               std::to_string(session.last_sequence));
  }
  std::visit(
      Overloaded{
          [&](const SessionCreated& e) {
            if (session.last_sequence != 0) {
              throw Error(ErrorCode::kInvalidAction, "SessionCreated must be the first event");
            }
            session = Session{};
            session.session_id = e.session_id;
            session.config = e.config;
            session.created_at = event.timestamp;
          },
          [&](const TypeContext& e) {
            AppendSegmented(session, e.text, LineSource::kOperatorTyped, segmenter);
            session.pending_sets.clear();
            EnterRunning(session);
          },
          [&](const RequestGeneration&) {
            ++session.stats.generation_request_count;
            EnterRunning(session);
          },
          [&](const GenerationCompleted& e) {
            session.pending_sets = e.sets;
            session.generation_counter = e.generation;
            for (const auto& set : e.sets) session.stats.generated_sentence_count += set.sentences.size();
          },
          [&](const SelectAndPublish& e) {
            if (e.items.empty()) session.pending_sets.clear();
            EnterRunning(session);
          },
          [&](const PublicationCompleted& e) {
            for (const auto& line : e.lines) {
              session.context.Append(line.text, LineSource::kAiPublished);
            }
            session.stats.published_sentence_count += e.lines.size();
            session.pending_sets.clear();
          },
          [&](const SkipGeneration&) { session.pending_sets.clear(); },
          [&](const SeedQuery&) {},
          [&](const SeedQueryCompleted& e) { session.last_seed_matches = e.matches; },
          [&](const SeedAccept& e) {
            for (const auto& match : session.last_seed_matches) {
              if (match.entry_id == e.entry_id) {
                AppendSegmented(session, match.sentence, LineSource::kOperatorTyped, segmenter);
                session.state = SessionState::kSeeded;
                return;
              }
            }
            throw Error(ErrorCode::kInvalidSelection,
                        "entry " + std::to_string(e.entry_id) + " is not among the last seed matches");
          },
          [&](const SceneNote&) {},
          [&](const EndSession&) { session.state = SessionState::kEnded; },
      },
      event.body);
  session.last_sequence = event.sequence;
  session.last_event_at = event.timestamp;
  session.stats.elapsed_ms = MillisBetween(session.created_at, event.timestamp);
}

ActionResult CreateSession(const SessionConfig& config, Clock& clock,
                           std::optional<std::string> session_id) {
  config.Validate();
  SessionEvent created;
  created.sequence = 1;
  created.timestamp = FormatRfc3339(clock.Now());
  created.actor = Actor::kSystem;
  created.body = SessionCreated{session_id.value_or(NewSessionId()), config};
  ActionResult result;
  static const SentenceSegmenter kUnused;
  FoldEvent(result.session, created, kUnused);
  result.events.push_back(std::move(created));
  return result;
}

ActionResult ApplyAction(const Session& session, const OperatorAction& action,
                         const Services& services) {
  if (std::holds_alternative<EndSession>(action) && session.state == SessionState::kEnded) {
    return ActionResult{session, {}};
  }
  RequireNotEnded(session);

  const std::string timestamp = FormatRfc3339(services.clock.Now());
  std::vector<EventBody> bodies;
  bodies.push_back(ToEventBody(action));

  std::visit(
      Overloaded{
          [&](const TypeContext& a) {
            if (utf8::CollapseWhitespace(a.text).empty()) {
              throw Error(ErrorCode::kInvalidAction, "TypeContext text is empty");
            }
          },
          [&](const RequestGeneration&) {
            const std::uint64_t generation = session.generation_counter + 1;
            GenerationResult result = GenerateCandidateSets(
                session.context, session.config.generation, services.backend, services.filter,
                session.config.filter, services.segmenter, "g" + std::to_string(generation));
            bodies.push_back(GenerationCompleted{generation, Sha256Hex(RenderPrompt(session.context)),
                                                 std::move(result.sets)});
          },
          [&](const SelectAndPublish& a) {
            if (a.items.empty()) {
              if (!a.edits.empty()) throw Error(ErrorCode::kInvalidSelection, "edits without items");
              return;
            }
            bodies.push_back(PublicationCompleted{PreparePublication(session, a, services)});
          },
          [&](const SkipGeneration&) {},
          [&](const SeedQuery& a) {
            if (services.seed_index == nullptr) {
              throw Error(ErrorCode::kSeedIndexUnavailable, "no seed corpus is configured");
            }
            if (a.k == 0) throw Error(ErrorCode::kInvalidAction, "k must be >= 1");
            bodies.push_back(SeedQueryCompleted{services.seed_index->Query(a.suggestion, a.k)});
          },
          [&](const SeedAccept& a) {
            if (session.state != SessionState::kCreated) {
              throw Error(ErrorCode::kInvalidTransition,
                          "seeding is only possible before the scene starts");
            }
            bool found = false;
            for (const auto& m : session.last_seed_matches) found = found || m.entry_id == a.entry_id;
            if (!found) {
              throw Error(ErrorCode::kInvalidSelection,
                          "entry " + std::to_string(a.entry_id) + " is not among the last seed matches");
            }
          },
          [&](const SceneNote& a) {
            if (utf8::CollapseWhitespace(a.text).empty()) {
              throw Error(ErrorCode::kInvalidAction, "SceneNote text is empty");
            }
          },
          [&](const EndSession&) {},
      },
      action);

  ActionResult result{session, {}};
  for (auto& body : bodies) {
    SessionEvent event;
    event.sequence = result.session.last_sequence + 1;
    event.timestamp = timestamp;
    event.actor = ActorOf(body);
    event.body = std::move(body);
    FoldEvent(result.session, event, services.segmenter);
    result.events.push_back(std::move(event));
  }
  return result;
}

Session Rehydrate(const std::vector<SessionEvent>& events, const SentenceSegmenter& segmenter) {
  Session session;
  for (const auto& event : events) FoldEvent(session, event, segmenter);
  session.pending_sets.clear();
  return session;
}

std::string SerializeEvent(const SessionEvent& event) { return Json(event).dump(); }

std::string SerializeTranscript(const std::vector<SessionEvent>& events) {
  std::string out;
  for (const auto& event : events) {
    out += SerializeEvent(event);
    out.push_back('\n');
  }
  return out;
}

SessionEvent ParseEvent(std::string_view line) {
  try {
    return Json::parse(line).get<SessionEvent>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

std::vector<SessionEvent> ParseTranscript(std::string_view text) {
  std::vector<SessionEvent> events;
  std::int64_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    const bool terminated = end != std::string_view::npos;
    if (!terminated) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() && terminated) continue;
    try {
      events.push_back(ParseEvent(line));
    } catch (const Error& e) {
      throw ParseErrorAt(line_no, e.what());
    }
  }
  return events;
}

namespace {

// Fails the runs a recorded generation marked backend_failed and forwards
// the rest.
class RecordedFailureBackend : public ModelBackend {
 public:
  RecordedFailureBackend(ModelBackend& inner, std::set<int> failed)
      : inner_(inner), failed_(std::move(failed)) {}

  CompletionResponse Complete(const CompletionRequest& request) override {
    if (failed_.count(request.run_index) > 0) {
      throw Error(ErrorCode::kBackendUnavailable, "run failed in the recorded session");
    }
    return inner_.Complete(request);
  }
  std::string id() const override { return inner_.id(); }

 private:
  ModelBackend& inner_;
  std::set<int> failed_;
};

Error Divergence(std::uint64_t sequence, const std::string& detail) {
  Error e(ErrorCode::kDivergenceDetected, "at sequence " + std::to_string(sequence) + ": " + detail);
  e.sequence = static_cast<std::int64_t>(sequence);
  return e;
}

}  // namespace

ReplayResult Replay(const std::vector<SessionEvent>& events, ModelBackend& backend,
                    const FilterPipeline& filter, const SentenceSegmenter& segmenter,
                    const SeedIndex* seed_index) {
  ManualClock clock(Timestamp{});
  ReplayResult result;
  if (events.empty()) {
    auto created = CreateSession(SessionConfig{}, clock);
    result.session = std::move(created.session);
    result.events = std::move(created.events);
    return result;
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].sequence != i + 1) {
      Error e(ErrorCode::kParseError, "event sequence is not dense at position " + std::to_string(i));
      e.sequence = static_cast<std::int64_t>(events[i].sequence);
      throw e;
    }
  }
  const auto* created = std::get_if<SessionCreated>(&events.front().body);
  if (created == nullptr) throw Error(ErrorCode::kParseError, "transcript must start with SessionCreated");

  clock.Set(ParseRfc3339(events.front().timestamp));
  auto start = CreateSession(created->config, clock, created->session_id);
  if (SerializeEvent(start.events.front()) != SerializeEvent(events.front())) {
    throw Divergence(1, "SessionCreated differs");
  }
  result.session = std::move(start.session);
  result.events = std::move(start.events);

  std::size_t pos = 1;
  while (pos < events.size()) {
    const SessionEvent& recorded = events[pos];
    const auto action = AsOperatorAction(recorded.body);
    if (!action) {
      throw Divergence(recorded.sequence, std::string("unexpected system event ") +
                                              std::string(EventTypeName(recorded.body)));
    }
    std::set<int> failed_runs;
    if (pos + 1 < events.size()) {
      if (const auto* gen = std::get_if<GenerationCompleted>(&events[pos + 1].body)) {
        for (const auto& set : gen->sets) {
          if (set.backend_failed) failed_runs.insert(set.run_index);
        }
      }
    }
    RecordedFailureBackend replay_backend(backend, std::move(failed_runs));
    clock.Set(ParseRfc3339(recorded.timestamp));
    Services services{replay_backend, filter, clock, segmenter, seed_index};
    ActionResult step;
    try {
      step = ApplyAction(result.session, *action, services);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kFixtureMiss) throw;
      throw Divergence(recorded.sequence, std::string("action failed on replay: ") + e.what());
    }
    for (const auto& produced : step.events) {
      if (pos >= events.size()) throw Divergence(produced.sequence, "replay produced extra events");
      if (SerializeEvent(produced) != SerializeEvent(events[pos])) {
        throw Divergence(events[pos].sequence, std::string(EventTypeName(events[pos].body)) +
                                                   " differs from the recorded event");
      }
      ++pos;
    }
    if (step.events.empty()) {
      // Only a repeated EndSession yields no events, and it is never recorded.
      throw Divergence(recorded.sequence, "recorded action produced no events on replay");
    }
    if (pos < events.size() && ActorOf(events[pos].body) == Actor::kSystem) {
      throw Divergence(events[pos].sequence, "recorded system event was not regenerated");
    }
    result.session = std::move(step.session);
    for (auto& e : step.events) result.events.push_back(std::move(e));
  }
  return result;
}

std::vector<std::string> PublishedLines(const Session& session) {
  std::vector<std::string> out;
  for (const auto& line : session.context.lines()) {
    if (line.source == LineSource::kAiPublished) out.push_back(line.text);
  }
  return out;
}

std::size_t GeneratedSentenceCount(const std::vector<SessionEvent>& events) {
  std::size_t total = 0;
  for (const auto& e : events) {
    if (const auto* g = std::get_if<GenerationCompleted>(&e.body)) {
      for (const auto& set : g->sets) total += set.sentences.size();
    }
  }
  return total;
}

}  // namespace narrator
