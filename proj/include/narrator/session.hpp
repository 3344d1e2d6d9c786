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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "narrator/backend.hpp"
#include "narrator/clock.hpp"
#include "narrator/context.hpp"
#include "narrator/engine.hpp"
#include "narrator/filter.hpp"
#include "narrator/seed.hpp"
#include "narrator/segmenter.hpp"

namespace narrator {

// ---- operator actions -------------------------------------------------------

// A narration or summary line typed by the operator. Multi-sentence input
// becomes several context lines.
struct TypeContext {
  std::string text;
  bool operator==(const TypeContext&) const = default;
};

struct RequestGeneration {
  bool operator==(const RequestGeneration&) const = default;
};

struct PublishItem {
  std::string set_id;
  std::size_t index = 0;
  bool operator==(const PublishItem&) const = default;
};

// Publishes pending candidates in the order given. `edits` is keyed by the
// position in `items`.
struct SelectAndPublish {
  std::vector<PublishItem> items;
  std::map<std::size_t, std::string> edits;
  bool override_block = false;
  bool operator==(const SelectAndPublish&) const = default;
};

// Discards the pending sets ("selecting none").
struct SkipGeneration {
  bool operator==(const SkipGeneration&) const = default;
};

struct SeedQuery {
  std::string suggestion;
  std::size_t k = 5;
  bool operator==(const SeedQuery&) const = default;
};

struct SeedAccept {
  std::size_t entry_id = 0;
  bool operator==(const SeedAccept&) const = default;
};

// Stage direction. Logged, never part of the model context.
struct SceneNote {
  std::string text;
  bool operator==(const SceneNote&) const = default;
};

struct EndSession {
  bool operator==(const EndSession&) const = default;
};

using OperatorAction = std::variant<TypeContext, RequestGeneration, SelectAndPublish, SkipGeneration,
                                    SeedQuery, SeedAccept, SceneNote, EndSession>;

// ---- system events ----------------------------------------------------------

struct SessionConfig {
  GenerationParams generation;
  FilterPolicy filter = FilterPolicy::Default();

  // Throws InvalidConfig.
  void Validate() const;
  bool operator==(const SessionConfig&) const = default;
};

struct SessionCreated {
  std::string session_id;
  SessionConfig config;
  bool operator==(const SessionCreated&) const = default;
};

struct GenerationCompleted {
  std::uint64_t generation = 0;
  std::string prompt_sha256;
  std::vector<CandidateSet> sets;
  bool operator==(const GenerationCompleted&) const = default;
};

struct PublishedLine {
  std::string text;
  std::string set_id;
  std::size_t index = 0;
  bool edited = false;
  bool overridden = false;  // published despite a Blocked verdict
  FilterVerdict verdict;    // of the published (possibly edited) text
  bool operator==(const PublishedLine&) const = default;
};

struct PublicationCompleted {
  std::vector<PublishedLine> lines;
  bool operator==(const PublicationCompleted&) const = default;
};

struct SeedQueryCompleted {
  std::vector<SeedMatch> matches;
  bool operator==(const SeedQueryCompleted&) const = default;
};

using EventBody = std::variant<TypeContext, RequestGeneration, SelectAndPublish, SkipGeneration,
                               SeedQuery, SeedAccept, SceneNote, EndSession, SessionCreated,
                               GenerationCompleted, PublicationCompleted, SeedQueryCompleted>;

enum class Actor { kOperator, kSystem };

std::string_view ActorName(Actor actor);
std::string_view EventTypeName(const EventBody& body);
Actor ActorOf(const EventBody& body);
EventBody ToEventBody(const OperatorAction& action);
std::optional<OperatorAction> AsOperatorAction(const EventBody& body);

struct SessionEvent {
  std::uint64_t sequence = 0;  // dense, starting at 1
  std::string timestamp;       // RFC 3339
  Actor actor = Actor::kSystem;
  EventBody body;

  bool operator==(const SessionEvent&) const = default;
};

// ---- session state ----------------------------------------------------------

enum class SessionState { kCreated, kSeeded, kRunning, kEnded };

std::string_view SessionStateName(SessionState state);
SessionState ParseSessionState(std::string_view name);

struct SessionStats {
  std::uint64_t generated_sentence_count = 0;
  std::uint64_t published_sentence_count = 0;
  std::uint64_t generation_request_count = 0;
  std::int64_t elapsed_ms = 0;

  bool operator==(const SessionStats&) const = default;
};

struct Session {
  std::string session_id;
  SessionState state = SessionState::kCreated;
  SceneContext context;
  std::vector<CandidateSet> pending_sets;  // most recent generation only
  SessionStats stats;
  SessionConfig config;

  std::uint64_t last_sequence = 0;
  std::uint64_t generation_counter = 0;
  std::vector<SeedMatch> last_seed_matches;
  std::string created_at;
  std::string last_event_at;

  bool operator==(const Session&) const = default;
};

// Everything apply_action needs besides the session. The seed index is
// optional; seed actions fail with SeedIndexUnavailable without it.
struct Services {
  ModelBackend& backend;
  const FilterPipeline& filter;
  Clock& clock;
  const SentenceSegmenter& segmenter;
  const SeedIndex* seed_index = nullptr;
};

struct ActionResult {
  Session session;
  std::vector<SessionEvent> events;
};

// Fresh session in state Created plus its SessionCreated event. A session id
// is generated when none is given. Throws InvalidConfig.
ActionResult CreateSession(const SessionConfig& config, Clock& clock,
                           std::optional<std::string> session_id = std::nullopt);

// Validates `action` against `session`, performs any generation, filtering or
// seed lookup it needs, and returns the new session together with the events
// it appended (the operator event first, then system events). `session` is
// not modified. Throws InvalidAction, InvalidSelection, InvalidTransition,
// BlockedWithoutOverride, SessionEnded, SeedIndexUnavailable, or the engine's
// BackendUnavailable (in which case nothing is appended).
ActionResult ApplyAction(const Session& session, const OperatorAction& action,
                         const Services& services);

// Folds one recorded event into the session without any external calls.
// Throws InvalidAction when the event does not fit the state.
void FoldEvent(Session& session, const SessionEvent& event, const SentenceSegmenter& segmenter);

// Restores a session from its log alone (degraded recovery). Pending sets
// are dropped.
Session Rehydrate(const std::vector<SessionEvent>& events, const SentenceSegmenter& segmenter);

// ---- transcript -------------------------------------------------------------

// Canonical JSON Lines: one event per line, keys sorted, no extra whitespace.
std::string SerializeEvent(const SessionEvent& event);
std::string SerializeTranscript(const std::vector<SessionEvent>& events);

// Throws ParseError carrying the 1-based line of the first bad line.
SessionEvent ParseEvent(std::string_view line);
std::vector<SessionEvent> ParseTranscript(std::string_view text);

// ---- replay -----------------------------------------------------------------

struct ReplayResult {
  Session session;
  std::vector<SessionEvent> events;  // regenerated log
};

// Re-applies every recorded operator action against `backend` (normally a
// fixture-backed ReplayBackend), with the clock pinned to each recorded
// timestamp. Every regenerated event must serialize identically to the
// recorded one; the first mismatch throws DivergenceDetected carrying its
// sequence. Missing fixtures surface as FixtureMiss. Runs recorded as
// backend_failed are failed again on replay.
ReplayResult Replay(const std::vector<SessionEvent>& events, ModelBackend& backend,
                    const FilterPipeline& filter, const SentenceSegmenter& segmenter,
                    const SeedIndex* seed_index = nullptr);

// ---- projections -------------------------------------------------------------

std::vector<std::string> PublishedLines(const Session& session);

// Total candidate sentences across every GenerationCompleted event.
std::size_t GeneratedSentenceCount(const std::vector<SessionEvent>& events);

}  // namespace narrator
