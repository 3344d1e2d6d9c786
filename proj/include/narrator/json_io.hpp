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

// JSON mappings for the domain types, shared by the transcript format and the
// HTTP API. Keys are emitted in sorted order (nlohmann::json's default), which
// is what makes serialized events canonical.

#include <json.hpp>

#include "narrator/engine.hpp"
#include "narrator/filter.hpp"
#include "narrator/seed.hpp"
#include "narrator/session.hpp"

namespace narrator {

using Json = nlohmann::json;

void to_json(Json& j, const ToxicityScores& v);
void from_json(const Json& j, ToxicityScores& v);
void to_json(Json& j, const FilterVerdict& v);
void from_json(const Json& j, FilterVerdict& v);
void to_json(Json& j, const FilterPolicy& v);
void from_json(const Json& j, FilterPolicy& v);
void to_json(Json& j, const GenerationParams& v);
void from_json(const Json& j, GenerationParams& v);
void to_json(Json& j, const CandidateSentence& v);
void from_json(const Json& j, CandidateSentence& v);
void to_json(Json& j, const CandidateSet& v);
void from_json(const Json& j, CandidateSet& v);
void to_json(Json& j, const SeedMatch& v);
void from_json(const Json& j, SeedMatch& v);
void to_json(Json& j, const SessionConfig& v);
void from_json(const Json& j, SessionConfig& v);
void to_json(Json& j, const PublishedLine& v);
void from_json(const Json& j, PublishedLine& v);
void to_json(Json& j, const EventBody& v);
void from_json(const Json& j, EventBody& v);
void to_json(Json& j, const SessionEvent& v);
void from_json(const Json& j, SessionEvent& v);
void to_json(Json& j, const SessionStats& v);
void to_json(Json& j, const ContextLine& v);

Json ActionToJson(const OperatorAction& action);

// Throws InvalidAction for unknown types, system event types, missing fields
// or wrong field types.
OperatorAction ActionFromJson(const Json& j);

// Full console projection: context, pending sets with verdicts, stats, config.
Json SessionToJson(const Session& session);

// Applies the keys present in `overrides` on top of `base`: "runs_k",
// "budget_chars", "max_completion_chars", "sampling_seed", "thresholds",
// "on_scoring_error". Throws InvalidConfig.
SessionConfig ApplyConfigOverrides(const SessionConfig& base, const Json& overrides);

}  // namespace narrator
