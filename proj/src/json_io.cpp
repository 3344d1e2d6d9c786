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

#include "narrator/json_io.hpp"

#include "narrator/error.hpp"

namespace narrator {
namespace {

template <typename T>
T Field(const Json& j, const char* key) {
  return j.at(key).get<T>();
}

}  // namespace

void to_json(Json& j, const ToxicityScores& v) {
  j = Json{{"provider", ScoreProviderName(v.provider)}, {"scores", v.scores}};
}

void from_json(const Json& j, ToxicityScores& v) {
  v.provider = ParseScoreProvider(Field<std::string>(j, "provider"));
  v.scores = Field<std::map<std::string, double>>(j, "scores");
}

void to_json(Json& j, const FilterVerdict& v) {
  j = Json{{"decision", DecisionName(v.decision)},
           {"stage", FilterStageName(v.stage)},
           {"matched_tokens", v.matched_tokens},
           {"threshold_used", v.threshold_used}};
  if (v.scores) j["scores"] = *v.scores;
}

void from_json(const Json& j, FilterVerdict& v) {
  v.decision = ParseDecision(Field<std::string>(j, "decision"));
  v.stage = ParseFilterStage(Field<std::string>(j, "stage"));
  v.matched_tokens = Field<std::vector<std::string>>(j, "matched_tokens");
  v.threshold_used = Field<std::map<std::string, double>>(j, "threshold_used");
  if (j.contains("scores")) {
    v.scores = j.at("scores").get<ToxicityScores>();
  } else {
    v.scores.reset();
  }
}

void to_json(Json& j, const FilterPolicy& v) {
  j = Json{{"thresholds", v.thresholds},
           {"on_scoring_error", ScoringErrorPolicyName(v.on_scoring_error)},
           {"blocklist_path", v.blocklist_path}};
}

void from_json(const Json& j, FilterPolicy& v) {
  v.thresholds = Field<std::map<std::string, double>>(j, "thresholds");
  v.on_scoring_error = ParseScoringErrorPolicy(Field<std::string>(j, "on_scoring_error"));
  v.blocklist_path = j.value("blocklist_path", "");
}

void to_json(Json& j, const GenerationParams& v) {
  j = Json{{"runs_k", v.runs_k},
           {"budget_chars", v.budget_chars},
           {"max_completion_chars", v.max_completion_chars},
           {"backend_id", v.backend_id}};
  j["sampling_seed"] = v.sampling_seed ? Json(*v.sampling_seed) : Json(nullptr);
}

void from_json(const Json& j, GenerationParams& v) {
  v.runs_k = Field<int>(j, "runs_k");
  v.budget_chars = Field<std::size_t>(j, "budget_chars");
  v.max_completion_chars = Field<std::size_t>(j, "max_completion_chars");
  v.backend_id = j.value("backend_id", "");
  if (j.contains("sampling_seed") && !j.at("sampling_seed").is_null()) {
    v.sampling_seed = j.at("sampling_seed").get<std::uint64_t>();
  } else {
    v.sampling_seed.reset();
  }
}

void to_json(Json& j, const CandidateSentence& v) {
  j = Json{{"text", v.text}, {"verdict", v.verdict}, {"selectable", v.selectable}};
}

void from_json(const Json& j, CandidateSentence& v) {
  v.text = Field<std::string>(j, "text");
  v.verdict = Field<FilterVerdict>(j, "verdict");
  v.selectable = Field<bool>(j, "selectable");
}

void to_json(Json& j, const CandidateSet& v) {
  j = Json{{"set_id", v.set_id},
           {"run_index", v.run_index},
           {"sentences", v.sentences},
           {"raw_completion", v.raw_completion},
           {"total_chars", v.total_chars},
           {"backend_failed", v.backend_failed}};
}

void from_json(const Json& j, CandidateSet& v) {
  v.set_id = Field<std::string>(j, "set_id");
  v.run_index = Field<int>(j, "run_index");
  v.sentences = Field<std::vector<CandidateSentence>>(j, "sentences");
  v.raw_completion = Field<std::string>(j, "raw_completion");
  v.total_chars = Field<std::size_t>(j, "total_chars");
  v.backend_failed = Field<bool>(j, "backend_failed");
}

void to_json(Json& j, const SeedMatch& v) {
  j = Json{{"entry_id", v.entry_id}, {"sentence", v.sentence}, {"similarity", v.similarity}};
}

void from_json(const Json& j, SeedMatch& v) {
  v.entry_id = Field<std::size_t>(j, "entry_id");
  v.sentence = Field<std::string>(j, "sentence");
  v.similarity = Field<double>(j, "similarity");
}

void to_json(Json& j, const SessionConfig& v) {
  j = Json{{"generation", v.generation}, {"filter", v.filter}};
}

void from_json(const Json& j, SessionConfig& v) {
  v.generation = Field<GenerationParams>(j, "generation");
  v.filter = Field<FilterPolicy>(j, "filter");
}

void to_json(Json& j, const PublishedLine& v) {
  j = Json{{"text", v.text},     {"set_id", v.set_id},         {"index", v.index},
           {"edited", v.edited}, {"overridden", v.overridden}, {"verdict", v.verdict}};
}

void from_json(const Json& j, PublishedLine& v) {
  v.text = Field<std::string>(j, "text");
  v.set_id = Field<std::string>(j, "set_id");
  v.index = Field<std::size_t>(j, "index");
  v.edited = Field<bool>(j, "edited");
  v.overridden = Field<bool>(j, "overridden");
  v.verdict = Field<FilterVerdict>(j, "verdict");
}

void to_json(Json& j, const EventBody& v) {
  j = Json::object();
  j["type"] = EventTypeName(v);
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, TypeContext> || std::is_same_v<T, SceneNote>) {
          j["text"] = e.text;
        } else if constexpr (std::is_same_v<T, SelectAndPublish>) {
          Json items = Json::array();
          for (const auto& item : e.items) items.push_back({{"set_id", item.set_id}, {"index", item.index}});
          Json edits = Json::object();
          for (const auto& [pos, text] : e.edits) edits[std::to_string(pos)] = text;
          j["items"] = std::move(items);
          j["edits"] = std::move(edits);
          j["override_block"] = e.override_block;
        } else if constexpr (std::is_same_v<T, SeedQuery>) {
          j["suggestion"] = e.suggestion;
          j["k"] = e.k;
        } else if constexpr (std::is_same_v<T, SeedAccept>) {
          j["entry_id"] = e.entry_id;
        } else if constexpr (std::is_same_v<T, SessionCreated>) {
          j["session_id"] = e.session_id;
          j["config"] = e.config;
        } else if constexpr (std::is_same_v<T, GenerationCompleted>) {
          j["generation"] = e.generation;
          j["prompt_sha256"] = e.prompt_sha256;
          j["sets"] = e.sets;
        } else if constexpr (std::is_same_v<T, PublicationCompleted>) {
          j["lines"] = e.lines;
        } else if constexpr (std::is_same_v<T, SeedQueryCompleted>) {
          j["matches"] = e.matches;
        }
      },
      v);
}

void from_json(const Json& j, EventBody& v) {
  const auto type = Field<std::string>(j, "type");
  if (type == "SessionCreated") {
    v = SessionCreated{Field<std::string>(j, "session_id"), Field<SessionConfig>(j, "config")};
  } else if (type == "GenerationCompleted") {
    v = GenerationCompleted{Field<std::uint64_t>(j, "generation"),
                            Field<std::string>(j, "prompt_sha256"),
                            Field<std::vector<CandidateSet>>(j, "sets")};
  } else if (type == "PublicationCompleted") {
    v = PublicationCompleted{Field<std::vector<PublishedLine>>(j, "lines")};
  } else if (type == "SeedQueryCompleted") {
    v = SeedQueryCompleted{Field<std::vector<SeedMatch>>(j, "matches")};
  } else {
    v = ToEventBody(ActionFromJson(j));
  }
}

void to_json(Json& j, const SessionEvent& v) {
  j = Json{{"sequence", v.sequence},
           {"timestamp", v.timestamp},
           {"actor", ActorName(v.actor)},
           {"event", v.body}};
}

void from_json(const Json& j, SessionEvent& v) {
  v.sequence = Field<std::uint64_t>(j, "sequence");
  v.timestamp = Field<std::string>(j, "timestamp");
  const auto actor = Field<std::string>(j, "actor");
  v.body = Field<EventBody>(j, "event");
  v.actor = ActorOf(v.body);
  if (actor != ActorName(v.actor)) {
    throw Error(ErrorCode::kParseError, "actor " + actor + " does not match event type");
  }
}

void to_json(Json& j, const SessionStats& v) {
  j = Json{{"generated_sentence_count", v.generated_sentence_count},
           {"published_sentence_count", v.published_sentence_count},
           {"generation_request_count", v.generation_request_count},
           {"elapsed_ms", v.elapsed_ms}};
}

void to_json(Json& j, const ContextLine& v) {
  j = Json{{"text", v.text}, {"source", LineSourceName(v.source)}, {"sequence", v.sequence}};
}

Json ActionToJson(const OperatorAction& action) { return Json(ToEventBody(action)); }

OperatorAction ActionFromJson(const Json& j) {
  auto invalid = [](const std::string& msg) { return Error(ErrorCode::kInvalidAction, msg); };
  if (!j.is_object()) throw invalid("action must be a JSON object");
  if (!j.contains("type") || !j.at("type").is_string()) throw invalid("action needs a string \"type\"");
  const auto type = j.at("type").get<std::string>();
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw invalid(type + " needs string field \"" + key + "\"");
    }
    return j.at(key).get<std::string>();
  };
  auto uint = [&](const char* key, std::optional<std::size_t> fallback) -> std::size_t {
    if (!j.contains(key)) {
      if (fallback) return *fallback;
      throw invalid(type + " needs field \"" + key + "\"");
    }
    if (!j.at(key).is_number_unsigned()) throw invalid(std::string("\"") + key + "\" must be a non-negative integer");
    return j.at(key).get<std::size_t>();
  };

  if (type == "TypeContext") return TypeContext{str("text")};
  if (type == "RequestGeneration") return RequestGeneration{};
  if (type == "SkipGeneration") return SkipGeneration{};
  if (type == "EndSession") return EndSession{};
  if (type == "SceneNote") return SceneNote{str("text")};
  if (type == "SeedQuery") return SeedQuery{str("suggestion"), uint("k", 5)};
  if (type == "SeedAccept") return SeedAccept{uint("entry_id", std::nullopt)};
  if (type == "SelectAndPublish") {
    SelectAndPublish action;
    const Json items = j.value("items", Json::array());
    if (!items.is_array()) throw invalid("\"items\" must be an array");
    for (const auto& item : items) {
      if (!item.is_object() || !item.contains("set_id") || !item.at("set_id").is_string() ||
          !item.contains("index") || !item.at("index").is_number_unsigned()) {
        throw invalid("each item needs string \"set_id\" and non-negative \"index\"");
      }
      action.items.push_back({item.at("set_id").get<std::string>(), item.at("index").get<std::size_t>()});
    }
    const Json edits = j.value("edits", Json::object());
    if (!edits.is_object()) throw invalid("\"edits\" must be an object");
    for (const auto& [key, value] : edits.items()) {
      if (!value.is_string()) throw invalid("edit values must be strings");
      std::size_t pos = 0;
      std::size_t consumed = 0;
      try {
        pos = std::stoul(key, &consumed);
      } catch (const std::exception&) {
        consumed = 0;
      }
      if (consumed == 0 || consumed != key.size()) throw invalid("edit keys must be item positions");
      action.edits[pos] = value.get<std::string>();
    }
    if (j.contains("override_block")) {
      if (!j.at("override_block").is_boolean()) throw invalid("\"override_block\" must be a boolean");
      action.override_block = j.at("override_block").get<bool>();
    }
    return action;
  }
  throw invalid("unknown operator action type: " + type);
}

Json SessionToJson(const Session& session) {
  Json context = Json::array();
  for (const auto& line : session.context.lines()) context.push_back(line);
  return Json{{"session_id", session.session_id},
              {"state", SessionStateName(session.state)},
              {"context", std::move(context)},
              {"char_length", session.context.char_length()},
              {"prompt", RenderPrompt(session.context)},
              {"pending_sets", session.pending_sets},
              {"stats", session.stats},
              {"config", session.config},
              {"last_sequence", session.last_sequence},
              {"last_seed_matches", session.last_seed_matches}};
}

SessionConfig ApplyConfigOverrides(const SessionConfig& base, const Json& overrides) {
  SessionConfig config = base;
  if (overrides.is_null()) return config;
  if (!overrides.is_object()) throw Error(ErrorCode::kInvalidConfig, "overrides must be an object");
  try {
    if (overrides.contains("runs_k")) config.generation.runs_k = overrides.at("runs_k").get<int>();
    if (overrides.contains("budget_chars")) {
      config.generation.budget_chars = overrides.at("budget_chars").get<std::size_t>();
    }
    if (overrides.contains("max_completion_chars")) {
      config.generation.max_completion_chars = overrides.at("max_completion_chars").get<std::size_t>();
    }
    if (overrides.contains("sampling_seed")) {
      const auto& seed = overrides.at("sampling_seed");
      if (seed.is_null()) {
        config.generation.sampling_seed.reset();
      } else {
        config.generation.sampling_seed = seed.get<std::uint64_t>();
      }
    }
    if (overrides.contains("thresholds")) {
      for (const auto& [attr, value] : overrides.at("thresholds").items()) {
        config.filter.thresholds[attr] = value.get<double>();
      }
    }
    if (overrides.contains("on_scoring_error")) {
      config.filter.on_scoring_error =
          ParseScoringErrorPolicy(overrides.at("on_scoring_error").get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  config.Validate();
  return config;
}

}  // namespace narrator
