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

// HTTP clients for the remote completion backend and the remote scorer.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "narrator/backend.hpp"
#include "narrator/error.hpp"
#include "narrator/remote_scorer.hpp"

namespace narrator {
namespace {

std::string EnvOrEmpty(const std::string& name) {
  if (name.empty()) return {};
  const char* value = std::getenv(name.c_str());
  return value ? std::string(value) : std::string();
}

std::string ToUpper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::unique_ptr<httplib::Client> MakeClient(const std::string& base_url, std::int64_t timeout_ms) {
  auto client = std::make_unique<httplib::Client>(base_url);
  if (!client->is_valid()) {
    throw Error(ErrorCode::kInvalidConfig, "invalid base url: " + base_url);
  }
  const auto sec = static_cast<time_t>(timeout_ms / 1000);
  const auto usec = static_cast<time_t>((timeout_ms % 1000) * 1000);
  client->set_connection_timeout(sec, usec);
  client->set_read_timeout(sec, usec);
  client->set_write_timeout(sec, usec);
  client->set_keep_alive(false);
  return client;
}

bool IsTimeout(httplib::Error err) {
  return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
         err == httplib::Error::Write;
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteBackendConfig config)
    : config_(std::move(config)), api_key_(EnvOrEmpty(config_.api_key_env)) {
  if (config_.base_url.empty()) throw Error(ErrorCode::kInvalidConfig, "remote backend needs base_url");
  if (!config_.api_key_env.empty() && api_key_.empty()) {
    throw Error(ErrorCode::kAuthFailure, "environment variable " + config_.api_key_env + " is not set");
  }
}

std::string RemoteBackend::id() const {
  return "remote:" + (config_.model.empty() ? config_.base_url : config_.model);
}

CompletionResponse RemoteBackend::Complete(const CompletionRequest& request) {
  nlohmann::json body;
  body["prompt"] = request.prompt;
  if (!config_.model.empty()) body["model"] = config_.model;
  if (config_.temperature) body["temperature"] = *config_.temperature;
  if (config_.top_p) body["top_p"] = *config_.top_p;
  if (request.sampling_seed) body["seed"] = *request.sampling_seed;
  if (config_.adapter == CompletionAdapter::kOpenAI) {
    // Roughly four characters per token; the response is clipped anyway.
    body["max_tokens"] = (request.max_chars + 3) / 4;
  } else {
    body["max_chars"] = request.max_chars;
  }

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto client = MakeClient(config_.base_url, config_.timeout_ms);
  net::NoteOutboundAttempt();
  const auto start = std::chrono::steady_clock::now();
  auto result = client->Post(config_.path, headers, body.dump(), "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  if (!result) {
    const auto err = result.error();
    if (IsTimeout(err)) throw Error(ErrorCode::kTimeout, httplib::to_string(err));
    throw Error(ErrorCode::kBackendUnavailable, httplib::to_string(err));
  }
  const int status = result->status;
  if (status == 401 || status == 403) {
    throw Error(ErrorCode::kAuthFailure, "status " + std::to_string(status));
  }
  if (status == 429) {
    Error e(ErrorCode::kRateLimited, "status 429");
    if (result->has_header("Retry-After")) {
      try {
        e.retry_after_seconds = std::stoll(result->get_header_value("Retry-After"));
      } catch (const std::exception&) {
      }
    }
    throw e;
  }
  if (status == 408 || status == 504) throw Error(ErrorCode::kTimeout, "status " + std::to_string(status));
  if (status >= 500) throw Error(ErrorCode::kBackendUnavailable, "status " + std::to_string(status));
  if (status != 200) throw Error(ErrorCode::kMalformedResponse, "status " + std::to_string(status));

  std::string text;
  try {
    const auto j = nlohmann::json::parse(result->body);
    if (config_.adapter == CompletionAdapter::kOpenAI) {
      text = j.at("choices").at(0).at("text").get<std::string>();
    } else {
      text = j.at("text").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }

  CompletionResponse response;
  response.text = SanitizeCompletion(text, request.max_chars);
  response.backend_id = id();
  response.latency_ms = latency;
  return response;
}

RemoteScorer::RemoteScorer(RemoteScorerConfig config)
    : config_(std::move(config)), api_key_(EnvOrEmpty(config_.api_key_env)) {
  if (config_.base_url.empty()) throw Error(ErrorCode::kInvalidConfig, "remote scorer needs base_url");
}

std::string RemoteScorer::BuildRequestBody(const RemoteScorerConfig& config, std::string_view text) {
  nlohmann::json body;
  if (config.adapter == ScorerAdapter::kPerspective) {
    body["comment"]["text"] = text;
    body["languages"] = nlohmann::json::array({"en"});
    for (const auto& attr : config.attributes) {
      body["requestedAttributes"][ToUpper(attr)] = nlohmann::json::object();
    }
  } else {
    body["text"] = text;
    body["attributes"] = config.attributes;
  }
  return body.dump();
}

ToxicityScores RemoteScorer::ParseResponseBody(const RemoteScorerConfig& config,
                                               std::string_view body) {
  ToxicityScores out;
  out.provider = ScoreProvider::kRemote;
  try {
    const auto j = nlohmann::json::parse(body);
    for (const auto& attr : config.attributes) {
      const nlohmann::json* value = nullptr;
      if (config.adapter == ScorerAdapter::kPerspective) {
        const auto& scores = j.at("attributeScores");
        const auto key = ToUpper(attr);
        if (scores.contains(key)) value = &scores.at(key).at("summaryScore").at("value");
      } else {
        const auto& scores = j.at("scores");
        if (scores.contains(attr)) value = &scores.at(attr);
      }
      if (value == nullptr) throw Error(ErrorCode::kMalformedScore, "missing attribute " + attr);
      if (!value->is_number()) throw Error(ErrorCode::kMalformedScore, attr + " is not a number");
      out.scores[attr] = value->get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedScore, e.what());
  }
  ValidateScores(out, config.attributes);
  return out;
}

ToxicityScores RemoteScorer::Score(std::string_view sentence) {
  std::string path = config_.path;
  httplib::Headers headers;
  if (!api_key_.empty()) {
    if (config_.adapter == ScorerAdapter::kPerspective) {
      path += (path.find('?') == std::string::npos ? "?key=" : "&key=") + api_key_;
    } else {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }
  }
  auto client = MakeClient(config_.base_url, config_.timeout_ms);
  net::NoteOutboundAttempt();
  auto result = client->Post(path, headers, BuildRequestBody(config_, sentence), "application/json");
  if (!result) {
    throw Error(ErrorCode::kScoringUnavailable, httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw Error(ErrorCode::kScoringUnavailable, "status " + std::to_string(result->status));
  }
  return ParseResponseBody(config_, result->body);
}

}  // namespace narrator
