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

#include "narrator/http_server.hpp"

#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace narrator {
namespace {

constexpr const char* kJson = "application/json";

void Reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void ReplyError(httplib::Response& res, const Error& e) {
  Reply(res, HttpStatusFor(e.code()), ErrorBody(e));
  if (e.retry_after_seconds) res.set_header("Retry-After", std::to_string(*e.retry_after_seconds));
}

Json ParseBody(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty() && allow_empty) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidAction, std::string("body is not JSON: ") + e.what());
  }
}

std::uint64_t ParseSince(const std::string& text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error(ErrorCode::kInvalidAction, "since must be a sequence number");
  return value;
}

// Runs a handler and maps domain errors to statuses.
template <typename F>
void Guard(httplib::Response& res, F&& handler) {
  try {
    handler();
  } catch (const Error& e) {
    if (HttpStatusFor(e.code()) >= 500) spdlog::warn("{}", e.what());
    ReplyError(res, e);
  } catch (const std::exception& e) {
    spdlog::error("unhandled: {}", e.what());
    Reply(res, 500, Json{{"error", {{"code", "Internal"}, {"message", e.what()}}}});
  }
}

std::string SseFrame(const SessionEvent& event) {
  return "id: " + std::to_string(event.sequence) + "\ndata: " + SerializeEvent(event) + "\n\n";
}

}  // namespace

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSessionNotFound:
      return 404;
    case ErrorCode::kInvalidSelection:
    case ErrorCode::kInvalidTransition:
    case ErrorCode::kBlockedWithoutOverride:
    case ErrorCode::kSessionEnded:
    case ErrorCode::kDuplicateKeyConflict:
      return 409;
    case ErrorCode::kInvalidAction:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kParseError:
    case ErrorCode::kEncodingError:
      return 422;
    case ErrorCode::kTimeout:
    case ErrorCode::kAuthFailure:
    case ErrorCode::kRateLimited:
    case ErrorCode::kMalformedResponse:
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kFixtureMiss:
    case ErrorCode::kScoringUnavailable:
    case ErrorCode::kMalformedScore:
    case ErrorCode::kSeedIndexUnavailable:
      return 503;
    default:
      return 500;
  }
}

Json ErrorBody(const Error& error) {
  Json detail{{"code", ErrorCodeName(error.code())}, {"message", error.what()}};
  if (error.line) detail["line"] = *error.line;
  if (error.sequence) detail["sequence"] = *error.sequence;
  if (error.retry_after_seconds) detail["retry_after_seconds"] = *error.retry_after_seconds;
  return Json{{"error", detail}};
}

ApiServer::ApiServer(std::shared_ptr<SessionHub> hub, Options options)
    : hub_(std::move(hub)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  const std::size_t workers = options_.worker_threads;
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  Routes();
}

ApiServer::~ApiServer() { Stop(); }

int ApiServer::BindToAnyPort(const std::string& host) { return server_->bind_to_any_port(host); }
bool ApiServer::Bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }
bool ApiServer::ListenAfterBind() { return server_->listen_after_bind(); }
void ApiServer::WaitUntilReady() const { server_->wait_until_ready(); }

void ApiServer::Stop() {
  hub_->Shutdown();
  if (server_->is_running()) server_->stop();
}

void ApiServer::Routes() {
  auto& s = *server_;
  const std::string token = options_.auth_token;

  s.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    if (token.empty() || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
    if (req.path.size() > 6 && req.path.compare(req.path.size() - 6, 6, "/stage") == 0) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("Authorization") == "Bearer " + token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    const bool is_stream = req.path.size() > 7 && req.path.compare(req.path.size() - 7, 7, "/events") == 0;
    if (is_stream && req.get_param_value("access_token") == token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    res.set_header("WWW-Authenticate", "Bearer");
    Reply(res, 401, Json{{"error", {{"code", "Unauthorized"}, {"message", "missing or wrong bearer token"}}}});
    return httplib::Server::HandlerResponse::Handled;
  });

  s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    Reply(res, 200, Json{{"status", "ok"}});
  });

  s.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] {
      Json overrides = ParseBody(req, true);
      if (!overrides.is_object()) throw Error(ErrorCode::kInvalidConfig, "overrides must be an object");
      const std::string id = hub_->Create(overrides);
      Reply(res, 201, Json{{"session_id", id}});
    });
  });

  s.Post(R"(/v1/sessions/([^/]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] {
      const std::string id = req.matches[1];
      hub_->Snapshot(id);  // 404 before 422
      const OperatorAction action = ActionFromJson(ParseBody(req, false));
      Reply(res, 200, Json{{"events", hub_->Apply(id, action)}});
    });
  });

  s.Get(R"(/v1/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] { Reply(res, 200, SessionToJson(*hub_->Snapshot(req.matches[1]))); });
  });

  s.Get(R"(/v1/sessions/([^/]+)/stage)", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] {
      Reply(res, 200, StageViewToJson(hub_->Stage(req.matches[1])));
      res.set_header("Cache-Control", "no-store");
    });
  });

  s.Get(R"(/v1/sessions/([^/]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] {
      const std::string id = req.matches[1];
      res.status = 200;
      res.set_content(hub_->Transcript(id), "application/x-ndjson");
      res.set_header("Content-Disposition", "attachment; filename=\"" + id + ".jsonl\"");
    });
  });

  s.Get(R"(/v1/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] {
      const std::string id = req.matches[1];
      std::uint64_t since = 0;
      if (req.has_param("since")) {
        since = ParseSince(req.get_param_value("since"));
      } else if (req.has_header("Last-Event-ID")) {
        since = ParseSince(req.get_header_value("Last-Event-ID"));
      }
      hub_->Snapshot(id);
      auto cursor = std::make_shared<std::uint64_t>(since);
      auto hub = hub_;
      const auto keepalive = options_.keepalive;
      res.set_header("Cache-Control", "no-cache");
      res.set_header("X-Accel-Buffering", "no");
      res.set_chunked_content_provider(
          "text/event-stream", [hub, id, cursor, keepalive](std::size_t, httplib::DataSink& sink) {
            if (hub->shutting_down()) {
              sink.done();
              return true;
            }
            const auto events = hub->EventsSince(id, *cursor, keepalive);
            if (events.empty()) {
              const auto snapshot = hub->Snapshot(id);
              if (hub->shutting_down() ||
                  (snapshot->state == SessionState::kEnded && snapshot->last_sequence <= *cursor)) {
                sink.done();
                return true;
              }
              const std::string ping = ": keepalive\n\n";
              return sink.write(ping.data(), ping.size());
            }
            std::string chunk;
            bool ended = false;
            for (const auto& e : events) {
              chunk += SseFrame(e);
              *cursor = e.sequence;
              ended = ended || std::holds_alternative<EndSession>(e.body);
            }
            if (!sink.write(chunk.data(), chunk.size())) return false;
            if (ended) sink.done();
            return true;
          });
    });
  });

  s.Post("/v1/seed/query", [this](const httplib::Request& req, httplib::Response& res) {
    Guard(res, [&] {
      const Json body = ParseBody(req, false);
      if (!body.is_object() || !body.contains("suggestion") || !body.at("suggestion").is_string()) {
        throw Error(ErrorCode::kInvalidAction, "suggestion must be a string");
      }
      std::size_t k = 5;
      if (body.contains("k")) {
        if (!body.at("k").is_number_unsigned()) throw Error(ErrorCode::kInvalidAction, "k must be a positive integer");
        k = body.at("k").get<std::size_t>();
      }
      Reply(res, 200, Json{{"matches", hub_->QuerySeeds(body.at("suggestion").get<std::string>(), k)}});
    });
  });
}

}  // namespace narrator
