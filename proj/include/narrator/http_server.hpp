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

#include <chrono>
#include <memory>
#include <string>

#include "narrator/error.hpp"
#include "narrator/service.hpp"

namespace httplib {
class Server;
}

namespace narrator {

// HTTP status for a domain error.
int HttpStatusFor(ErrorCode code);

// {"error": {"code", "message", ...}} with any line, sequence or retry hint.
Json ErrorBody(const Error& error);

// JSON over HTTP/1.1 on top of a SessionHub.
//
//   POST /v1/sessions                      -> 201 {"session_id"}
//   POST /v1/sessions/{id}/actions         -> 200 {"events": [...]}
//   GET  /v1/sessions/{id}/state           -> session projection
//   GET  /v1/sessions/{id}/stage           -> stage view (never needs auth)
//   GET  /v1/sessions/{id}/events?since=N  -> text/event-stream
//   GET  /v1/sessions/{id}/transcript      -> application/x-ndjson
//   POST /v1/seed/query {"suggestion","k"} -> {"matches": [...]}
//   GET  /healthz
//
// With a token configured every route except /stage and /healthz requires
// "Authorization: Bearer <token>". Event streams also accept
// ?access_token=<token> because browsers cannot set headers on them.
class ApiServer {
 public:
  struct Options {
    std::string auth_token;
    std::chrono::milliseconds keepalive{15000};
    std::size_t worker_threads = 32;
  };

  ApiServer(std::shared_ptr<SessionHub> hub, Options options);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds an ephemeral port and returns it; follow with ListenAfterBind.
  int BindToAnyPort(const std::string& host);
  bool Bind(const std::string& host, int port);
  // Blocks until Stop.
  bool ListenAfterBind();
  void Stop();
  void WaitUntilReady() const;

 private:
  void Routes();

  std::shared_ptr<SessionHub> hub_;
  Options options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace narrator
