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

#include <thread>

#include <gtest/gtest.h>

#include "narrator/json_io.hpp"
#include "sse_client.hpp"
#include "test_backends.hpp"
#include "test_support.hpp"

namespace narrator {
namespace {

constexpr char kToken[] = "test-token";

class HttpTest : public ::testing::Test {
 protected:
  void Start(Runtime rt = testing::ShippedRuntime(), std::string token = kToken) {
    hub_ = std::make_shared<SessionHub>(std::move(rt), std::make_shared<SystemClock>(),
                                        SessionHub::Options{});
    ApiServer::Options options;
    options.auth_token = std::move(token);
    options.keepalive = std::chrono::milliseconds(100);
    server_ = std::make_unique<ApiServer>(hub_, options);
    port_ = server_->BindToAnyPort("127.0.0.1");
    thread_ = std::thread([this] { server_->ListenAfterBind(); });
    server_->WaitUntilReady();
  }

  void TearDown() override {
    if (server_) {
      server_->Stop();
      thread_.join();
    }
  }

  httplib::Client Client(bool auth = true) {
    httplib::Client client("127.0.0.1", port_);
    client.set_read_timeout(5, 0);
    if (auth) client.set_bearer_token_auth(kToken);
    return client;
  }

  std::string CreateSession() {
    auto client = Client();
    auto res = client.Post("/v1/sessions", "{}", "application/json");
    EXPECT_EQ(res->status, 201);
    return Json::parse(res->body).at("session_id").get<std::string>();
  }

  httplib::Result Act(const std::string& id, const OperatorAction& action) {
    auto client = Client();
    return client.Post("/v1/sessions/" + id + "/actions", ActionToJson(action).dump(),
                       "application/json");
  }

  static std::string ErrorCodeOf(const httplib::Result& res) {
    return Json::parse(res->body).at("error").at("code").get<std::string>();
  }

  std::shared_ptr<SessionHub> hub_;
  std::unique_ptr<ApiServer> server_;
  std::thread thread_;
  int port_ = 0;
};

TEST(HttpStatusTest, ErrorMapping) {
  EXPECT_EQ(HttpStatusFor(ErrorCode::kSessionNotFound), 404);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kInvalidSelection), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kBlockedWithoutOverride), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kSessionEnded), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kInvalidTransition), 409);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kInvalidAction), 422);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kInvalidConfig), 422);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kBackendUnavailable), 503);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kFixtureMiss), 503);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kSeedIndexUnavailable), 503);
  EXPECT_EQ(HttpStatusFor(ErrorCode::kDivergenceDetected), 500);
}

TEST(HttpStatusTest, ErrorBodyCarriesExtras) {
  Error e(ErrorCode::kRateLimited, "slow down");
  e.retry_after_seconds = 7;
  const Json body = ErrorBody(e);
  EXPECT_EQ(body.at("error").at("code"), "RateLimited");
  EXPECT_EQ(body.at("error").at("retry_after_seconds"), 7);
}

TEST_F(HttpTest, HealthAndAuth) {
  Start();
  auto anonymous = Client(false);
  EXPECT_EQ(anonymous.Get("/healthz")->status, 200);
  EXPECT_EQ(anonymous.Post("/v1/sessions", "{}", "application/json")->status, 401);
  httplib::Client wrong("127.0.0.1", port_);
  wrong.set_bearer_token_auth("nope");
  EXPECT_EQ(wrong.Post("/v1/sessions", "{}", "application/json")->status, 401);
  const auto id = CreateSession();
  EXPECT_EQ(anonymous.Get("/v1/sessions/" + id + "/state")->status, 401);
  EXPECT_EQ(anonymous.Get("/v1/sessions/" + id + "/stage")->status, 200);
}

TEST_F(HttpTest, NoTokenMeansOpenAccess) {
  Start(testing::ShippedRuntime(), "");
  auto anonymous = Client(false);
  EXPECT_EQ(anonymous.Post("/v1/sessions", "{}", "application/json")->status, 201);
}

TEST_F(HttpTest, ActionsAndErrors) {
  Start();
  const auto id = CreateSession();
  auto res = Act(id, TypeContext{"At the Pizza Hut."});
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(Json::parse(res->body).at("events").size(), 1u);

  res = Act(id, RequestGeneration{});
  ASSERT_EQ(res->status, 200);
  const Json events = Json::parse(res->body).at("events");
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[1].at("event").at("type"), "GenerationCompleted");

  res = Act(id, SelectAndPublish{{{"g7-r0", 0}}, {}, false});
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(ErrorCodeOf(res), "InvalidSelection");

  res = Act("missing", RequestGeneration{});
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(ErrorCodeOf(res), "SessionNotFound");

  auto client = Client();
  res = client.Post("/v1/sessions/" + id + "/actions", R"({"type":"Dance"})", "application/json");
  EXPECT_EQ(res->status, 422);
  res = client.Post("/v1/sessions/" + id + "/actions", "not json", "application/json");
  EXPECT_EQ(res->status, 422);
  res = client.Post("/v1/sessions", R"({"runs_k":0})", "application/json");
  EXPECT_EQ(res->status, 422);

  ASSERT_EQ(Act(id, EndSession{})->status, 200);
  res = Act(id, TypeContext{"Too late."});
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(ErrorCodeOf(res), "SessionEnded");
}

TEST_F(HttpTest, StaleSelectionAfterNewContextIs409) {
  Start();
  const auto id = CreateSession();
  Act(id, TypeContext{"Start."});
  Act(id, RequestGeneration{});
  Act(id, TypeContext{"Something else happened."});
  const auto res = Act(id, SelectAndPublish{{{"g1-r0", 0}}, {}, false});
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(ErrorCodeOf(res), "InvalidSelection");
}

TEST_F(HttpTest, BackendOutageIs503) {
  auto rt = testing::ShippedRuntime();
  rt.backend = std::make_shared<testing::FunctionBackend>([](const CompletionRequest&) -> std::string {
    throw Error(ErrorCode::kBackendUnavailable, "down");
  });
  Start(std::move(rt));
  const auto id = CreateSession();
  const auto res = Act(id, RequestGeneration{});
  EXPECT_EQ(res->status, 503);
  EXPECT_EQ(ErrorCodeOf(res), "BackendUnavailable");
}

TEST_F(HttpTest, StateStageAndTranscript) {
  auto rt = testing::ShippedRuntime();
  rt.backend = std::make_shared<testing::FunctionBackend>(
      [](const CompletionRequest&) { return std::string("Brian apologized."); });
  Start(std::move(rt));
  const auto id = CreateSession();
  Act(id, TypeContext{"Start."});
  Act(id, RequestGeneration{});
  auto client = Client();

  auto res = client.Get("/v1/sessions/" + id + "/state");
  ASSERT_EQ(res->status, 200);
  const Json state = Json::parse(res->body);
  EXPECT_EQ(state.at("pending_sets").size(), 3u);

  res = Client(false).Get("/v1/sessions/" + id + "/stage");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Cache-Control"), "no-store");
  EXPECT_EQ(res->body.find("Brian apologized."), std::string::npos);

  Act(id, SelectAndPublish{{{"g1-r1", 0}}, {}, false});
  res = Client(false).Get("/v1/sessions/" + id + "/stage");
  const Json stage = Json::parse(res->body);
  EXPECT_EQ(stage.at("lines"), Json::array({"Brian apologized."}));
  EXPECT_EQ(stage.at("avatar_state"), "Speaking");

  res = client.Get("/v1/sessions/" + id + "/transcript");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->body, hub_->Transcript(id));
  EXPECT_EQ(ParseTranscript(res->body).size(), 6u);
}

TEST_F(HttpTest, SeedQuery) {
  Start();
  auto client = Client();
  auto res = client.Post("/v1/seed/query", R"({"suggestion":"Pizza Hut","k":5})", "application/json");
  ASSERT_EQ(res->status, 200);
  const Json matches = Json::parse(res->body).at("matches");
  ASSERT_EQ(matches.size(), 5u);
  EXPECT_EQ(matches[0].at("entry_id"), 49);

  auto rt = testing::ShippedRuntime();
  rt.seed_index.reset();
  TearDown();
  server_.reset();
  Start(std::move(rt));
  auto other = Client();
  res = other.Post("/v1/seed/query", R"({"suggestion":"Pizza Hut","k":5})", "application/json");
  EXPECT_EQ(res->status, 503);
}

TEST_F(HttpTest, EventStreamResumesWithoutGapsOrDuplicates) {
  Start();
  const auto id = CreateSession();
  std::thread writer([&] {
    for (int i = 0; i < 40; ++i) {
      hub_->Apply(id, SceneNote{"Note " + std::to_string(i) + "."});
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    hub_->Apply(id, EndSession{});
  });
  std::vector<std::uint64_t> seen;
  std::uint64_t cursor = 0;
  for (int reconnect = 0; reconnect < 200; ++reconnect) {
    auto client = Client();
    const auto frames = testing::ReadSse(
        client, "/v1/sessions/" + id + "/events?since=" + std::to_string(cursor), 1 + reconnect % 3);
    for (const auto& f : frames) {
      seen.push_back(f.id);
      cursor = f.id;
    }
    if (cursor == 42) break;
  }
  writer.join();
  ASSERT_EQ(seen.size(), 42u);
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i], i + 1);
}

TEST_F(HttpTest, EventStreamAuthAndLastEventId) {
  Start();
  const auto id = CreateSession();
  hub_->Apply(id, TypeContext{"One."});
  hub_->Apply(id, EndSession{});

  auto anonymous = Client(false);
  int status = 0;
  testing::ReadSse(anonymous, "/v1/sessions/" + id + "/events", 10, {}, &status);
  EXPECT_EQ(status, 401);

  auto frames = testing::ReadSse(anonymous,
                                 "/v1/sessions/" + id + "/events?access_token=" + kToken, 10);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(Json::parse(frames[2].data).at("event").at("type"), "EndSession");

  auto client = Client();
  frames = testing::ReadSse(client, "/v1/sessions/" + id + "/events", 10, {{"Last-Event-ID", "2"}});
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].id, 3u);

  status = 0;
  testing::ReadSse(client, "/v1/sessions/" + id + "/events?since=abc", 10, {}, &status);
  EXPECT_EQ(status, 422);
  status = 0;
  testing::ReadSse(client, "/v1/sessions/nope/events", 10, {}, &status);
  EXPECT_EQ(status, 404);
}

}  // namespace
}  // namespace narrator
