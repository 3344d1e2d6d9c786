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

#include <gtest/gtest.h>

#include "narrator/error.hpp"
#include "session_driver.hpp"
#include "test_backends.hpp"
#include "test_support.hpp"

namespace narrator {
namespace {

using testing::FunctionBackend;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidAction;
}

// Session harness with a scripted backend: run r of every generation
// returns "Run r first. Run r second."
class SessionTest : public ::testing::Test {
 protected:
  SessionTest()
      : rt_(testing::ShippedRuntime()),
        clock_(ParseRfc3339("2026-01-01T19:00:00Z"), std::chrono::seconds(1)),
        backend_([this](const CompletionRequest& r) {
          {
            std::lock_guard lock(prompt_mutex_);
            prompts_.push_back(r.prompt);
          }
          if (script_) return script_(r);
          const auto n = std::to_string(r.run_index);
          return "Run " + n + " first. Run " + n + " second.";
        }) {}

  Services services(const SeedIndex* seeds = nullptr) {
    return Services{backend_, *rt_.filter, clock_, *rt_.segmenter, seeds};
  }

  Session Start() { return CreateSession(SessionConfig{}, clock_, "s-test").session; }

  Session Apply(const Session& s, const OperatorAction& a, const SeedIndex* seeds = nullptr) {
    return ApplyAction(s, a, services(seeds)).session;
  }

  std::string LastPrompt() {
    std::lock_guard lock(prompt_mutex_);
    return prompts_.back();
  }

  Runtime rt_;
  ManualClock clock_;
  std::mutex prompt_mutex_;
  std::vector<std::string> prompts_;
  std::function<std::string(const CompletionRequest&)> script_;
  FunctionBackend backend_;
};

TEST_F(SessionTest, CreateUsesDefaults) {
  const auto created = CreateSession(SessionConfig{}, clock_);
  EXPECT_EQ(created.session.state, SessionState::kCreated);
  EXPECT_EQ(created.session.config.generation.runs_k, 3);
  EXPECT_EQ(created.session.config.generation.budget_chars, 100u);
  EXPECT_TRUE(created.session.context.empty());
  ASSERT_EQ(created.events.size(), 1u);
  EXPECT_EQ(created.events[0].sequence, 1u);
  EXPECT_TRUE(std::holds_alternative<SessionCreated>(created.events[0].body));
  EXPECT_EQ(created.session.stats, SessionStats{});
}

TEST_F(SessionTest, CreateRejectsBadConfigAndMintsDistinctIds) {
  SessionConfig bad;
  bad.generation.runs_k = 0;
  EXPECT_EQ(CodeOf([&] { CreateSession(bad, clock_); }), ErrorCode::kInvalidConfig);
  bad = SessionConfig{};
  bad.filter.thresholds["toxicity"] = 1.5;
  EXPECT_EQ(CodeOf([&] { CreateSession(bad, clock_); }), ErrorCode::kInvalidConfig);
  EXPECT_NE(CreateSession(SessionConfig{}, clock_).session.session_id,
            CreateSession(SessionConfig{}, clock_).session.session_id);
}

TEST_F(SessionTest, TypeContextSplitsIntoSentences) {
  const auto s = Apply(Start(), TypeContext{"At the Pizza Hut. Brian and his date lost patience."});
  ASSERT_EQ(s.context.size(), 2u);
  EXPECT_EQ(s.context.lines()[0].text, "At the Pizza Hut.");
  EXPECT_EQ(s.context.lines()[1].text, "Brian and his date lost patience.");
  EXPECT_EQ(s.context.lines()[1].source, LineSource::kOperatorTyped);
  EXPECT_EQ(s.state, SessionState::kRunning);
  EXPECT_EQ(CodeOf([&] { Apply(s, TypeContext{"   "}); }), ErrorCode::kInvalidAction);
}

TEST_F(SessionTest, OperatorTypingIsKeptVerbatim) {
  const auto s = Apply(Start(), TypeContext{"Sally searched for pastries."});
  EXPECT_EQ(s.context.lines()[0].text, "Sally searched for pastries.");
}

TEST_F(SessionTest, PublishedLineIsFedBackIntoThePrompt) {
  script_ = [](const CompletionRequest&) { return std::string("Both women had crushes on Brian."); };
  auto s = Apply(Start(), TypeContext{"They asked for supremes, with garlic bread."});
  s = Apply(s, RequestGeneration{});
  const auto result = ApplyAction(s, SelectAndPublish{{{"g1-r0", 0}}, {}, false}, services());
  ASSERT_EQ(result.events.size(), 2u);
  const auto& pub = std::get<PublicationCompleted>(result.events[1].body);
  ASSERT_EQ(pub.lines.size(), 1u);
  EXPECT_EQ(pub.lines[0].text, "Both women had crushes on Brian.");
  s = result.session;
  EXPECT_EQ(s.context.lines().back().source, LineSource::kAiPublished);
  EXPECT_TRUE(s.pending_sets.empty());
  Apply(s, RequestGeneration{});
  EXPECT_EQ(LastPrompt(),
            "They asked for supremes, with garlic bread. Both women had crushes on Brian.");
}

TEST_F(SessionTest, SelectingNoneLeavesContextUnchanged) {
  auto s = Apply(Apply(Start(), TypeContext{"Start."}), RequestGeneration{});
  const auto result = ApplyAction(s, SelectAndPublish{}, services());
  ASSERT_EQ(result.events.size(), 1u);
  EXPECT_EQ(result.session.context, s.context);
  EXPECT_TRUE(result.session.pending_sets.empty());
}

TEST_F(SessionTest, PublicationFollowsTheOperatorsOrder) {
  auto s = Apply(Apply(Start(), TypeContext{"Start."}), RequestGeneration{});
  s = Apply(s, SelectAndPublish{{{"g1-r2", 0}, {"g1-r0", 1}}, {}, false});
  ASSERT_EQ(s.context.size(), 3u);
  EXPECT_EQ(s.context.lines()[1].text, "Run 2 first.");
  EXPECT_EQ(s.context.lines()[2].text, "Run 0 second.");
  EXPECT_EQ(s.stats.published_sentence_count, 2u);
  EXPECT_EQ(s.stats.generated_sentence_count, 6u);
  EXPECT_EQ(s.stats.generation_request_count, 1u);
}

TEST_F(SessionTest, EditsAreRefilteredAndRecorded) {
  auto s = Apply(Apply(Start(), TypeContext{"Start."}), RequestGeneration{});
  const SelectAndPublish blocked{{{"g1-r0", 0}}, {{0, "Run zero was shit."}}, false};
  EXPECT_EQ(CodeOf([&] { Apply(s, blocked); }), ErrorCode::kBlockedWithoutOverride);

  auto overridden = blocked;
  overridden.override_block = true;
  const auto result = ApplyAction(s, overridden, services());
  const auto& line = std::get<PublicationCompleted>(result.events[1].body).lines.at(0);
  EXPECT_TRUE(line.edited);
  EXPECT_TRUE(line.overridden);
  EXPECT_TRUE(line.verdict.blocked());
  EXPECT_EQ(result.session.context.lines().back().text, "Run zero was shit.");

  const auto clean = Apply(s, SelectAndPublish{{{"g1-r1", 1}}, {{0, "  Run   one,   reworded. "}}, false});
  EXPECT_EQ(clean.context.lines().back().text, "Run one, reworded.");
}

TEST_F(SessionTest, BlockedCandidateNeedsOverride) {
  script_ = [](const CompletionRequest&) { return std::string("What the fuck. Fine."); };
  auto s = Apply(Apply(Start(), TypeContext{"Start."}), RequestGeneration{});
  ASSERT_FALSE(s.pending_sets[0].sentences[0].selectable);
  EXPECT_EQ(CodeOf([&] { Apply(s, SelectAndPublish{{{"g1-r0", 0}}, {}, false}); }),
            ErrorCode::kBlockedWithoutOverride);
  const auto ok = Apply(s, SelectAndPublish{{{"g1-r0", 0}}, {}, true});
  EXPECT_EQ(ok.context.lines().back().text, "What the fuck.");
}

TEST_F(SessionTest, StaleOrBadSelectionsAreRejected) {
  auto s = Apply(Apply(Start(), TypeContext{"Start."}), RequestGeneration{});
  const auto invalid = [&](const Session& at, SelectAndPublish a) {
    return CodeOf([&] { Apply(at, a); });
  };
  EXPECT_EQ(invalid(s, {{{"g9-r0", 0}}, {}, false}), ErrorCode::kInvalidSelection);
  EXPECT_EQ(invalid(s, {{{"g1-r0", 7}}, {}, false}), ErrorCode::kInvalidSelection);
  EXPECT_EQ(invalid(s, {{{"g1-r0", 0}, {"g1-r0", 0}}, {}, false}), ErrorCode::kInvalidSelection);
  EXPECT_EQ(invalid(s, {{{"g1-r0", 0}}, {{3, "x."}}, false}), ErrorCode::kInvalidSelection);
  EXPECT_EQ(invalid(s, {{}, {{0, "x."}}, false}), ErrorCode::kInvalidSelection);

  const auto regenerated = Apply(s, RequestGeneration{});
  EXPECT_EQ(invalid(regenerated, {{{"g1-r0", 0}}, {}, false}), ErrorCode::kInvalidSelection);
  const auto retyped = Apply(s, TypeContext{"New line."});
  EXPECT_TRUE(retyped.pending_sets.empty());
  EXPECT_EQ(invalid(retyped, {{{"g1-r0", 0}}, {}, false}), ErrorCode::kInvalidSelection);
  const auto skipped = Apply(s, SkipGeneration{});
  EXPECT_TRUE(skipped.pending_sets.empty());
  EXPECT_EQ(skipped.context, s.context);
}

TEST_F(SessionTest, SceneNoteNeverTouchesThePrompt) {
  auto s = Apply(Start(), TypeContext{"Start."});
  const auto after = ApplyAction(s, SceneNote{"Lights dim."}, services());
  ASSERT_EQ(after.events.size(), 1u);
  EXPECT_EQ(RenderPrompt(after.session.context), RenderPrompt(s.context));
  EXPECT_EQ(CodeOf([&] { Apply(s, SceneNote{""}); }), ErrorCode::kInvalidAction);
}

TEST_F(SessionTest, EndedSessionsRejectActions) {
  auto s = Apply(Start(), EndSession{});
  EXPECT_EQ(s.state, SessionState::kEnded);
  EXPECT_EQ(CodeOf([&] { Apply(s, TypeContext{"More."}); }), ErrorCode::kSessionEnded);
  EXPECT_EQ(CodeOf([&] { Apply(s, RequestGeneration{}); }), ErrorCode::kSessionEnded);
  const auto again = ApplyAction(s, EndSession{}, services());
  EXPECT_TRUE(again.events.empty());
  EXPECT_EQ(again.session, s);
}

TEST_F(SessionTest, ApplyActionDoesNotModifyItsInput) {
  const auto s = Apply(Start(), TypeContext{"Start."});
  const Session copy = s;
  ApplyAction(s, RequestGeneration{}, services());
  EXPECT_EQ(s, copy);
}

TEST_F(SessionTest, FailedGenerationAppendsNothing) {
  script_ = [](const CompletionRequest&) -> std::string {
    throw Error(ErrorCode::kBackendUnavailable, "down");
  };
  const auto s = Apply(Start(), TypeContext{"Start."});
  EXPECT_EQ(CodeOf([&] { Apply(s, RequestGeneration{}); }), ErrorCode::kBackendUnavailable);
}

TEST_F(SessionTest, SeedingFlow) {
  const auto s = Start();
  EXPECT_EQ(CodeOf([&] { Apply(s, SeedQuery{"Pizza Hut", 5}); }), ErrorCode::kSeedIndexUnavailable);
  const auto* seeds = rt_.seed_index.get();
  ASSERT_NE(seeds, nullptr);
  EXPECT_EQ(CodeOf([&] { Apply(s, SeedQuery{"Pizza Hut", 0}, seeds); }), ErrorCode::kInvalidAction);
  const auto queried = Apply(s, SeedQuery{"Pizza Hut", 5}, seeds);
  ASSERT_EQ(queried.last_seed_matches.size(), 5u);
  EXPECT_EQ(queried.state, SessionState::kCreated);
  EXPECT_EQ(CodeOf([&] { Apply(queried, SeedAccept{100000}, seeds); }), ErrorCode::kInvalidSelection);
  const auto& pick = queried.last_seed_matches[0];
  const auto seeded = Apply(queried, SeedAccept{pick.entry_id}, seeds);
  EXPECT_EQ(seeded.state, SessionState::kSeeded);
  EXPECT_EQ(RenderPrompt(seeded.context), pick.sentence);
  const auto running = Apply(seeded, TypeContext{"Then it rained."}, seeds);
  EXPECT_EQ(running.state, SessionState::kRunning);
  EXPECT_EQ(CodeOf([&] { Apply(running, SeedAccept{pick.entry_id}, seeds); }),
            ErrorCode::kInvalidTransition);
}

TEST_F(SessionTest, SequencesAreDenseAndStatsConsistent) {
  auto svc = services(rt_.seed_index.get());
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto log = testing::DriveRandomSession(
        rng, svc, SessionConfig{}, 40, "s-" + std::to_string(trial),
        [&](const Session& before, const OperatorAction&, const ActionResult& r) {
          ASSERT_LE(r.session.stats.published_sentence_count, r.session.stats.generated_sentence_count);
          // Context is append-only.
          ASSERT_GE(r.session.context.size(), before.context.size());
          for (std::size_t i = 0; i < before.context.size(); ++i) {
            ASSERT_EQ(r.session.context.lines()[i], before.context.lines()[i]);
          }
        });
    for (std::size_t i = 0; i < log.size(); ++i) ASSERT_EQ(log[i].sequence, i + 1);
  }
}

// ---- transcript --------------------------------------------------------------

TEST_F(SessionTest, TranscriptRoundTripIsByteIdentical) {
  auto svc = services(rt_.seed_index.get());
  SplitMix64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto log = testing::DriveRandomSession(rng, svc, SessionConfig{}, 30, "s-rt");
    const std::string text = SerializeTranscript(log);
    const auto parsed = ParseTranscript(text);
    EXPECT_EQ(parsed, log);
    EXPECT_EQ(SerializeTranscript(parsed), text);
  }
}

TEST_F(SessionTest, RehydrateMatchesLiveSessionWithoutPendingSets) {
  auto svc = services(rt_.seed_index.get());
  SplitMix64 rng(3);
  Session live;
  const auto log = testing::DriveRandomSession(
      rng, svc, SessionConfig{}, 40, "s-rh",
      [&](const Session&, const OperatorAction&, const ActionResult& r) { live = r.session; });
  Session restored = Rehydrate(log, *rt_.segmenter);
  EXPECT_TRUE(restored.pending_sets.empty());
  live.pending_sets.clear();
  EXPECT_EQ(restored, live);
}

TEST(TranscriptTest, ParseErrorsCarryTheLineNumber) {
  const auto text = testing::ReadText(testing::ShowcaseDir() / "transcript.jsonl");
  const auto events = ParseTranscript(text);
  const std::string head = SerializeTranscript({events[0], events[1], events[2]});
  try {
    ParseTranscript(head + SerializeEvent(events[3]).substr(0, 20));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line, 4);
  }
  try {
    ParseTranscript(SerializeEvent(events[0]) + "\n{not json}\n" + SerializeEvent(events[1]) + "\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.line, 2);
  }
}

TEST(TranscriptTest, ShowcaseHolds455GeneratedSentences) {
  const auto events =
      ParseTranscript(testing::ReadText(testing::ShowcaseDir() / "transcript.jsonl"));
  EXPECT_EQ(GeneratedSentenceCount(events), 455u);
}

// ---- replay ------------------------------------------------------------------

TEST(ReplayTest, ShowcasePublishesTheShowsLines) {
  const auto rt = testing::ShowcaseRuntime();
  const auto events =
      ParseTranscript(testing::ReadText(testing::ShowcaseDir() / "transcript.jsonl"));
  const auto result = Replay(events, *rt.backend, *rt.filter, *rt.segmenter, rt.seed_index.get());
  EXPECT_EQ(PublishedLines(result.session), testing::ShowcasePublished());
  EXPECT_EQ(SerializeTranscript(result.events), SerializeTranscript(events));
  EXPECT_EQ(result.session.state, SessionState::kEnded);
  EXPECT_EQ(result.session.stats.generated_sentence_count, 455u);
}

TEST(ReplayTest, EmptyLogGivesFreshSession) {
  const auto rt = testing::ShippedRuntime();
  const auto result = Replay({}, *rt.backend, *rt.filter, *rt.segmenter);
  EXPECT_EQ(result.session.state, SessionState::kCreated);
  EXPECT_TRUE(result.session.context.empty());
}

TEST(ReplayTest, MutatedFixtureIsDetectedAtItsSequence) {
  const auto rt = testing::ShowcaseRuntime();
  const auto events =
      ParseTranscript(testing::ReadText(testing::ShowcaseDir() / "transcript.jsonl"));
  std::string jsonl = testing::ReadText(testing::ShowcaseDir() / "completions.jsonl");
  const auto pos = jsonl.find("Both women had crushes");
  ASSERT_NE(pos, std::string::npos);
  jsonl[pos] = 'b';
  ReplayBackend mutated(FixtureStore::FromJsonl(jsonl));
  try {
    Replay(events, mutated, *rt.filter, *rt.segmenter, rt.seed_index.get());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergenceDetected);
    ASSERT_TRUE(e.sequence.has_value());
    EXPECT_EQ(*e.sequence, 43);
  }
}

TEST(ReplayTest, MissingFixtureIsFixtureMiss) {
  const auto rt = testing::ShowcaseRuntime();
  const auto events =
      ParseTranscript(testing::ReadText(testing::ShowcaseDir() / "transcript.jsonl"));
  ReplayBackend empty(std::make_shared<FixtureStore>());
  try {
    Replay(events, empty, *rt.filter, *rt.segmenter, rt.seed_index.get());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFixtureMiss);
  }
}

TEST(ReplayTest, EditedTranscriptDiverges) {
  const auto rt = testing::ShowcaseRuntime();
  auto events = ParseTranscript(testing::ReadText(testing::ShowcaseDir() / "transcript.jsonl"));
  auto& pub = std::get<PublicationCompleted>(events[44].body);
  pub.lines[0].text = "Both women had crushes on Bryan.";
  try {
    Replay(events, *rt.backend, *rt.filter, *rt.segmenter, rt.seed_index.get());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergenceDetected);
    EXPECT_EQ(e.sequence, 45);
  }
}

}  // namespace
}  // namespace narrator
