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

#include "narrator/filter.hpp"

#include <gtest/gtest.h>

#include "narrator/error.hpp"
#include "test_support.hpp"

namespace narrator {
namespace {

using Tokens = std::vector<std::string>;

// Scorer with canned scores and a call counter.
class FixedScorer : public ToxicityScorer {
 public:
  explicit FixedScorer(std::map<std::string, double> scores, bool fail = false)
      : scores_(std::move(scores)), fail_(fail) {}
  ToxicityScores Score(std::string_view) override {
    ++calls;
    if (fail_) throw Error(ErrorCode::kScoringUnavailable, "down");
    return ToxicityScores{scores_, ScoreProvider::kRemote};
  }
  std::string id() const override { return "fixed"; }
  int calls = 0;

 private:
  std::map<std::string, double> scores_;
  bool fail_;
};

std::map<std::string, double> AllScores(double v) {
  std::map<std::string, double> m;
  for (const auto& a : DefaultAttributes()) m[a] = v;
  return m;
}

TEST(BlocklistTest, EmptyFile) {
  testing::TempDir dir;
  testing::WriteText(dir.path() / "b.txt", "");
  EXPECT_TRUE(Blocklist::Load(dir.path() / "b.txt").empty());
}

TEST(BlocklistTest, FoldsAndDeduplicates) {
  const auto b = Blocklist::FromText("Foo\n#c\nfoo\n\nbar\n");
  EXPECT_EQ(b.tokens(), (std::set<std::string>{"foo", "bar"}));
}

TEST(BlocklistTest, InternalWhitespaceIsAParseErrorWithLine) {
  try {
    Blocklist::FromText("ok\n# note\nnot ok\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line, 3);
  }
}

TEST(BlocklistTest, InvalidUtf8IsAnEncodingError) {
  try {
    Blocklist::FromText("good\n\xff\xfe\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEncodingError);
  }
}

TEST(BlocklistTest, MissingFile) {
  try {
    Blocklist::Load("/nonexistent/blocklist.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFileMissing);
  }
}

TEST(BlocklistTest, DigestTracksContent) {
  EXPECT_EQ(Blocklist::FromText("a\n").source_digest(), Blocklist::FromText("a\n").source_digest());
  EXPECT_NE(Blocklist::FromText("a\n").source_digest(), Blocklist::FromText("b\n").source_digest());
}

TEST(BlocklistTest, MatchExamples) {
  const auto b = Blocklist::FromTokens({"badword"});
  EXPECT_TRUE(b.Match("Hello there.").empty());
  EXPECT_EQ(b.Match("He said BADWORD loudly."), Tokens{"badword"});
  EXPECT_TRUE(b.Match("scrapbadwordscrap").empty());
  EXPECT_EQ(b.Match("badword, Badword and (badword)!"), Tokens{"badword"});
}

TEST(BlocklistTest, ShippedListLoads) {
  const auto b = Blocklist::Load(testing::DataDir() / "blocklist.txt");
  EXPECT_GT(b.tokens().size(), 10u);
  for (const auto& t : b.tokens()) EXPECT_EQ(t.find(' '), std::string::npos);
}

TEST(LexiconScorerTest, CleanSentenceScoresZero) {
  auto scorer = LexiconScorer::FromDirectory(testing::DataDir() / "lexicons");
  const auto s = scorer->Score("The sky is blue.");
  EXPECT_EQ(s.provider, ScoreProvider::kMockLexicon);
  ASSERT_EQ(s.scores.size(), DefaultAttributes().size());
  for (const auto& [attr, v] : s.scores) EXPECT_EQ(v, 0.0) << attr;
}

TEST(LexiconScorerTest, OneHitScoresHalf) {
  auto scorer = LexiconScorer::FromDirectory(testing::DataDir() / "lexicons");
  const auto s = scorer->Score("They stood there naked in the rain.");
  for (const auto& [attr, v] : s.scores) EXPECT_EQ(v, attr == "sexually_explicit" ? 0.5 : 0.0) << attr;
}

TEST(LexiconScorerTest, FormulaWithFlagsAndCap) {
  std::map<std::string, LexiconScorer::Lexicon> lex;
  lex["toxicity"] = {{"rude", "mean"}, {"mean"}};
  LexiconScorer scorer(lex);
  EXPECT_DOUBLE_EQ(scorer.Score("rude").scores.at("toxicity"), 0.5);
  EXPECT_DOUBLE_EQ(scorer.Score("mean").scores.at("toxicity"), 0.8);
  EXPECT_DOUBLE_EQ(scorer.Score("rude rude mean").scores.at("toxicity"), 1.0);
  EXPECT_EQ(scorer.call_count(), 3u);
}

TEST(ValidateScoresTest, RejectsOutOfRangeAndMissing) {
  EXPECT_NO_THROW(ValidateScores(ToxicityScores{AllScores(0.3), ScoreProvider::kRemote}, DefaultAttributes()));
  auto bad = AllScores(0.3);
  bad["insult"] = 1.5;
  EXPECT_THROW(ValidateScores(ToxicityScores{bad, ScoreProvider::kRemote}, DefaultAttributes()), Error);
  auto missing = AllScores(0.3);
  missing.erase("insult");
  EXPECT_THROW(ValidateScores(ToxicityScores{missing, ScoreProvider::kRemote}, DefaultAttributes()), Error);
}

TEST(FilterPipelineTest, BlocklistShortCircuitsScoring) {
  auto scorer = std::make_shared<FixedScorer>(AllScores(0.0));
  FilterPipeline filter(Blocklist::FromTokens({"badword"}), scorer, FilterPolicy::Default());
  const auto v = filter.Check("A badword here.");
  EXPECT_EQ(v.decision, Decision::kBlocked);
  EXPECT_EQ(v.stage, FilterStage::kBlocklist);
  EXPECT_EQ(v.matched_tokens, Tokens{"badword"});
  EXPECT_FALSE(v.scores.has_value());
  EXPECT_EQ(scorer->calls, 0);
}

TEST(FilterPipelineTest, CleanScoresPass) {
  auto scorer = std::make_shared<FixedScorer>(AllScores(0.0));
  FilterPipeline filter(Blocklist(), scorer, FilterPolicy::Default());
  const auto v = filter.Check("Nice.");
  EXPECT_EQ(v.decision, Decision::kPass);
  EXPECT_EQ(v.stage, FilterStage::kNone);
  ASSERT_TRUE(v.scores.has_value());
  EXPECT_EQ(v.threshold_used.at("toxicity"), 0.8);
  EXPECT_EQ(scorer->calls, 1);
}

TEST(FilterPipelineTest, ThresholdIsInclusive) {
  auto scores = AllScores(0.0);
  scores["insult"] = 0.8;
  FilterPipeline filter(Blocklist(), std::make_shared<FixedScorer>(scores), FilterPolicy::Default());
  const auto v = filter.Check("Hmm.");
  EXPECT_EQ(v.decision, Decision::kBlocked);
  EXPECT_EQ(v.stage, FilterStage::kToxicity);
}

TEST(FilterPipelineTest, ScoringOutagePolicies) {
  auto down = std::make_shared<FixedScorer>(AllScores(0.0), true);
  FilterPolicy closed = FilterPolicy::Default();
  FilterPolicy open = closed;
  open.on_scoring_error = ScoringErrorPolicy::kFailOpen;
  FilterPipeline filter(Blocklist(), down, closed);

  const auto c = filter.Check("Hello.", closed);
  EXPECT_EQ(c.decision, Decision::kBlocked);
  EXPECT_EQ(c.stage, FilterStage::kScoringUnavailable);

  const auto o = filter.Check("Hello.", open);
  EXPECT_EQ(o.decision, Decision::kPass);
  EXPECT_FALSE(o.scores.has_value());
}

TEST(FilterPipelineTest, MalformedScoresCountAsUnavailable) {
  auto scores = AllScores(0.1);
  scores["toxicity"] = -0.2;
  FilterPipeline filter(Blocklist(), std::make_shared<FixedScorer>(scores), FilterPolicy::Default());
  EXPECT_EQ(filter.Check("Hello.").stage, FilterStage::kScoringUnavailable);
}

TEST(FilterPolicyTest, ValidateRejectsOutOfRange) {
  FilterPolicy p = FilterPolicy::Default();
  EXPECT_NO_THROW(p.Validate());
  p.thresholds["toxicity"] = 1.2;
  EXPECT_THROW(p.Validate(), Error);
}

TEST(DecideVerdictTest, ReplayedScoresReproduceTheVerdict) {
  const ToxicityScores recorded{AllScores(0.42), ScoreProvider::kRemote};
  FilterPipeline filter(Blocklist(), std::make_shared<FixedScorer>(recorded.scores), FilterPolicy::Default());
  const auto live = filter.Check("Some line.");
  EXPECT_EQ(DecideVerdict({}, ScoringOutcome{recorded}, FilterPolicy::Default()), live);
}

}  // namespace
}  // namespace narrator
