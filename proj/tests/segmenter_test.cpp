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

#include "narrator/segmenter.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "narrator/backend.hpp"
#include "narrator/error.hpp"
#include "narrator/utf8.hpp"
#include "test_support.hpp"

namespace narrator {
namespace {

using Sentences = std::vector<std::string>;

TEST(SegmentSentencesTest, EmptyInput) { EXPECT_TRUE(SegmentSentences("").empty()); }

TEST(SegmentSentencesTest, TwoPlainSentences) {
  EXPECT_EQ(SegmentSentences("Sally searched for pastries. The husband and the wife asked for vodka."),
            (Sentences{"Sally searched for pastries.", "The husband and the wife asked for vodka."}));
}

TEST(SegmentSentencesTest, UnterminatedInputIsOneFragment) {
  const auto out = SegmentSentences("He said hi");
  ASSERT_EQ(out, Sentences{"He said hi"});
  EXPECT_FALSE(IsTerminated(out[0]));
}

TEST(SegmentSentencesTest, TitleAbbreviation) { EXPECT_EQ(SegmentSentences("Mr. Smith arrived.").size(), 1u); }

TEST(SegmentSentencesTest, ClosersStayWithTheirSentence) {
  EXPECT_EQ(SegmentSentences("She shouted \"Stop!\" Then she left."),
            (Sentences{"She shouted \"Stop!\"", "Then she left."}));
  EXPECT_EQ(SegmentSentences("(It was late.) Nobody moved."), (Sentences{"(It was late.)", "Nobody moved."}));
}

TEST(SegmentSentencesTest, EllipsisAndInterrobang) {
  EXPECT_EQ(SegmentSentences("Wait… What‽ Fine."), (Sentences{"Wait…", "What‽", "Fine."}));
  EXPECT_EQ(SegmentSentences("He paused... Then he spoke."), (Sentences{"He paused...", "Then he spoke."}));
}

TEST(SegmentSentencesTest, DecimalsAreNotBoundaries) {
  EXPECT_EQ(SegmentSentences("It cost 3.50 euros. Cheap."), (Sentences{"It cost 3.50 euros.", "Cheap."}));
}

TEST(SegmentSentencesTest, LowercaseContinuationIsNotABoundary) {
  EXPECT_EQ(SegmentSentences("Really? not at all."), Sentences{"Really? not at all."});
}

TEST(SegmentSentencesTest, CollapsesWhitespace) {
  EXPECT_EQ(SegmentSentences("  A  b.\n\tC   d.  "), (Sentences{"A b.", "C d."}));
}

TEST(SegmentSentencesTest, UnicodeText) {
  EXPECT_EQ(SegmentSentences("Élodie a ri. Ça va? Oui."), (Sentences{"Élodie a ri.", "Ça va?", "Oui."}));
}

// Hand-judged cases, written down before the segmenter was run on them.
struct AbbreviationCase {
  const char* text;
  Sentences expected;
};

class AbbreviationCasesTest : public ::testing::TestWithParam<AbbreviationCase> {};

TEST_P(AbbreviationCasesTest, MatchesHandJudgement) {
  EXPECT_EQ(SegmentSentences(GetParam().text), GetParam().expected) << GetParam().text;
}

INSTANTIATE_TEST_SUITE_P(
    TwentyStrings, AbbreviationCasesTest,
    ::testing::Values(
        AbbreviationCase{"Mr. Smith arrived.", {"Mr. Smith arrived."}},
        AbbreviationCase{"Mrs. Jones baked a pie. She sold it.", {"Mrs. Jones baked a pie.", "She sold it."}},
        AbbreviationCase{"Dr. Who knocked twice.", {"Dr. Who knocked twice."}},
        AbbreviationCase{"We met at 5 p.m. on Friday.", {"We met at 5 p.m. on Friday."}},
        AbbreviationCase{"They sold apples, pears, etc. and plums.", {"They sold apples, pears, etc. and plums."}},
        AbbreviationCase{"Prof. Brown and Dr. Green argued.", {"Prof. Brown and Dr. Green argued."}},
        AbbreviationCase{"She lives on Baker St. near the park.", {"She lives on Baker St. near the park."}},
        AbbreviationCase{"J. R. Tolkien wrote books.", {"J. R. Tolkien wrote books."}},
        AbbreviationCase{"The U.S. team won. Everyone cheered.", {"The U.S. team won.", "Everyone cheered."}},
        AbbreviationCase{"He works for Acme Inc. in Paris.", {"He works for Acme Inc. in Paris."}},
        AbbreviationCase{"It rained in Jan. and again in Feb.", {"It rained in Jan. and again in Feb."}},
        AbbreviationCase{"Capt. Hook sailed away. The crew followed.", {"Capt. Hook sailed away.", "The crew followed."}},
        AbbreviationCase{"See fig. 3 for details.", {"See fig. 3 for details."}},
        AbbreviationCase{"Gen. Lee rode in. Col. Mustard stayed.", {"Gen. Lee rode in.", "Col. Mustard stayed."}},
        AbbreviationCase{"Mt. Everest is tall.", {"Mt. Everest is tall."}},
        AbbreviationCase{"I bought eggs, milk, etc. Then I went home.", {"I bought eggs, milk, etc.", "Then I went home."}},
        AbbreviationCase{"The meeting ended at 6 p.m. Everyone left.", {"The meeting ended at 6 p.m.", "Everyone left."}},
        AbbreviationCase{"Use a tool, e.g. a hammer.", {"Use a tool, e.g. a hammer."}},
        AbbreviationCase{"Ms. Park met Mr. Lee at St. Mary's.", {"Ms. Park met Mr. Lee at St. Mary's."}},
        AbbreviationCase{"Sgt. Pepper played. The band cheered.", {"Sgt. Pepper played.", "The band cheered."}}));

TEST(SentenceSegmenterTest, CustomAbbreviationsReplaceTheDefaults) {
  const SentenceSegmenter none(std::set<std::string>{});
  EXPECT_EQ(none.Split("Mr. Smith arrived.").size(), 2u);
  const SentenceSegmenter custom(std::set<std::string>{"Approx."});
  EXPECT_EQ(custom.Split("Approx. Ten people came.").size(), 1u);
}

TEST(SentenceSegmenterTest, ShippedListLoads) {
  const auto seg = SentenceSegmenter::FromFile(testing::DataDir() / "abbreviations.txt");
  EXPECT_EQ(seg.abbreviations(), DefaultAbbreviations());
}

TEST(SentenceSegmenterTest, FileWithWhitespaceInTokenIsRejected) {
  testing::TempDir dir;
  testing::WriteText(dir.path() / "abbr.txt", "# list\nmr\nnot ok\n");
  try {
    SentenceSegmenter::FromFile(dir.path() / "abbr.txt");
    FAIL() << "expected ParseError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line, 3);
  }
}

TEST(SentenceSegmenterTest, MissingFile) {
  try {
    SentenceSegmenter::FromFile("/nonexistent/abbr.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFileMissing);
  }
}

// Joining the sentences with single spaces gives back the collapsed input.
TEST(SegmentSentencesTest, RoundTripProperty) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> pieces = {"Mr.", "word", "Word", "a.m.", "3.5", "!", "?", ".", "...", "…",
                                           "\"", ")", "(", "é", "Ça", "etc.", "U.S.", "x", "\n", "  ", "\t"};
  for (int iter = 0; iter < 3000; ++iter) {
    std::string text;
    const int len = static_cast<int>(rng() % 25);
    for (int i = 0; i < len; ++i) {
      text += pieces[rng() % pieces.size()];
      if (rng() % 3 != 0) text += ' ';
    }
    const auto sentences = SegmentSentences(text);
    std::string joined;
    for (const auto& s : sentences) {
      EXPECT_FALSE(s.empty());
      if (!joined.empty()) joined += ' ';
      joined += s;
    }
    ASSERT_EQ(utf8::CollapseWhitespace(joined), utf8::CollapseWhitespace(text)) << text;
    for (std::size_t i = 0; i + 1 < sentences.size(); ++i) EXPECT_TRUE(IsTerminated(sentences[i])) << text;
  }
}

TEST(TruncateToBudgetTest, Examples) {
  EXPECT_TRUE(TruncateToBudget(Sentences{}, 100).empty());
  EXPECT_EQ(TruncateToBudget(Sentences{"aaaa.", "bbbbbb."}, 10), Sentences{"aaaa."});
  EXPECT_TRUE(TruncateToBudget(Sentences{std::string(150, 'x') + "."}, 100).empty());
  EXPECT_EQ(TruncateToBudget(Sentences{"One.", "two"}, 100), Sentences{"One."});
}

TEST(TruncateToBudgetTest, CountsScalarValuesNotBytes) {
  const std::string accented = "éééé.";  // 5 scalars, 9 bytes
  EXPECT_EQ(TruncateToBudget(Sentences{accented}, 5), Sentences{accented});
  EXPECT_TRUE(TruncateToBudget(Sentences{accented}, 4).empty());
}

TEST(TruncateToBudgetTest, ZeroBudgetIsAConfigError) {
  EXPECT_THROW(TruncateToBudget(Sentences{"A."}, 0), Error);
}

// Independent oracle: enumerate every prefix and keep the longest admissible.
Sentences PrefixOracle(const Sentences& sentences, std::size_t budget) {
  Sentences best;
  for (std::size_t len = 0; len <= sentences.size(); ++len) {
    std::size_t sum = 0;
    bool ok = true;
    for (std::size_t i = 0; i < len; ++i) {
      const std::string& s = sentences[i];
      std::size_t chars = 0;
      for (unsigned char c : s) chars += (c & 0xC0) != 0x80;
      sum += chars;
      ok = ok && sum <= budget && IsTerminated(s);
    }
    if (ok) best.assign(sentences.begin(), sentences.begin() + static_cast<std::ptrdiff_t>(len));
  }
  return best;
}

TEST(TruncateToBudgetTest, AgreesWithPrefixOracleOnMockCompletions) {
  for (int run = 0; run < 400; ++run) {
    const std::string raw = MockComplete("prompt " + std::to_string(run), 11, run % 3);
    const auto sentences = SegmentSentences(raw);
    for (std::size_t budget : {1u, 20u, 57u, 100u, 250u}) {
      EXPECT_EQ(TruncateToBudget(sentences, budget), PrefixOracle(sentences, budget)) << raw;
    }
  }
}

}  // namespace
}  // namespace narrator
