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

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace narrator {

// Attribute names understood by the scorers. Inflammatory content maps to
// toxicity and insult, hateful content to identity_attack and
// severe_toxicity, sexual content to sexually_explicit.
inline constexpr std::string_view kToxicity = "toxicity";
inline constexpr std::string_view kSevereToxicity = "severe_toxicity";
inline constexpr std::string_view kInsult = "insult";
inline constexpr std::string_view kIdentityAttack = "identity_attack";
inline constexpr std::string_view kSexuallyExplicit = "sexually_explicit";

const std::vector<std::string>& DefaultAttributes();

class Blocklist {
 public:
  Blocklist() = default;

  // One token per line; blank lines and '#' comments are skipped; tokens are
  // case-folded and deduplicated. A token containing whitespace is a
  // ParseError carrying the line number.
  static Blocklist Load(const std::filesystem::path& path);
  static Blocklist FromText(std::string_view text);
  static Blocklist FromTokens(const std::vector<std::string>& tokens);

  // Whole-token, case-folded matches in first-occurrence order, deduplicated.
  std::vector<std::string> Match(std::string_view sentence) const;

  const std::set<std::string>& tokens() const { return tokens_; }
  const std::string& source_digest() const { return source_digest_; }
  bool empty() const { return tokens_.empty(); }

 private:
  std::set<std::string> tokens_;
  std::string source_digest_;
};

enum class ScoreProvider { kRemote, kMockLexicon };

struct ToxicityScores {
  std::map<std::string, double> scores;
  ScoreProvider provider = ScoreProvider::kMockLexicon;

  bool operator==(const ToxicityScores&) const = default;
};

// Throws ScoringUnavailable when the service cannot answer and MalformedScore
// when an answer is out of range or incomplete. Implementations must be safe
// to call concurrently.
class ToxicityScorer {
 public:
  virtual ~ToxicityScorer() = default;
  virtual ToxicityScores Score(std::string_view sentence) = 0;
  virtual std::string id() const = 0;
};

// Checks that every attribute in `required` is present and within [0, 1].
void ValidateScores(const ToxicityScores& scores, const std::vector<std::string>& required);

// Deterministic offline scorer. Per attribute:
//   min(1.0, 0.5 * lexicon hits + 0.3 * [any flag word present])
// where hits count whole-token occurrences in the sentence.
class LexiconScorer : public ToxicityScorer {
 public:
  struct Lexicon {
    std::set<std::string> hits;
    std::set<std::string> flags;
  };

  explicit LexiconScorer(std::map<std::string, Lexicon> lexicons);

  // Reads `<attribute>.json` (array of strings) and the optional
  // `<attribute>.flags.json` for every default attribute found in `dir`.
  // Attributes without a file get an empty lexicon.
  static std::shared_ptr<LexiconScorer> FromDirectory(const std::filesystem::path& dir);

  ToxicityScores Score(std::string_view sentence) override;
  std::string id() const override { return "mock-lexicon"; }

  std::size_t call_count() const { return calls_.load(); }

 private:
  std::map<std::string, Lexicon> lexicons_;
  std::atomic<std::size_t> calls_{0};
};

enum class Decision { kPass, kBlocked };
enum class FilterStage { kNone, kBlocklist, kToxicity, kScoringUnavailable };
enum class ScoringErrorPolicy { kFailClosed, kFailOpen };

std::string_view DecisionName(Decision d);
std::string_view FilterStageName(FilterStage s);
std::string_view ScoringErrorPolicyName(ScoringErrorPolicy p);
std::string_view ScoreProviderName(ScoreProvider p);
Decision ParseDecision(std::string_view name);
FilterStage ParseFilterStage(std::string_view name);
ScoringErrorPolicy ParseScoringErrorPolicy(std::string_view name);
ScoreProvider ParseScoreProvider(std::string_view name);

struct FilterVerdict {
  Decision decision = Decision::kPass;
  FilterStage stage = FilterStage::kNone;
  std::vector<std::string> matched_tokens;
  std::optional<ToxicityScores> scores;
  std::map<std::string, double> threshold_used;

  bool blocked() const { return decision == Decision::kBlocked; }
  bool operator==(const FilterVerdict&) const = default;
};

struct FilterPolicy {
  std::map<std::string, double> thresholds;
  ScoringErrorPolicy on_scoring_error = ScoringErrorPolicy::kFailClosed;
  std::string blocklist_path;

  // 0.8 for every default attribute, fail closed.
  static FilterPolicy Default();

  // Throws InvalidConfig when a threshold lies outside [0, 1].
  void Validate() const;

  std::vector<std::string> attributes() const;

  bool operator==(const FilterPolicy&) const = default;
};

// What the scoring stage produced for one sentence.
struct ScoringOutcome {
  std::optional<ToxicityScores> scores;  // empty means the scorer was unavailable
};

// The verdict as a pure function of its inputs. `scoring` is ignored when
// `matched_tokens` is non-empty.
FilterVerdict DecideVerdict(const std::vector<std::string>& matched_tokens,
                            const ScoringOutcome& scoring, const FilterPolicy& policy);

// Blocklist first; a hit short-circuits and the scorer is never called.
// Otherwise the sentence is scored and blocked iff any attribute reaches its
// threshold (>=). Scoring failures follow policy.on_scoring_error.
class FilterPipeline {
 public:
  FilterPipeline(Blocklist blocklist, std::shared_ptr<ToxicityScorer> scorer, FilterPolicy policy);

  FilterVerdict Check(std::string_view sentence) const;
  FilterVerdict Check(std::string_view sentence, const FilterPolicy& policy) const;

  const Blocklist& blocklist() const { return blocklist_; }
  const FilterPolicy& policy() const { return policy_; }
  ToxicityScorer& scorer() const { return *scorer_; }

 private:
  Blocklist blocklist_;
  std::shared_ptr<ToxicityScorer> scorer_;
  FilterPolicy policy_;
};

}  // namespace narrator
