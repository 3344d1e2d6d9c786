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

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "narrator/digest.hpp"
#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {
namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::set<std::string> ReadWordArray(const std::filesystem::path& path) {
  const std::string text = ReadFile(path);
  if (!utf8::IsValid(text)) throw Error(ErrorCode::kEncodingError, path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::kParseError, path.string() + ": expected an array");
  std::set<std::string> words;
  for (const auto& item : doc) {
    if (!item.is_string()) {
      throw Error(ErrorCode::kParseError, path.string() + ": expected strings");
    }
    for (auto& token : utf8::WordTokens(item.get<std::string>())) words.insert(std::move(token));
  }
  return words;
}

}  // namespace

const std::vector<std::string>& DefaultAttributes() {
  static const std::vector<std::string> kAttributes = {
      std::string(kToxicity), std::string(kSevereToxicity), std::string(kInsult),
      std::string(kIdentityAttack), std::string(kSexuallyExplicit)};
  return kAttributes;
}

Blocklist Blocklist::Load(const std::filesystem::path& path) {
  return FromText(ReadFile(path));
}

Blocklist Blocklist::FromText(std::string_view text) {
  Blocklist list;
  std::int64_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!utf8::IsValid(line)) {
      Error e(ErrorCode::kEncodingError, "blocklist line " + std::to_string(line_no));
      e.line = line_no;
      throw e;
    }
    std::string trimmed = utf8::CollapseWhitespace(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    if (trimmed.find(' ') != std::string::npos) {
      throw ParseErrorAt(line_no, "blocklist entry contains whitespace: " + trimmed);
    }
    list.tokens_.insert(utf8::FoldCase(trimmed));
  }
  list.source_digest_ = Sha256Hex(text);
  return list;
}

Blocklist Blocklist::FromTokens(const std::vector<std::string>& tokens) {
  std::string text;
  for (const auto& t : tokens) text += t + "\n";
  return FromText(text);
}

std::vector<std::string> Blocklist::Match(std::string_view sentence) const {
  std::vector<std::string> matched;
  if (tokens_.empty()) return matched;
  for (auto& token : utf8::WordTokens(sentence)) {
    if (tokens_.count(token) > 0 &&
        std::find(matched.begin(), matched.end(), token) == matched.end()) {
      matched.push_back(std::move(token));
    }
  }
  return matched;
}

void ValidateScores(const ToxicityScores& scores, const std::vector<std::string>& required) {
  for (const auto& [attr, value] : scores.scores) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw Error(ErrorCode::kMalformedScore, attr + " out of range");
    }
  }
  for (const auto& attr : required) {
    if (scores.scores.count(attr) == 0) {
      throw Error(ErrorCode::kMalformedScore, "missing attribute " + attr);
    }
  }
}

LexiconScorer::LexiconScorer(std::map<std::string, Lexicon> lexicons)
    : lexicons_(std::move(lexicons)) {
  for (const auto& attr : DefaultAttributes()) lexicons_.try_emplace(attr);
}

std::shared_ptr<LexiconScorer> LexiconScorer::FromDirectory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kFileMissing, dir.string());
  std::map<std::string, Lexicon> lexicons;
  for (const auto& attr : DefaultAttributes()) {
    Lexicon lex;
    const auto hits = dir / (attr + ".json");
    const auto flags = dir / (attr + ".flags.json");
    if (std::filesystem::exists(hits)) lex.hits = ReadWordArray(hits);
    if (std::filesystem::exists(flags)) lex.flags = ReadWordArray(flags);
    lexicons.emplace(attr, std::move(lex));
  }
  return std::make_shared<LexiconScorer>(std::move(lexicons));
}

ToxicityScores LexiconScorer::Score(std::string_view sentence) {
  calls_.fetch_add(1);
  const auto tokens = utf8::WordTokens(sentence);
  ToxicityScores out;
  out.provider = ScoreProvider::kMockLexicon;
  for (const auto& [attr, lex] : lexicons_) {
    std::size_t hits = 0;
    bool flagged = false;
    for (const auto& t : tokens) {
      hits += lex.hits.count(t);
      flagged = flagged || lex.flags.count(t) > 0;
    }
    const double raw = 0.5 * static_cast<double>(hits) + (flagged ? 0.3 : 0.0);
    out.scores[attr] = std::min(1.0, raw);
  }
  return out;
}

std::string_view DecisionName(Decision d) { return d == Decision::kPass ? "Pass" : "Blocked"; }

std::string_view FilterStageName(FilterStage s) {
  switch (s) {
    case FilterStage::kNone: return "None";
    case FilterStage::kBlocklist: return "Blocklist";
    case FilterStage::kToxicity: return "Toxicity";
    case FilterStage::kScoringUnavailable: return "ScoringUnavailable";
  }
  return "None";
}

std::string_view ScoringErrorPolicyName(ScoringErrorPolicy p) {
  return p == ScoringErrorPolicy::kFailClosed ? "FailClosed" : "FailOpen";
}

std::string_view ScoreProviderName(ScoreProvider p) {
  return p == ScoreProvider::kRemote ? "Remote" : "MockLexicon";
}

Decision ParseDecision(std::string_view name) {
  if (name == "Pass") return Decision::kPass;
  if (name == "Blocked") return Decision::kBlocked;
  throw Error(ErrorCode::kParseError, "unknown decision: " + std::string(name));
}

FilterStage ParseFilterStage(std::string_view name) {
  for (auto s : {FilterStage::kNone, FilterStage::kBlocklist, FilterStage::kToxicity,
                 FilterStage::kScoringUnavailable}) {
    if (FilterStageName(s) == name) return s;
  }
  throw Error(ErrorCode::kParseError, "unknown filter stage: " + std::string(name));
}

ScoringErrorPolicy ParseScoringErrorPolicy(std::string_view name) {
  if (name == "FailClosed") return ScoringErrorPolicy::kFailClosed;
  if (name == "FailOpen") return ScoringErrorPolicy::kFailOpen;
  throw Error(ErrorCode::kInvalidConfig, "unknown on_scoring_error: " + std::string(name));
}

ScoreProvider ParseScoreProvider(std::string_view name) {
  if (name == "Remote") return ScoreProvider::kRemote;
  if (name == "MockLexicon") return ScoreProvider::kMockLexicon;
  throw Error(ErrorCode::kParseError, "unknown score provider: " + std::string(name));
}

FilterPolicy FilterPolicy::Default() {
  FilterPolicy policy;
  for (const auto& attr : DefaultAttributes()) policy.thresholds[attr] = 0.8;
  return policy;
}

void FilterPolicy::Validate() const {
  for (const auto& [attr, t] : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "threshold for " + attr + " outside [0, 1]");
    }
  }
}

std::vector<std::string> FilterPolicy::attributes() const {
  std::vector<std::string> out;
  for (const auto& [attr, _] : thresholds) out.push_back(attr);
  return out;
}

FilterVerdict DecideVerdict(const std::vector<std::string>& matched_tokens,
                            const ScoringOutcome& scoring, const FilterPolicy& policy) {
  FilterVerdict v;
  if (!matched_tokens.empty()) {
    v.decision = Decision::kBlocked;
    v.stage = FilterStage::kBlocklist;
    v.matched_tokens = matched_tokens;
    return v;
  }
  if (!scoring.scores) {
    if (policy.on_scoring_error == ScoringErrorPolicy::kFailClosed) {
      v.decision = Decision::kBlocked;
      v.stage = FilterStage::kScoringUnavailable;
    }
    return v;
  }
  v.scores = scoring.scores;
  v.threshold_used = policy.thresholds;
  for (const auto& [attr, threshold] : policy.thresholds) {
    auto it = scoring.scores->scores.find(attr);
    if (it != scoring.scores->scores.end() && it->second >= threshold) {
      v.decision = Decision::kBlocked;
      v.stage = FilterStage::kToxicity;
    }
  }
  return v;
}

FilterPipeline::FilterPipeline(Blocklist blocklist, std::shared_ptr<ToxicityScorer> scorer,
                               FilterPolicy policy)
    : blocklist_(std::move(blocklist)), scorer_(std::move(scorer)), policy_(std::move(policy)) {
  policy_.Validate();
  if (!scorer_) throw Error(ErrorCode::kInvalidConfig, "filter pipeline needs a scorer");
}

FilterVerdict FilterPipeline::Check(std::string_view sentence) const {
  return Check(sentence, policy_);
}

FilterVerdict FilterPipeline::Check(std::string_view sentence, const FilterPolicy& policy) const {
  const auto matched = blocklist_.Match(sentence);
  if (!matched.empty()) return DecideVerdict(matched, {}, policy);
  ScoringOutcome outcome;
  try {
    ToxicityScores scores = scorer_->Score(sentence);
    ValidateScores(scores, policy.attributes());
    outcome.scores = std::move(scores);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kScoringUnavailable && e.code() != ErrorCode::kMalformedScore) {
      throw;
    }
  }
  return DecideVerdict(matched, outcome, policy);
}

}  // namespace narrator
