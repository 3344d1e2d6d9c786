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

#include <fstream>
#include <sstream>

#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {
namespace {

bool IsTerminator(char32_t cp) {
  return cp == U'.' || cp == U'!' || cp == U'?' || cp == 0x2026 || cp == 0x203D;
}

bool IsCloser(char32_t cp) {
  switch (cp) {
    case U'"': case U'\'': case U')': case U']': case U'}':
    case 0x2019: case 0x201D: case 0x00BB: case 0x203A:
      return true;
    default:
      return false;
  }
}

bool IsOpener(char32_t cp) {
  switch (cp) {
    case U'"': case U'\'': case U'(': case U'[': case U'{':
    case 0x2018: case 0x201C: case 0x00AB: case 0x2039:
      return true;
    default:
      return false;
  }
}

bool IsLowercase(char32_t cp) {
  if (cp >= U'a' && cp <= U'z') return true;
  if (cp >= 0xDF && cp <= 0xFF && cp != 0xF7) return true;
  if (cp >= 0x3B1 && cp <= 0x3C9) return true;
  if (cp >= 0x430 && cp <= 0x45F) return true;
  return false;
}

bool IsUppercaseLetter(char32_t cp) {
  return utf8::IsWordChar(cp) && utf8::FoldCase(cp) != cp;
}

// `word` is the whitespace-delimited token ending right before a single '.'.
bool LooksAbbreviated(std::u32string_view word, const std::set<std::string>& abbreviations) {
  while (!word.empty() && IsOpener(word.front())) word.remove_prefix(1);
  if (word.empty()) return false;
  if (word.size() == 1 && IsUppercaseLetter(word[0])) return true;  // initial
  if (abbreviations.count(utf8::FoldCase(utf8::Encode(word))) > 0) return true;
  // Dotted acronyms: every dot-separated piece is one or two word chars.
  if (word.find(U'.') == std::u32string_view::npos) return false;
  std::size_t piece = 0;
  for (char32_t cp : word) {
    if (cp == U'.') {
      if (piece == 0 || piece > 2) return false;
      piece = 0;
    } else if (utf8::IsWordChar(cp)) {
      ++piece;
    } else {
      return false;
    }
  }
  return piece >= 1 && piece <= 2;
}

// Abbreviations that often close a sentence. Followed by a capitalized word
// they end one ("at 5 p.m. Then"), unlike titles ("Dr. Who").
bool ClosesSentences(std::u32string_view word) {
  static const std::set<std::string> kFinal = {"etc", "a.m", "p.m", "inc", "ltd", "corp", "co"};
  while (!word.empty() && IsOpener(word.front())) word.remove_prefix(1);
  return kFinal.count(utf8::FoldCase(utf8::Encode(word))) > 0;
}

std::string NormalizeAbbreviation(std::string_view token) {
  std::string folded = utf8::FoldCase(token);
  while (!folded.empty() && folded.back() == '.') folded.pop_back();
  return folded;
}

}  // namespace

const std::set<std::string>& DefaultAbbreviations() {
  static const std::set<std::string> kDefaults = {
      "mr",   "mrs",  "ms",   "dr",   "prof", "sr",   "jr",   "st",   "mt",
      "vs",   "etc",  "inc",  "ltd",  "corp", "dept", "univ", "gen",  "col",
      "lt",   "sgt",  "capt", "cmdr", "rev",  "hon",  "fr",   "messrs",
      "mme",  "mlle", "approx", "fig", "vol", "ch",   "pp",   "ed",   "jan",
      "feb",  "mar",  "apr",  "jun",  "jul",  "aug",  "sep",  "sept", "oct",
      "nov",  "dec",  "ave",  "blvd", "rd",   "e.g",  "i.e",  "a.m",  "p.m",
      "u.s",  "u.k",  "cf",   "al",
  };
  return kDefaults;
}

SentenceSegmenter::SentenceSegmenter() : abbreviations_(DefaultAbbreviations()) {}

SentenceSegmenter::SentenceSegmenter(std::set<std::string> abbreviations) {
  for (const auto& a : abbreviations) {
    std::string norm = NormalizeAbbreviation(a);
    if (!norm.empty()) abbreviations_.insert(std::move(norm));
  }
}

SentenceSegmenter SentenceSegmenter::FromFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  std::set<std::string> tokens;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!utf8::IsValid(line)) {
      Error e(ErrorCode::kEncodingError, path.string() + " line " + std::to_string(line_no));
      e.line = line_no;
      throw e;
    }
    std::string token = utf8::CollapseWhitespace(line);
    if (token.empty() || token.front() == '#') continue;
    if (token.find(' ') != std::string::npos) {
      throw ParseErrorAt(line_no, "abbreviation contains whitespace: " + token);
    }
    tokens.insert(token);
  }
  return SentenceSegmenter(std::move(tokens));
}

std::vector<std::string> SentenceSegmenter::Split(std::string_view text) const {
  const std::u32string s = utf8::Decode(utf8::CollapseWhitespace(text));
  std::vector<std::string> sentences;
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    if (!IsTerminator(s[i])) {
      ++i;
      continue;
    }
    const std::size_t run_begin = i;
    while (i < n && IsTerminator(s[i])) ++i;
    const std::size_t run_end = i;
    while (i < n && IsCloser(s[i])) ++i;
    if (i < n && s[i] != U' ') continue;  // e.g. "3.5", "a.b"

    bool boundary = true;
    if (i < n && i + 1 < n && IsLowercase(s[i + 1])) boundary = false;
    if (boundary && run_end - run_begin == 1 && s[run_begin] == U'.' && i < n) {
      std::size_t word_begin = run_begin;
      while (word_begin > start && s[word_begin - 1] != U' ') --word_begin;
      const auto word = std::u32string_view(s).substr(word_begin, run_begin - word_begin);
      boundary = !LooksAbbreviated(word, abbreviations_) ||
                 (ClosesSentences(word) && i + 1 < n && IsUppercaseLetter(s[i + 1]));
    }
    if (!boundary) continue;
    sentences.push_back(utf8::Encode(std::u32string_view(s).substr(start, i - start)));
    start = i < n ? i + 1 : n;
  }
  if (start < n) sentences.push_back(utf8::Encode(std::u32string_view(s).substr(start)));
  return sentences;
}

std::vector<std::string> SegmentSentences(std::string_view text) {
  static const SentenceSegmenter kDefault;
  return kDefault.Split(text);
}

bool IsTerminated(std::string_view sentence) {
  std::u32string s = utf8::Decode(sentence);
  while (!s.empty() && (utf8::IsSpace(s.back()) || IsCloser(s.back()))) s.pop_back();
  return !s.empty() && IsTerminator(s.back());
}

std::vector<std::string> TruncateToBudget(std::span<const std::string> sentences,
                                          std::size_t budget_chars) {
  if (budget_chars == 0) throw Error(ErrorCode::kInvalidConfig, "budget_chars must be >= 1");
  std::vector<std::string> kept;
  std::size_t used = 0;
  for (const auto& sentence : sentences) {
    if (!IsTerminated(sentence)) break;
    const std::size_t len = utf8::Length(sentence);
    if (used + len > budget_chars) break;
    used += len;
    kept.push_back(sentence);
  }
  return kept;
}

}  // namespace narrator
