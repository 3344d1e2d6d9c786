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

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace narrator {

// Rule-based sentence splitter.
//
// A boundary is placed after a run of terminators ('.', '!', '?', U+2026)
// plus any closing quotes or brackets, but only when whitespace or the end of
// input follows. A lone '.' does not end a sentence after a listed
// abbreviation, a single-letter initial, or a dotted acronym such as "e.g".
// No boundary is placed when the next word starts with a lowercase letter.
//
// Whitespace is collapsed in the output, so joining the sentences with single
// spaces reproduces the whitespace-collapsed input exactly.
class SentenceSegmenter {
 public:
  SentenceSegmenter();
  explicit SentenceSegmenter(std::set<std::string> abbreviations);

  // One token per line, '#' comments, UTF-8. Tokens are stored case-folded
  // and without a trailing period.
  static SentenceSegmenter FromFile(const std::filesystem::path& path);

  std::vector<std::string> Split(std::string_view text) const;

  const std::set<std::string>& abbreviations() const { return abbreviations_; }

 private:
  std::set<std::string> abbreviations_;
};

const std::set<std::string>& DefaultAbbreviations();

// Uses a process-wide segmenter with the default abbreviation list.
std::vector<std::string> SegmentSentences(std::string_view text);

// True when the sentence ends in a terminator, optionally followed by closing
// quotes or brackets.
bool IsTerminated(std::string_view sentence);

// Longest prefix of whole, terminated sentences whose summed length (in
// Unicode scalar values, joining spaces excluded) fits `budget_chars`.
// Stops at the first unterminated sentence. Throws InvalidConfig when
// budget_chars is zero.
std::vector<std::string> TruncateToBudget(std::span<const std::string> sentences,
                                          std::size_t budget_chars);

}  // namespace narrator
