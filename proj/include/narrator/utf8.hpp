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
#include <string>
#include <string_view>
#include <vector>

// Minimal UTF-8 helpers. Lengths throughout the project are counted in
// Unicode scalar values, never bytes.
namespace narrator::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

bool IsValid(std::string_view text);

// Decodes leniently: each invalid byte becomes U+FFFD.
std::u32string Decode(std::string_view text);

void Append(std::string& out, char32_t cp);
std::string Encode(std::u32string_view cps);

// Number of scalar values in valid UTF-8 (invalid bytes count one each).
std::size_t Length(std::string_view text);

// Longest prefix holding at most `max_chars` scalar values.
std::string Clip(std::string_view text, std::size_t max_chars);

bool IsSpace(char32_t cp);
bool IsLineBreak(char32_t cp);

// Letters/digits for tokenization. ASCII is exact; outside ASCII everything
// except whitespace, common punctuation blocks and symbols counts as a word
// character.
bool IsWordChar(char32_t cp);

// Simple case folding covering ASCII, Latin-1, Latin Extended-A, Greek and
// Cyrillic capitals.
char32_t FoldCase(char32_t cp);
std::string FoldCase(std::string_view text);

// Splits on whitespace and rejoins with single spaces (also trims).
std::string CollapseWhitespace(std::string_view text);

// Case-folded maximal runs of word characters.
std::vector<std::string> WordTokens(std::string_view text);

}  // namespace narrator::utf8
