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

#include "narrator/context.hpp"

#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {

std::string_view LineSourceName(LineSource source) {
  return source == LineSource::kOperatorTyped ? "OperatorTyped" : "AiPublished";
}

LineSource ParseLineSource(std::string_view name) {
  if (name == "OperatorTyped") return LineSource::kOperatorTyped;
  if (name == "AiPublished") return LineSource::kAiPublished;
  throw Error(ErrorCode::kParseError, "unknown line source: " + std::string(name));
}

const ContextLine& SceneContext::Append(std::string text, LineSource source) {
  if (text.empty()) throw Error(ErrorCode::kInvalidAction, "context line is empty");
  for (char32_t cp : utf8::Decode(text)) {
    if (utf8::IsLineBreak(cp)) {
      throw Error(ErrorCode::kInvalidAction, "context line contains a line break");
    }
  }
  const std::size_t len = utf8::Length(text);
  char_length_ += lines_.empty() ? len : len + 1;
  lines_.push_back(ContextLine{std::move(text), source, next_sequence_++});
  return lines_.back();
}

std::string RenderPrompt(const SceneContext& context) {
  std::string prompt;
  for (const auto& line : context.lines()) {
    if (!prompt.empty()) prompt.push_back(' ');
    prompt += line.text;
  }
  return prompt;
}

}  // namespace narrator
