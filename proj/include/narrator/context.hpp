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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace narrator {

enum class LineSource { kOperatorTyped, kAiPublished };

std::string_view LineSourceName(LineSource source);
LineSource ParseLineSource(std::string_view name);

struct ContextLine {
  std::string text;
  LineSource source = LineSource::kOperatorTyped;
  std::uint64_t sequence = 0;

  bool operator==(const ContextLine&) const = default;
};

// The ordered, append-only narration context fed to the model.
class SceneContext {
 public:
  // Throws InvalidAction for empty text or text containing line breaks.
  const ContextLine& Append(std::string text, LineSource source);

  const std::vector<ContextLine>& lines() const { return lines_; }
  bool empty() const { return lines_.empty(); }
  std::size_t size() const { return lines_.size(); }

  // Sum of line lengths in scalar values plus one joining space between
  // consecutive lines.
  std::size_t char_length() const { return char_length_; }

  bool operator==(const SceneContext&) const = default;

 private:
  std::vector<ContextLine> lines_;
  std::size_t char_length_ = 0;
  std::uint64_t next_sequence_ = 1;
};

// Joins the line texts in sequence order with single spaces. Nothing else is
// added: no instructions, no examples, no separators.
std::string RenderPrompt(const SceneContext& context);

}  // namespace narrator
