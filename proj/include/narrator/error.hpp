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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace narrator {

enum class ErrorCode {
  // model backends
  kTimeout,
  kAuthFailure,
  kRateLimited,
  kMalformedResponse,
  kBackendUnavailable,
  kFixtureMiss,
  kDuplicateKeyConflict,
  // safety filter
  kScoringUnavailable,
  kMalformedScore,
  // files and parsing
  kFileMissing,
  kEncodingError,
  kParseError,
  kStaleIndex,
  // story seed
  kEmptyCorpus,
  // session
  kInvalidConfig,
  kInvalidAction,
  kInvalidSelection,
  kInvalidTransition,
  kBlockedWithoutOverride,
  kSessionEnded,
  kSeedIndexUnavailable,
  kDivergenceDetected,
  kSessionNotFound,
};

std::string_view ErrorCodeName(ErrorCode code);

// The single exception type thrown by the library. Optional fields carry the
// extra context some codes need (a 1-based line for parse errors, the event
// sequence for divergence, the retry hint for rate limiting).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  std::optional<std::int64_t> line;
  std::optional<std::int64_t> sequence;
  std::optional<std::int64_t> retry_after_seconds;

 private:
  ErrorCode code_;
};

inline Error ParseErrorAt(std::int64_t line, const std::string& message) {
  Error e(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + message);
  e.line = line;
  return e;
}

}  // namespace narrator
