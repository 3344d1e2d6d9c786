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

#include "narrator/error.hpp"

namespace narrator {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kFixtureMiss: return "FixtureMiss";
    case ErrorCode::kDuplicateKeyConflict: return "DuplicateKeyConflict";
    case ErrorCode::kScoringUnavailable: return "ScoringUnavailable";
    case ErrorCode::kMalformedScore: return "MalformedScore";
    case ErrorCode::kFileMissing: return "FileMissing";
    case ErrorCode::kEncodingError: return "EncodingError";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kStaleIndex: return "StaleIndex";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidAction: return "InvalidAction";
    case ErrorCode::kInvalidSelection: return "InvalidSelection";
    case ErrorCode::kInvalidTransition: return "InvalidTransition";
    case ErrorCode::kBlockedWithoutOverride: return "BlockedWithoutOverride";
    case ErrorCode::kSessionEnded: return "SessionEnded";
    case ErrorCode::kSeedIndexUnavailable: return "SeedIndexUnavailable";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kSessionNotFound: return "SessionNotFound";
  }
  return "Unknown";
}

}  // namespace narrator
