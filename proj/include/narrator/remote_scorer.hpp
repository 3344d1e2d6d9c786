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
#include <string>
#include <vector>

#include "narrator/filter.hpp"

namespace narrator {

enum class ScorerAdapter {
  kGeneric,      // {"text", "attributes"} -> {"scores": {attr: value}}
  kPerspective,  // comments:analyze request/response shape
};

struct RemoteScorerConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/score";
  ScorerAdapter adapter = ScorerAdapter::kGeneric;
  std::string api_key_env;
  std::int64_t timeout_ms = 10000;
  std::vector<std::string> attributes = DefaultAttributes();
};

// Client for an external toxicity scoring service. Timeouts, connection
// failures, auth errors and 5xx responses throw ScoringUnavailable; a
// response with missing or out-of-range scores throws MalformedScore.
class RemoteScorer : public ToxicityScorer {
 public:
  explicit RemoteScorer(RemoteScorerConfig config);
  ToxicityScores Score(std::string_view sentence) override;
  std::string id() const override { return "remote:" + config_.base_url; }

  // Adapter translation, exposed for tests.
  static std::string BuildRequestBody(const RemoteScorerConfig& config, std::string_view text);
  static ToxicityScores ParseResponseBody(const RemoteScorerConfig& config, std::string_view body);

 private:
  RemoteScorerConfig config_;
  std::string api_key_;
};

}  // namespace narrator
