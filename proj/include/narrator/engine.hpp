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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "narrator/backend.hpp"
#include "narrator/context.hpp"
#include "narrator/filter.hpp"
#include "narrator/segmenter.hpp"

namespace narrator {

struct GenerationParams {
  int runs_k = 3;
  std::size_t budget_chars = 100;
  std::size_t max_completion_chars = 400;
  std::optional<std::uint64_t> sampling_seed;
  std::string backend_id;

  // Throws InvalidConfig.
  void Validate() const;

  bool operator==(const GenerationParams&) const = default;
};

struct CandidateSentence {
  std::string text;
  FilterVerdict verdict;
  bool selectable = true;  // false whenever the verdict is Blocked

  bool operator==(const CandidateSentence&) const = default;
};

struct CandidateSet {
  std::string set_id;
  int run_index = 0;
  std::vector<CandidateSentence> sentences;
  std::string raw_completion;
  std::size_t total_chars = 0;  // scalar values, joining spaces excluded
  bool backend_failed = false;

  bool operator==(const CandidateSet&) const = default;
};

struct GenerationResult {
  std::vector<CandidateSet> sets;  // size runs_k, in run order
  int failed_runs = 0;

  bool partial_failure() const { return failed_runs > 0; }
};

// Runs the backend runs_k times on the rendered context, concurrently, and
// assembles the sets in run order. Each completion is segmented, cut to the
// character budget and filtered sentence by sentence. A run whose budgeted
// prefix is empty gives an empty set. Runs that fail with a backend error
// become empty sets flagged backend_failed; if every run fails the call
// throws BackendUnavailable. The context is never modified.
//
// Set ids are `<set_id_prefix>-r<run_index>`.
GenerationResult GenerateCandidateSets(const SceneContext& context, const GenerationParams& params,
                                       ModelBackend& backend, const FilterPipeline& filter,
                                       const FilterPolicy& policy,
                                       const SentenceSegmenter& segmenter,
                                       std::string_view set_id_prefix);

// Builds one set from a completion; exposed so tests can check the budget
// and prefix rules without a backend.
CandidateSet BuildCandidateSet(std::string raw_completion, int run_index, std::string set_id,
                               std::size_t budget_chars, const FilterPipeline& filter,
                               const FilterPolicy& policy, const SentenceSegmenter& segmenter);

}  // namespace narrator
