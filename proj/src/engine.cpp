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

#include "narrator/engine.hpp"

#include <future>

#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {

void GenerationParams::Validate() const {
  if (runs_k < 1) throw Error(ErrorCode::kInvalidConfig, "runs_k must be >= 1");
  if (budget_chars < 1) throw Error(ErrorCode::kInvalidConfig, "budget_chars must be >= 1");
  if (max_completion_chars < 1) {
    throw Error(ErrorCode::kInvalidConfig, "max_completion_chars must be >= 1");
  }
}

CandidateSet BuildCandidateSet(std::string raw_completion, int run_index, std::string set_id,
                               std::size_t budget_chars, const FilterPipeline& filter,
                               const FilterPolicy& policy, const SentenceSegmenter& segmenter) {
  CandidateSet set;
  set.set_id = std::move(set_id);
  set.run_index = run_index;
  const auto sentences = segmenter.Split(raw_completion);
  for (auto& text : TruncateToBudget(sentences, budget_chars)) {
    CandidateSentence candidate;
    candidate.verdict = filter.Check(text, policy);
    candidate.selectable = !candidate.verdict.blocked();
    set.total_chars += utf8::Length(text);
    candidate.text = std::move(text);
    set.sentences.push_back(std::move(candidate));
  }
  set.raw_completion = std::move(raw_completion);
  return set;
}

GenerationResult GenerateCandidateSets(const SceneContext& context, const GenerationParams& params,
                                       ModelBackend& backend, const FilterPipeline& filter,
                                       const FilterPolicy& policy,
                                       const SentenceSegmenter& segmenter,
                                       std::string_view set_id_prefix) {
  params.Validate();
  const std::string prompt = RenderPrompt(context);

  std::vector<std::future<CandidateSet>> runs;
  runs.reserve(static_cast<std::size_t>(params.runs_k));
  for (int run = 0; run < params.runs_k; ++run) {
    std::string set_id = std::string(set_id_prefix) + "-r" + std::to_string(run);
    runs.push_back(std::async(std::launch::async, [&, run, set_id = std::move(set_id)]() mutable {
      CompletionRequest request;
      request.prompt = prompt;
      request.max_chars = params.max_completion_chars;
      request.sampling_seed = params.sampling_seed;
      request.run_index = run;
      CompletionResponse response;
      try {
        response = backend.Complete(request);
      } catch (const Error& e) {
        if (!IsBackendFailure(e)) throw;
        CandidateSet failed;
        failed.set_id = std::move(set_id);
        failed.run_index = run;
        failed.backend_failed = true;
        return failed;
      }
      return BuildCandidateSet(std::move(response.text), run, std::move(set_id),
                               params.budget_chars, filter, policy, segmenter);
    }));
  }

  GenerationResult result;
  std::exception_ptr first_error;
  for (auto& run : runs) {
    try {
      result.sets.push_back(run.get());
      if (result.sets.back().backend_failed) ++result.failed_runs;
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  if (result.failed_runs == params.runs_k) {
    throw Error(ErrorCode::kBackendUnavailable,
                "all " + std::to_string(params.runs_k) + " runs failed");
  }
  return result;
}

}  // namespace narrator
