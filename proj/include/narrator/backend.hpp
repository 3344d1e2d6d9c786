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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

namespace narrator {

struct CompletionRequest {
  std::string prompt;
  std::size_t max_chars = 400;
  std::optional<std::uint64_t> sampling_seed;
  int run_index = 0;
};

struct CompletionResponse {
  std::string text;
  std::string backend_id;
  std::int64_t latency_ms = 0;
  bool fixture_hit = false;
};

// A completion provider: prompt in, text out.
//
// Complete() returns text with control characters other than line breaks
// removed and clipped to request.max_chars scalar values. Failures are
// reported as narrator::Error with one of Timeout, AuthFailure, RateLimited,
// MalformedResponse or BackendUnavailable; the replay backend additionally
// throws FixtureMiss. Implementations are safe to call concurrently.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual CompletionResponse Complete(const CompletionRequest& request) = 0;
  virtual std::string id() const = 0;
};

// Removes control characters except line breaks, replaces invalid UTF-8 with
// U+FFFD and clips to max_chars.
std::string SanitizeCompletion(std::string_view raw, std::size_t max_chars);

// True for the error codes that mark a single failed run rather than a
// broken setup.
bool IsBackendFailure(const class Error& e);

// Seeded word-level Markov text over a small embedded corpus. Pure:
// identical arguments give identical output on every platform. Roughly 30%
// of outputs end with an unterminated fragment.
std::string MockComplete(std::string_view prompt, std::uint64_t seed, int run_index);

class MockBackend : public ModelBackend {
 public:
  CompletionResponse Complete(const CompletionRequest& request) override;
  std::string id() const override { return "mock"; }
};

struct FixtureKey {
  std::string prompt_sha256;
  int run_index = 0;

  auto operator<=>(const FixtureKey&) const = default;
};

struct FixtureRecord {
  std::string prompt_sha256;
  int run_index = 0;
  std::string text;
  std::string backend;
  std::string recorded_at;
};

struct FixtureMetadata {
  std::string show;
  std::string date;
  std::string backend;
};

// Recorded prompt -> completion pairs keyed by (sha256(prompt), run_index).
// Entries are immutable: re-recording a key with different text throws
// DuplicateKeyConflict, with identical text it is a no-op. Writes are
// serialized; reads work on an immutable snapshot and take no lock beyond
// the pointer copy.
class FixtureStore {
 public:
  FixtureStore();

  // JSON Lines, one record per line. Metadata, when present, lives next to
  // the file as `<path>.meta.json`.
  static std::shared_ptr<FixtureStore> Load(const std::filesystem::path& path);
  static std::shared_ptr<FixtureStore> FromJsonl(std::string_view text);

  // Returns true when a new entry was added.
  bool Record(const FixtureRecord& record);
  bool Record(const CompletionRequest& request, const CompletionResponse& response,
              std::string recorded_at);

  std::optional<std::string> Lookup(const FixtureKey& key) const;
  std::optional<std::string> Lookup(std::string_view prompt, int run_index) const;

  std::size_t size() const;

  // Records in key order.
  std::string ToJsonl() const;
  void Save(const std::filesystem::path& path) const;

  FixtureMetadata metadata;

 private:
  using Map = std::map<FixtureKey, FixtureRecord>;
  std::shared_ptr<const Map> Snapshot() const;

  mutable std::mutex write_mutex_;
  std::shared_ptr<const Map> entries_;
};

// Serves completions from a fixture store. A missing entry throws
// FixtureMiss; there is no fallback.
class ReplayBackend : public ModelBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<const FixtureStore> store,
                         std::string id = "replay");
  CompletionResponse Complete(const CompletionRequest& request) override;
  std::string id() const override { return id_; }

 private:
  std::shared_ptr<const FixtureStore> store_;
  std::string id_;
};

// Forwards to another backend and records every successful completion.
class RecordingBackend : public ModelBackend {
 public:
  using TimestampFn = std::function<std::string()>;

  RecordingBackend(std::shared_ptr<ModelBackend> inner, std::shared_ptr<FixtureStore> store,
                   TimestampFn now);
  CompletionResponse Complete(const CompletionRequest& request) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<ModelBackend> inner_;
  std::shared_ptr<FixtureStore> store_;
  TimestampFn now_;
};

enum class CompletionAdapter {
  kGeneric,  // {"prompt", "max_chars", ...} -> {"text"}
  kOpenAI,   // /v1/completions style: {"model", "prompt", "max_tokens"} -> {"choices":[{"text"}]}
};

struct RemoteBackendConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/completions";
  std::string model;
  std::string api_key_env;
  std::int64_t timeout_ms = 10000;
  CompletionAdapter adapter = CompletionAdapter::kGeneric;
  std::optional<double> temperature;
  std::optional<double> top_p;
};

// Completion-over-HTTP client. Never retries: completions are not
// idempotent, so a timeout surfaces to the caller.
class RemoteBackend : public ModelBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config);
  CompletionResponse Complete(const CompletionRequest& request) override;
  std::string id() const override;

 private:
  RemoteBackendConfig config_;
  std::string api_key_;
};

namespace net {
// Count of outbound connection attempts made by the remote clients in this
// process. Stays zero when only mock/replay components are in use.
std::size_t OutboundAttempts();
void NoteOutboundAttempt();
}  // namespace net

}  // namespace narrator
