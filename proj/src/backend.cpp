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

#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "narrator/backend.hpp"
#include "narrator/digest.hpp"
#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {

std::string SanitizeCompletion(std::string_view raw, std::size_t max_chars) {
  std::u32string kept;
  for (char32_t cp : utf8::Decode(raw)) {
    const bool control = cp < 0x20 || (cp >= 0x7F && cp <= 0x9F);
    if (control && !utf8::IsLineBreak(cp)) continue;
    if (kept.size() >= max_chars) break;
    kept.push_back(cp);
  }
  return utf8::Encode(kept);
}

bool IsBackendFailure(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kTimeout:
    case ErrorCode::kAuthFailure:
    case ErrorCode::kRateLimited:
    case ErrorCode::kMalformedResponse:
    case ErrorCode::kBackendUnavailable:
      return true;
    default:
      return false;
  }
}

FixtureStore::FixtureStore() : entries_(std::make_shared<const Map>()) {}

std::shared_ptr<const FixtureStore::Map> FixtureStore::Snapshot() const {
  return std::atomic_load(&entries_);
}

std::shared_ptr<FixtureStore> FixtureStore::FromJsonl(std::string_view text) {
  auto store = std::make_shared<FixtureStore>();
  std::int64_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    FixtureRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
      rec.run_index = j.at("run_index").get<int>();
      rec.text = j.at("text").get<std::string>();
      rec.backend = j.value("backend", "");
      rec.recorded_at = j.value("recorded_at", "");
    } catch (const nlohmann::json::exception& e) {
      throw ParseErrorAt(line_no, e.what());
    }
    store->Record(rec);
  }
  return store;
}

std::shared_ptr<FixtureStore> FixtureStore::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto store = FromJsonl(buf.str());
  const auto meta_path = std::filesystem::path(path.string() + ".meta.json");
  if (std::ifstream meta_in{meta_path}) {
    try {
      const auto j = nlohmann::json::parse(meta_in);
      store->metadata.show = j.value("show", "");
      store->metadata.date = j.value("date", "");
      store->metadata.backend = j.value("backend", "");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, meta_path.string() + ": " + e.what());
    }
  }
  return store;
}

bool FixtureStore::Record(const FixtureRecord& record) {
  std::lock_guard lock(write_mutex_);
  auto current = Snapshot();
  const FixtureKey key{record.prompt_sha256, record.run_index};
  if (auto it = current->find(key); it != current->end()) {
    if (it->second.text != record.text) {
      throw Error(ErrorCode::kDuplicateKeyConflict,
                  "fixture " + key.prompt_sha256 + "#" + std::to_string(key.run_index) +
                      " already recorded with different text");
    }
    return false;
  }
  auto next = std::make_shared<Map>(*current);
  next->emplace(key, record);
  std::atomic_store(&entries_, std::shared_ptr<const Map>(std::move(next)));
  return true;
}

bool FixtureStore::Record(const CompletionRequest& request, const CompletionResponse& response,
                          std::string recorded_at) {
  return Record(FixtureRecord{Sha256Hex(request.prompt), request.run_index, response.text,
                              response.backend_id, std::move(recorded_at)});
}

std::optional<std::string> FixtureStore::Lookup(const FixtureKey& key) const {
  auto snapshot = Snapshot();
  if (auto it = snapshot->find(key); it != snapshot->end()) return it->second.text;
  return std::nullopt;
}

std::optional<std::string> FixtureStore::Lookup(std::string_view prompt, int run_index) const {
  return Lookup(FixtureKey{Sha256Hex(prompt), run_index});
}

std::size_t FixtureStore::size() const { return Snapshot()->size(); }

std::string FixtureStore::ToJsonl() const {
  std::string out;
  for (const auto& [key, rec] : *Snapshot()) {
    nlohmann::json j;
    j["prompt_sha256"] = rec.prompt_sha256;
    j["run_index"] = rec.run_index;
    j["text"] = rec.text;
    j["backend"] = rec.backend;
    j["recorded_at"] = rec.recorded_at;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void FixtureStore::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path.string());
  out << ToJsonl();
  if (!metadata.show.empty() || !metadata.date.empty() || !metadata.backend.empty()) {
    std::ofstream meta(path.string() + ".meta.json", std::ios::binary | std::ios::trunc);
    nlohmann::json j;
    j["show"] = metadata.show;
    j["date"] = metadata.date;
    j["backend"] = metadata.backend;
    meta << j.dump(2) << "\n";
  }
}

ReplayBackend::ReplayBackend(std::shared_ptr<const FixtureStore> store, std::string id)
    : store_(std::move(store)), id_(std::move(id)) {}

CompletionResponse ReplayBackend::Complete(const CompletionRequest& request) {
  const std::string digest = Sha256Hex(request.prompt);
  auto text = store_->Lookup(FixtureKey{digest, request.run_index});
  if (!text) {
    throw Error(ErrorCode::kFixtureMiss,
                "no fixture for prompt " + digest + " run " + std::to_string(request.run_index));
  }
  CompletionResponse response;
  response.text = SanitizeCompletion(*text, request.max_chars);
  response.backend_id = id_;
  response.fixture_hit = true;
  return response;
}

RecordingBackend::RecordingBackend(std::shared_ptr<ModelBackend> inner,
                                   std::shared_ptr<FixtureStore> store, TimestampFn now)
    : inner_(std::move(inner)), store_(std::move(store)), now_(std::move(now)) {}

CompletionResponse RecordingBackend::Complete(const CompletionRequest& request) {
  CompletionResponse response = inner_->Complete(request);
  store_->Record(request, response, now_ ? now_() : std::string());
  return response;
}

namespace net {
namespace {
std::atomic<std::size_t> g_outbound{0};
}
std::size_t OutboundAttempts() { return g_outbound.load(); }
void NoteOutboundAttempt() { g_outbound.fetch_add(1); }
}  // namespace net

}  // namespace narrator
