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
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace narrator {

// Opening lines that audience suggestions are matched against. Entry ids are
// the dense positions 0..n-1.
struct SeedCorpus {
  std::vector<std::string> sentences;
  std::string source_digest;  // sha256 over the entries, each followed by '\n'

  // UTF-8, one sentence per line, '#' comments and blank lines skipped.
  static SeedCorpus Load(const std::filesystem::path& path);
  static SeedCorpus FromSentences(std::vector<std::string> sentences);

  std::size_t size() const { return sentences.size(); }
};

using Embedding = std::vector<float>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Unit-norm vector of length dimension(); deterministic.
  virtual Embedding Embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string id() const = 0;
};

// Hashed character-trigram embedder. The text is case-folded, whitespace
// collapsed and padded with one space on each side; each trigram of scalar
// values adds +-1 to one of `dimension` buckets (bucket and sign come from
// two independent hashes). The vector is L2-normalized; text with no
// trigrams maps to the first basis vector.
class HashedTrigramEmbedder : public Embedder {
 public:
  explicit HashedTrigramEmbedder(std::size_t dimension = 256);
  Embedding Embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string id() const override;

 private:
  std::size_t dimension_;
};

// dot(a, b) / (|a| |b|) accumulated in double. Zero vectors give 0.
double CosineSimilarity(std::span<const float> a, std::span<const float> b);

struct SeedMatch {
  std::size_t entry_id = 0;
  std::string sentence;
  double similarity = 0.0;

  bool operator==(const SeedMatch&) const = default;
};

// Sorts by descending similarity, ties by ascending entry id.
void SortMatches(std::vector<SeedMatch>& matches);

// Exact scan that re-embeds every corpus entry. Serves as the oracle for the
// index.
std::vector<SeedMatch> BruteForceQuery(const SeedCorpus& corpus, const Embedder& embedder,
                                       std::string_view suggestion, std::size_t k);

enum class IndexMode { kExact, kApproximate };

std::string_view IndexModeName(IndexMode mode);
IndexMode ParseIndexMode(std::string_view name);

struct ApproxParams {
  std::size_t num_tables = 16;
  std::size_t hashes_per_table = 12;
  std::uint64_t seed = 0x5EED1DE5ULL;
  // Query-directed multi-probe: buckets are visited in ascending order of
  // the summed squared distances from the query to the hyperplanes whose
  // bits were flipped, num_tables * probes_per_table buckets in total.
  std::size_t probes_per_table = 256;
  // Probing continues past that budget until at least this many candidates
  // (or the whole corpus) have been collected.
  std::size_t min_candidates = 64;

  bool operator==(const ApproxParams&) const = default;
};

// Embedded corpus plus, in approximate mode, random-hyperplane hash tables.
// Immutable after construction and safe for concurrent queries.
class SeedIndex {
 public:
  // Throws EmptyCorpus.
  static SeedIndex Build(SeedCorpus corpus, std::shared_ptr<const Embedder> embedder,
                         IndexMode mode, ApproxParams params = {});

  // Versioned binary cache: header JSON (parameters, embedder id, corpus
  // digest and sentences) followed by little-endian float32 vectors.
  void Save(const std::filesystem::path& path) const;
  static SeedIndex Load(const std::filesystem::path& path, std::shared_ptr<const Embedder> embedder);

  // Uses the cache when it matches the corpus digest, mode and parameters;
  // otherwise rebuilds and rewrites it.
  static SeedIndex LoadOrBuild(const std::filesystem::path& cache, const SeedCorpus& corpus,
                               std::shared_ptr<const Embedder> embedder, IndexMode mode,
                               ApproxParams params = {});

  // Exact mode: true top-k. Approximate mode: candidates from bucket probing,
  // rescored exactly. At most k results.
  std::vector<SeedMatch> Query(std::string_view suggestion, std::size_t k) const;
  std::vector<SeedMatch> QueryVector(std::span<const float> query, std::size_t k) const;

  IndexMode mode() const { return mode_; }
  const ApproxParams& params() const { return params_; }
  const SeedCorpus& corpus() const { return corpus_; }
  const Embedder& embedder() const { return *embedder_; }
  std::span<const float> vector(std::size_t entry) const;
  std::size_t size() const { return corpus_.size(); }

 private:
  struct Table {
    std::vector<std::uint32_t> offsets;  // 2^bits + 1 bucket starts
    std::vector<std::uint32_t> ids;
  };

  void BuildTables();
  double Projection(std::size_t table, std::size_t bit, std::span<const float> v) const;
  std::uint32_t Signature(std::size_t table, std::span<const float> v) const;
  std::vector<std::size_t> Candidates(std::span<const float> query) const;
  std::vector<SeedMatch> Rank(std::span<const float> query, const std::vector<std::size_t>& ids,
                              std::size_t k) const;

  SeedCorpus corpus_;
  std::shared_ptr<const Embedder> embedder_;
  IndexMode mode_ = IndexMode::kExact;
  ApproxParams params_;
  std::size_t dim_ = 0;
  std::vector<float> vectors_;      // n x dim, row-major
  std::vector<float> hyperplanes_;  // tables x bits x dim
  std::vector<Table> tables_;
};

}  // namespace narrator
