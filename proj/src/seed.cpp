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

#include "narrator/seed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "narrator/digest.hpp"
#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {
namespace {

constexpr char kMagic[8] = {'N', 'S', 'E', 'E', 'D', 'I', 'D', 'X'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kMaxHashBits = 20;

std::string DigestOf(const std::vector<std::string>& sentences) {
  std::string joined;
  for (const auto& s : sentences) {
    joined += s;
    joined.push_back('\n');
  }
  return Sha256Hex(joined);
}

bool Better(const SeedMatch& a, const SeedMatch& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.entry_id < b.entry_id;
}

// Standard normal via Box-Muller on the project's own generator, so the
// hyperplanes are identical on every platform.
float Gaussian(SplitMix64& rng) {
  double u1 = rng.Unit();
  while (u1 <= 0.0) u1 = rng.Unit();
  const double u2 = rng.Unit();
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
}

template <typename T>
void WritePod(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorCode::kParseError, "truncated index file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

SeedCorpus SeedCorpus::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  std::vector<std::string> sentences;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!utf8::IsValid(line)) {
      Error e(ErrorCode::kEncodingError, path.string() + " line " + std::to_string(line_no));
      e.line = line_no;
      throw e;
    }
    std::string text = utf8::CollapseWhitespace(line);
    if (text.empty() || text.front() == '#') continue;
    sentences.push_back(std::move(text));
  }
  return FromSentences(std::move(sentences));
}

SeedCorpus SeedCorpus::FromSentences(std::vector<std::string> sentences) {
  SeedCorpus corpus;
  corpus.sentences = std::move(sentences);
  corpus.source_digest = DigestOf(corpus.sentences);
  return corpus;
}

HashedTrigramEmbedder::HashedTrigramEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw Error(ErrorCode::kInvalidConfig, "embedding dimension must be >= 1");
}

std::string HashedTrigramEmbedder::id() const {
  return "hashed-trigram-v1-d" + std::to_string(dimension_);
}

Embedding HashedTrigramEmbedder::Embed(std::string_view text) const {
  const std::u32string padded =
      U" " + utf8::Decode(utf8::FoldCase(utf8::CollapseWhitespace(text))) + U" ";
  std::vector<double> acc(dimension_, 0.0);
  bool any = false;
  if (padded.size() >= 3) {
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const std::string trigram = utf8::Encode(std::u32string_view(padded).substr(i, 3));
      if (trigram == "   ") continue;
      const std::uint64_t bucket_hash = Fnv1a64(trigram);
      const std::uint64_t sign_hash = Mix64(Fnv1a64(trigram, 0x84222325cbf29ce4ULL));
      acc[bucket_hash % dimension_] += (sign_hash & 1) ? 1.0 : -1.0;
      any = true;
    }
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  Embedding out(dimension_, 0.0f);
  if (!any || norm == 0.0) {
    out[0] = 1.0f;
    return out;
  }
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < dimension_; ++i) out[i] = static_cast<float>(acc[i] / norm);
  return out;
}

double CosineSimilarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void SortMatches(std::vector<SeedMatch>& matches) {
  std::sort(matches.begin(), matches.end(), Better);
}

std::vector<SeedMatch> BruteForceQuery(const SeedCorpus& corpus, const Embedder& embedder,
                                       std::string_view suggestion, std::size_t k) {
  const Embedding query = embedder.Embed(suggestion);
  std::vector<SeedMatch> all;
  all.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Embedding entry = embedder.Embed(corpus.sentences[i]);
    all.push_back(SeedMatch{i, corpus.sentences[i], CosineSimilarity(entry, query)});
  }
  SortMatches(all);
  if (all.size() > k) all.resize(k);
  return all;
}

std::string_view IndexModeName(IndexMode mode) {
  return mode == IndexMode::kExact ? "exact" : "approx";
}

IndexMode ParseIndexMode(std::string_view name) {
  if (name == "exact") return IndexMode::kExact;
  if (name == "approx" || name == "approximate") return IndexMode::kApproximate;
  throw Error(ErrorCode::kInvalidConfig, "unknown index mode: " + std::string(name));
}

SeedIndex SeedIndex::Build(SeedCorpus corpus, std::shared_ptr<const Embedder> embedder,
                           IndexMode mode, ApproxParams params) {
  if (corpus.sentences.empty()) throw Error(ErrorCode::kEmptyCorpus, "seed corpus is empty");
  if (!embedder) throw Error(ErrorCode::kInvalidConfig, "seed index needs an embedder");
  if (params.num_tables == 0 || params.hashes_per_table == 0 ||
      params.hashes_per_table > kMaxHashBits) {
    throw Error(ErrorCode::kInvalidConfig, "approx params: tables >= 1, 1 <= hashes <= 20");
  }
  SeedIndex index;
  index.embedder_ = std::move(embedder);
  index.mode_ = mode;
  index.params_ = params;
  index.dim_ = index.embedder_->dimension();
  index.vectors_.reserve(corpus.size() * index.dim_);
  for (const auto& sentence : corpus.sentences) {
    const Embedding v = index.embedder_->Embed(sentence);
    index.vectors_.insert(index.vectors_.end(), v.begin(), v.end());
  }
  index.corpus_ = std::move(corpus);
  index.BuildTables();
  return index;
}

void SeedIndex::BuildTables() {
  hyperplanes_.clear();
  tables_.clear();
  if (mode_ != IndexMode::kApproximate) return;
  const std::size_t bits = params_.hashes_per_table;
  SplitMix64 rng(params_.seed);
  hyperplanes_.resize(params_.num_tables * bits * dim_);
  for (auto& h : hyperplanes_) h = Gaussian(rng);

  const std::size_t n = corpus_.size();
  const std::size_t buckets = std::size_t{1} << bits;
  tables_.resize(params_.num_tables);
  for (std::size_t t = 0; t < params_.num_tables; ++t) {
    std::vector<std::uint32_t> keys(n);
    Table& table = tables_[t];
    table.offsets.assign(buckets + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = Signature(t, vector(i));
      ++table.offsets[keys[i] + 1];
    }
    for (std::size_t b = 0; b < buckets; ++b) table.offsets[b + 1] += table.offsets[b];
    table.ids.resize(n);
    std::vector<std::uint32_t> fill(table.offsets.begin(), table.offsets.end() - 1);
    for (std::size_t i = 0; i < n; ++i) table.ids[fill[keys[i]]++] = static_cast<std::uint32_t>(i);
  }
}

std::span<const float> SeedIndex::vector(std::size_t entry) const {
  return std::span<const float>(vectors_).subspan(entry * dim_, dim_);
}

double SeedIndex::Projection(std::size_t table, std::size_t bit, std::span<const float> v) const {
  const float* plane = hyperplanes_.data() + (table * params_.hashes_per_table + bit) * dim_;
  double dot = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) dot += static_cast<double>(plane[i]) * v[i];
  return dot;
}

std::uint32_t SeedIndex::Signature(std::size_t table, std::span<const float> v) const {
  std::uint32_t key = 0;
  for (std::size_t b = 0; b < params_.hashes_per_table; ++b) {
    if (Projection(table, b, v) >= 0.0) key |= std::uint32_t{1} << b;
  }
  return key;
}

namespace {

// A bucket to visit: the query's key in one table with some bits flipped.
// Bit j of `flips` selects the j-th cheapest bit of that table; `last` is the
// highest selected position.
struct ProbeSet {
  double cost = 0.0;
  std::uint32_t table = 0;
  std::uint32_t flips = 0;
  int last = -1;
  bool operator>(const ProbeSet& o) const { return cost > o.cost; }
};

}  // namespace

std::vector<std::size_t> SeedIndex::Candidates(std::span<const float> query) const {
  const std::size_t n = corpus_.size();
  const std::size_t bits = params_.hashes_per_table;
  const std::size_t tables = tables_.size();

  // Flipping bit b costs the squared distance of the query to hyperplane b,
  // so buckets across the nearest hyperplanes come first.
  std::vector<std::uint32_t> keys(tables, 0);
  std::vector<std::vector<std::uint8_t>> order(tables);
  std::vector<std::vector<double>> cost(tables, std::vector<double>(bits));
  for (std::size_t t = 0; t < tables; ++t) {
    for (std::size_t b = 0; b < bits; ++b) {
      const double z = Projection(t, b, query);
      if (z >= 0.0) keys[t] |= std::uint32_t{1} << b;
      cost[t][b] = z * z;
      order[t].push_back(static_cast<std::uint8_t>(b));
    }
    std::stable_sort(order[t].begin(), order[t].end(),
                     [&](std::uint8_t a, std::uint8_t b) { return cost[t][a] < cost[t][b]; });
  }

  // Bucket masks indexed by cost rank, per table.
  std::vector<std::uint32_t> rank_mask(tables * bits);
  for (std::size_t t = 0; t < tables; ++t) {
    for (std::size_t j = 0; j < bits; ++j) rank_mask[t * bits + j] = std::uint32_t{1} << order[t][j];
  }

  std::vector<char> seen(n, 0);
  std::vector<std::size_t> out;
  auto visit = [&](const ProbeSet& p) {
    std::uint32_t bucket = keys[p.table];
    for (std::uint32_t f = p.flips; f != 0; f &= f - 1) {
      bucket ^= rank_mask[p.table * bits + static_cast<std::size_t>(std::countr_zero(f))];
    }
    const Table& table = tables_[p.table];
    for (std::uint32_t j = table.offsets[bucket]; j < table.offsets[bucket + 1]; ++j) {
      const std::uint32_t id = table.ids[j];
      if (!seen[id]) {
        seen[id] = 1;
        out.push_back(id);
      }
    }
  };

  // Perturbation sets in ascending cost via shift/expand on a min-heap; every
  // subset of a table's bits is generated exactly once.
  std::vector<ProbeSet> storage;
  storage.reserve(2 * tables * params_.probes_per_table + 2 * tables);
  std::priority_queue<ProbeSet, std::vector<ProbeSet>, std::greater<>> heap(std::greater<>{},
                                                                             std::move(storage));
  for (std::size_t t = 0; t < tables; ++t) {
    const auto table = static_cast<std::uint32_t>(t);
    heap.push(ProbeSet{0.0, table, 0, -1});
    if (bits > 0) heap.push(ProbeSet{cost[t][order[t][0]], table, 1, 0});
  }
  const std::size_t budget = tables * params_.probes_per_table;
  const std::size_t wanted = std::min(n, params_.min_candidates);
  std::size_t probes = 0;
  while (!heap.empty() && (probes < budget || out.size() < wanted)) {
    const ProbeSet p = heap.top();
    heap.pop();
    visit(p);
    ++probes;
    if (p.last < 0 || static_cast<std::size_t>(p.last) + 1 >= bits) continue;
    const auto& c = cost[p.table];
    const auto& ord = order[p.table];
    const int next = p.last + 1;
    const double step = c[ord[static_cast<std::size_t>(next)]];
    heap.push(ProbeSet{p.cost + step, p.table, p.flips | (std::uint32_t{1} << next), next});
    heap.push(ProbeSet{p.cost + step - c[ord[static_cast<std::size_t>(p.last)]], p.table,
                       (p.flips & ~(std::uint32_t{1} << p.last)) | (std::uint32_t{1} << next), next});
  }
  return out;
}

std::vector<SeedMatch> SeedIndex::Rank(std::span<const float> query,
                                       const std::vector<std::size_t>& ids, std::size_t k) const {
  std::vector<SeedMatch> matches;
  matches.reserve(ids.size());
  for (std::size_t id : ids) {
    matches.push_back(SeedMatch{id, std::string(), CosineSimilarity(vector(id), query)});
  }
  const std::size_t keep = std::min(k, matches.size());
  std::partial_sort(matches.begin(), matches.begin() + static_cast<std::ptrdiff_t>(keep),
                    matches.end(), Better);
  matches.resize(keep);
  for (auto& m : matches) m.sentence = corpus_.sentences[m.entry_id];
  return matches;
}

std::vector<SeedMatch> SeedIndex::QueryVector(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::kInvalidAction, "k must be >= 1");
  if (mode_ == IndexMode::kExact) {
    std::vector<std::size_t> all(corpus_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return Rank(query, all, k);
  }
  auto candidates = Candidates(query);
  if (candidates.size() < std::min(k, corpus_.size())) {
    // Only reachable with tiny corpora; fall back to a full scan.
    candidates.resize(corpus_.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  }
  return Rank(query, candidates, k);
}

std::vector<SeedMatch> SeedIndex::Query(std::string_view suggestion, std::size_t k) const {
  const Embedding q = embedder_->Embed(suggestion);
  return QueryVector(q, k);
}

void SeedIndex::Save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["embedder"] = embedder_->id();
  header["dimension"] = dim_;
  header["mode"] = IndexModeName(mode_);
  header["num_tables"] = params_.num_tables;
  header["hashes_per_table"] = params_.hashes_per_table;
  header["seed"] = params_.seed;
  header["probes_per_table"] = params_.probes_per_table;
  header["min_candidates"] = params_.min_candidates;
  header["corpus_digest"] = corpus_.source_digest;
  header["sentences"] = corpus_.sentences;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileMissing, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  WritePod<std::uint32_t>(out, kFormatVersion);
  WritePod<std::uint64_t>(out, header_text.size());
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (float v : vectors_) WritePod<float>(out, v);
  if (!out) throw Error(ErrorCode::kFileMissing, "write failed: " + path.string());
}

SeedIndex SeedIndex::Load(const std::filesystem::path& path,
                          std::shared_ptr<const Embedder> embedder) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileMissing, path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kParseError, path.string() + " is not a seed index");
  }
  const auto version = ReadPod<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::kStaleIndex, "unsupported index version " + std::to_string(version));
  }
  const auto header_len = ReadPod<std::uint64_t>(in);
  std::string header_text(header_len, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorCode::kParseError, "truncated index header");
  }
  SeedIndex index;
  try {
    const auto header = nlohmann::json::parse(header_text);
    if (header.at("embedder").get<std::string>() != embedder->id()) {
      throw Error(ErrorCode::kStaleIndex, "index was built with " +
                                              header.at("embedder").get<std::string>());
    }
    index.dim_ = header.at("dimension").get<std::size_t>();
    index.mode_ = ParseIndexMode(header.at("mode").get<std::string>());
    index.params_.num_tables = header.at("num_tables").get<std::size_t>();
    index.params_.hashes_per_table = header.at("hashes_per_table").get<std::size_t>();
    index.params_.seed = header.at("seed").get<std::uint64_t>();
    index.params_.probes_per_table = header.at("probes_per_table").get<std::size_t>();
    index.params_.min_candidates = header.at("min_candidates").get<std::size_t>();
    index.corpus_ = SeedCorpus::FromSentences(header.at("sentences").get<std::vector<std::string>>());
    if (index.corpus_.source_digest != header.at("corpus_digest").get<std::string>()) {
      throw Error(ErrorCode::kParseError, "index header digest does not match its sentences");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("index header: ") + e.what());
  }
  if (index.params_.hashes_per_table == 0 || index.params_.hashes_per_table > kMaxHashBits ||
      index.dim_ != embedder->dimension()) {
    throw Error(ErrorCode::kParseError, "index header parameters are invalid");
  }
  index.embedder_ = std::move(embedder);
  index.vectors_.resize(index.corpus_.size() * index.dim_);
  for (auto& v : index.vectors_) v = ReadPod<float>(in);
  index.BuildTables();
  return index;
}

SeedIndex SeedIndex::LoadOrBuild(const std::filesystem::path& cache, const SeedCorpus& corpus,
                                 std::shared_ptr<const Embedder> embedder, IndexMode mode,
                                 ApproxParams params) {
  if (std::filesystem::exists(cache)) {
    try {
      SeedIndex cached = Load(cache, embedder);
      if (cached.corpus().source_digest == corpus.source_digest && cached.mode() == mode &&
          cached.params() == params) {
        return cached;
      }
    } catch (const Error&) {
      // Unreadable or stale caches are rebuilt below.
    }
  }
  SeedIndex index = Build(corpus, std::move(embedder), mode, params);
  index.Save(cache);
  return index;
}

}  // namespace narrator
