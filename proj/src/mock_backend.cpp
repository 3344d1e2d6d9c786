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

#include <chrono>
#include <string>
#include <vector>

#include "narrator/backend.hpp"
#include "narrator/digest.hpp"
#include "narrator/error.hpp"
#include "narrator/utf8.hpp"

namespace narrator {
namespace {

// Short narrator-voice sentences. Every sentence starts with a capital and
// ends in a terminator, and none contains an abbreviation, so mock output
// segments unambiguously.
constexpr const char* kCorpus[] = {
    "The lights dimmed.",
    "She opened the door.",
    "He looked at the old map.",
    "The baker laughed.",
    "Nobody noticed the cat.",
    "The old man told a story.",
    "They walked home.",
    "A stranger asked for directions.",
    "The kitchen smelled of bread.",
    "She promised to return.",
    "He dropped the tray.",
    "The manager counted the money.",
    "Rain began to fall.",
    "The children ran outside.",
    "She wrote a letter.",
    "He was afraid of the dark.",
    "The waiter brought tea.",
    "Everyone cheered.",
    "The door closed.",
    "She smiled.",
    "He found a key.",
    "The dog barked.",
    "They decided to leave.",
    "The phone rang.",
    "She remembered the summer.",
    "He sold his bicycle.",
    "The town was quiet.",
    "Her brother arrived.",
    "The chef frowned.",
    "A bird landed on the fence.",
    "They argued about the price.",
    "The train was late.",
    "She understood.",
    "He kept the secret.",
    "The shop opened early.",
    "Was the window open?",
    "What a day it was!",
    "Nobody knew where the money went.",
    "The neighbours watched.",
    "He promised to fix the clock.",
    "She sat down.",
    "Nobody moved.",
    "He sighed.",
    "The music stopped.",
};

struct Chain {
  std::vector<std::string> words;
  std::vector<std::size_t> starters;
  std::vector<std::vector<std::size_t>> next;  // successors per word id, with multiplicity
};

bool EndsSentence(const std::string& w) {
  const char c = w.back();
  return c == '.' || c == '!' || c == '?';
}

const Chain& GetChain() {
  static const Chain chain = [] {
    Chain c;
    auto id_of = [&c](const std::string& w) {
      for (std::size_t i = 0; i < c.words.size(); ++i) {
        if (c.words[i] == w) return i;
      }
      c.words.push_back(w);
      c.next.emplace_back();
      return c.words.size() - 1;
    };
    for (const char* sentence : kCorpus) {
      std::string text(sentence);
      std::vector<std::size_t> ids;
      std::size_t pos = 0;
      while (pos < text.size()) {
        std::size_t end = text.find(' ', pos);
        if (end == std::string::npos) end = text.size();
        ids.push_back(id_of(text.substr(pos, end - pos)));
        pos = end + 1;
      }
      c.starters.push_back(ids.front());
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) c.next[ids[i]].push_back(ids[i + 1]);
    }
    return c;
  }();
  return chain;
}

std::string Sentence(const Chain& chain, SplitMix64& rng) {
  std::string out;
  std::size_t word = chain.starters[rng.Below(chain.starters.size())];
  for (int count = 0;; ++count) {
    if (!out.empty()) out.push_back(' ');
    out += chain.words[word];
    if (EndsSentence(chain.words[word])) break;
    const auto& succ = chain.next[word];
    if (succ.empty() || count >= 14) {
      out.push_back('.');
      break;
    }
    word = succ[rng.Below(succ.size())];
  }
  return out;
}

std::string Fragment(const Chain& chain, SplitMix64& rng) {
  std::string out;
  std::size_t word = chain.starters[rng.Below(chain.starters.size())];
  const std::size_t length = 1 + rng.Below(4);
  for (std::size_t i = 0; i < length; ++i) {
    std::string w = chain.words[word];
    const bool terminal = EndsSentence(w);
    while (!w.empty() && !utf8::IsWordChar(static_cast<unsigned char>(w.back()))) w.pop_back();
    if (!out.empty()) out.push_back(' ');
    out += w;
    if (terminal || chain.next[word].empty()) break;
    const auto& succ = chain.next[word];
    word = succ[rng.Below(succ.size())];
  }
  return out;
}

}  // namespace

std::string MockComplete(std::string_view prompt, std::uint64_t seed, int run_index) {
  const Chain& chain = GetChain();
  std::uint64_t state = Fnv1a64(prompt);
  state = Mix64(state ^ Mix64(seed));
  state = Mix64(state ^ Mix64(0x72756eULL + static_cast<std::uint64_t>(run_index)));
  SplitMix64 rng(state);

  const std::size_t target = 40 + rng.Below(160);
  std::string out;
  while (out.size() < target) {
    if (!out.empty()) out.push_back(' ');
    out += Sentence(chain, rng);
  }
  if (rng.Unit() < 0.3) {
    out.push_back(' ');
    out += Fragment(chain, rng);
  }
  return out;
}

CompletionResponse MockBackend::Complete(const CompletionRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  CompletionResponse response;
  response.text = SanitizeCompletion(
      MockComplete(request.prompt, request.sampling_seed.value_or(0), request.run_index),
      request.max_chars);
  response.backend_id = id();
  response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  return response;
}

}  // namespace narrator
