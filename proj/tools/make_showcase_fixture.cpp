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

// Builds the "Pizza Hut" showcase session: a scripted operator run whose
// published lines are the narrator lines of the recorded show and whose
// remaining candidates are mock completions, chosen so that the session
// generates exactly kTargetSentences candidate sentences. Writes the
// transcript and the completion fixtures, then verifies them by replay.
//
//   make_showcase_fixture <data-dir> <out-dir>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "narrator/engine.hpp"
#include "narrator/service.hpp"

namespace fs = std::filesystem;
using namespace narrator;

namespace {

constexpr std::size_t kTargetSentences = 455;
constexpr const char* kSessionId = "pizza-hut-show";
constexpr const char* kStart = "2026-02-14T20:00:00.000Z";
constexpr std::chrono::seconds kActionSpacing{6};

struct Gen {
  // Run index -> exact completion for runs that produced a published line.
  std::map<int, std::string> scripted;
};
struct Pub {
  std::vector<PublishItem> items;  // set ids use the pending generation
};
using Step = std::variant<TypeContext, SceneNote, SeedQuery, Gen, Pub, SkipGeneration, EndSession>;

// Publishes sentences [0, n) of one run of the latest generation.
Pub First(int run, std::size_t n) {
  Pub p;
  for (std::size_t i = 0; i < n; ++i) p.items.push_back({"r" + std::to_string(run), i});
  return p;
}

std::vector<Step> Script() {
  std::vector<Step> s;
  auto type = [&](const char* text) {
    s.push_back(TypeContext{text});
    s.push_back(Gen{});
  };
  auto skip = [&] { s.push_back(SkipGeneration{}); };
  auto publish = [&](int run, const std::string& text, std::size_t n) {
    s.push_back(Gen{{{run, text}}});
    s.push_back(First(run, n));
  };
  auto type_then_publish = [&](const char* typed, int run, const std::string& text, std::size_t n) {
    s.push_back(TypeContext{typed});
    publish(run, text, n);
  };
  auto regenerate_and_skip = [&] {
    s.push_back(Gen{});
    skip();
  };

  s.push_back(SeedQuery{"Pizza Hut", 5});
  s.push_back(SceneNote{"Suggestion taken from the audience; opening scene."});
  type("At the Pizza Hut.");
  skip();
  type("Brian and his date lost patience.");
  skip();
  for (const char* line : {"There was always a reason for them to admire each other.",
                           "Brian was an expert at making pizza.",
                           "Sally found her vocation, making pizza like Brian.",
                           "Brian started listing all the products... Baguettes, patisserie..."}) {
    type(line);
    skip();
  }
  type_then_publish("Sally asked Brian for help.", 1,
                    "The door opened and a burly man entered, followed by his wife.", 1);
  regenerate_and_skip();
  type("The husband and the wife entered the pizzeria.");
  skip();
  type_then_publish("They asked for supremes, with garlic bread.", 0, "Both women had crushes on Brian.", 1);
  regenerate_and_skip();
  type_then_publish("Sally searched for pastries.", 2, "The husband and the wife asked for vodka.", 1);
  regenerate_and_skip();
  type_then_publish("They got creme patissiere...", 0, "Brian apologized.", 1);
  regenerate_and_skip();
  type_then_publish("Sally was dreaming about becoming a master patissier.", 1,
                    "She continued to look for pastries.", 1);
  s.push_back(SceneNote{"Scene change."});
  regenerate_and_skip();
  for (const char* line : {"Brian's boss told him he would let her go.", "Sally gave her notice.",
                           "The boss refused."}) {
    type(line);
    skip();
  }
  type_then_publish("The boss was cruel.", 2,
                    "Brian asked the boss for her resignation. The boss made a mistake.", 2);
  publish(0, "Brian and Sally left the pizzeria.", 1);
  s.push_back(SceneNote{"Scene change."});
  regenerate_and_skip();
  type("Sandra pursued her dream of being a pastry chef.");
  skip();
  type_then_publish("Sandra was serving the old burly couple.", 1,
                    "The burly man was impressed. The burly man and his wife complimented Sandra.", 2);
  regenerate_and_skip();
  type_then_publish("Even though Sandra was violating safety regulations.", 0,
                    "Sandra was getting tired. Sandra's dream would soon come true.", 2);
  regenerate_and_skip();
  type("They loved it!");
  skip();
  type_then_publish("With her sweat, she impressed them.", 2, "Sandra was now a great pastry chef.", 1);
  s.push_back(SceneNote{"Scene change."});
  regenerate_and_skip();
  for (const char* line : {"The boss came to apologise to Sandra.", "Sandra said that she remembered him.",
                           "He was diminished.", "He was wondering if it was safe to do it on the floor...",
                           "She heard about Brian.", "Can you come back, he asked."}) {
    type(line);
    skip();
  }
  s.push_back(TypeContext{"The boss was apologetic."});
  s.push_back(Gen{{{0, "Sandra thanked the boss, who helped her. Brian and Sandra were both happy. Sandra was proud."},
                   {1, "The boss was really clear. The boss was jealous."}}});
  Pub finale = First(0, 3);
  for (const auto& item : First(1, 2).items) finale.items.push_back(item);
  s.push_back(finale);
  publish(1, "He agreed.", 1);
  s.push_back(SceneNote{"End of scene."});
  s.push_back(EndSession{});
  return s;
}

const std::vector<std::string>& ExpectedPublished() {
  static const std::vector<std::string> kLines = {
      "The door opened and a burly man entered, followed by his wife.",
      "Both women had crushes on Brian.",
      "The husband and the wife asked for vodka.",
      "Brian apologized.",
      "She continued to look for pastries.",
      "Brian asked the boss for her resignation.",
      "The boss made a mistake.",
      "Brian and Sally left the pizzeria.",
      "The burly man was impressed.",
      "The burly man and his wife complimented Sandra.",
      "Sandra was getting tired.",
      "Sandra's dream would soon come true.",
      "Sandra was now a great pastry chef.",
      "Sandra thanked the boss, who helped her.",
      "Brian and Sandra were both happy.",
      "Sandra was proud.",
      "The boss was really clear.",
      "The boss was jealous.",
      "He agreed.",
  };
  return kLines;
}

// Returns scripted text for the runs that were published and, for every
// other run, the first mock completion whose candidate set holds exactly
// the requested number of sentences.
class ScriptedBackend : public ModelBackend {
 public:
  ScriptedBackend(const FilterPipeline& filter, const SentenceSegmenter& segmenter, const SessionConfig& config)
      : filter_(filter), segmenter_(segmenter), config_(config) {}

  void Plan(std::map<int, std::string> scripted, std::map<int, std::size_t> filler_targets) {
    scripted_ = std::move(scripted);
    targets_ = std::move(filler_targets);
  }

  CompletionResponse Complete(const CompletionRequest& request) override {
    CompletionResponse response;
    if (auto it = scripted_.find(request.run_index); it != scripted_.end()) {
      response.text = it->second;
      response.backend_id = "show-transcript";
      return response;
    }
    const std::size_t target = targets_.at(request.run_index);
    for (std::uint64_t seed = 0; seed < 1'000'000; ++seed) {
      std::string text = SanitizeCompletion(MockComplete(request.prompt, seed, request.run_index), request.max_chars);
      const CandidateSet probe = BuildCandidateSet(text, request.run_index, "probe", config_.generation.budget_chars,
                                                   filter_, config_.filter, segmenter_);
      if (probe.sentences.size() == target) {
        response.text = std::move(text);
        response.backend_id = "mock";
        return response;
      }
    }
    throw std::runtime_error("no mock completion with " + std::to_string(target) + " sentences");
  }
  std::string id() const override { return "showcase"; }

 private:
  const FilterPipeline& filter_;
  const SentenceSegmenter& segmenter_;
  const SessionConfig& config_;
  std::map<int, std::string> scripted_;
  std::map<int, std::size_t> targets_;
};

void Check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("check failed: " + what);
}

int Run(const fs::path& data_dir, const fs::path& out_dir) {
  ServiceConfig config;
  config.blocklist = data_dir / "blocklist.txt";
  config.lexicon_dir = data_dir / "lexicons";
  config.abbreviations = data_dir / "abbreviations.txt";
  config.seed_corpus = data_dir / "seed_corpus.txt";
  config.session.filter = FilterPolicy::Default();
  config.session.filter.blocklist_path = "blocklist.txt";
  config.session.generation.backend_id = "replay";
  Runtime rt = BuildRuntime(config);

  const auto script = Script();
  const int k = config.session.generation.runs_k;
  std::size_t filler_runs_left = 0;
  std::size_t scripted_sentences = 0;
  for (const auto& step : script) {
    if (const auto* g = std::get_if<Gen>(&step)) {
      filler_runs_left += static_cast<std::size_t>(k) - g->scripted.size();
      for (const auto& [_, text] : g->scripted) scripted_sentences += rt.segmenter->Split(text).size();
    }
  }
  std::size_t filler_needed = kTargetSentences - scripted_sentences;

  ScriptedBackend scripted(*rt.filter, *rt.segmenter, config.session);
  auto store = std::make_shared<FixtureStore>();
  store->metadata = FixtureMetadata{"Pizza Hut", "2026-02-14", "show transcript + mock filler"};
  ManualClock clock(ParseRfc3339(kStart));
  Timestamp now = ParseRfc3339(kStart);
  auto recording = std::make_shared<RecordingBackend>(
      std::shared_ptr<ModelBackend>(&scripted, [](ModelBackend*) {}), store, [&] { return FormatRfc3339(now); });
  Services services{*recording, *rt.filter, clock, *rt.segmenter, rt.seed_index.get()};

  ActionResult state = CreateSession(config.session, clock, std::string(kSessionId));
  std::vector<SessionEvent> log = state.events;
  std::string generation_prefix;

  for (const auto& step : script) {
    now += kActionSpacing;
    clock.Set(now);
    OperatorAction action;
    if (const auto* g = std::get_if<Gen>(&step)) {
      std::map<int, std::size_t> targets;
      for (int run = 0; run < k; ++run) {
        if (g->scripted.count(run)) continue;
        const std::size_t t = (filler_needed + filler_runs_left - 1) / filler_runs_left;
        targets[run] = t;
        filler_needed -= t;
        --filler_runs_left;
      }
      scripted.Plan(g->scripted, targets);
      action = RequestGeneration{};
      generation_prefix = "g" + std::to_string(state.session.generation_counter + 1) + "-";
    } else if (const auto* p = std::get_if<Pub>(&step)) {
      SelectAndPublish publish;
      for (const auto& item : p->items) publish.items.push_back({generation_prefix + item.set_id, item.index});
      action = publish;
    } else {
      std::visit(
          [&](const auto& a) {
            if constexpr (!std::is_same_v<std::decay_t<decltype(a)>, Gen> &&
                          !std::is_same_v<std::decay_t<decltype(a)>, Pub>) {
              action = a;
            }
          },
          step);
    }
    ActionResult next = ApplyAction(state.session, action, services);
    log.insert(log.end(), next.events.begin(), next.events.end());
    state.session = std::move(next.session);
  }

  const auto published = PublishedLines(state.session);
  Check(published == ExpectedPublished(), "published lines match the show");
  Check(GeneratedSentenceCount(log) == kTargetSentences, "generated sentence count");

  fs::create_directories(out_dir);
  const fs::path transcript = out_dir / "transcript.jsonl";
  const fs::path fixtures = out_dir / "completions.jsonl";
  {
    std::ofstream out(transcript, std::ios::binary | std::ios::trunc);
    out << SerializeTranscript(log);
  }
  store->Save(fixtures);

  // Round trip through the files exactly as the replay command does.
  std::ifstream in(transcript, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  ReplayBackend replay(FixtureStore::Load(fixtures));
  const auto replayed = Replay(ParseTranscript(text.str()), replay, *rt.filter, *rt.segmenter, rt.seed_index.get());
  Check(SerializeTranscript(replayed.events) == text.str(), "replay reproduces the transcript");

  std::cout << "events " << log.size() << ", generations " << state.session.generation_counter
            << ", fixtures " << store->size() << ", generated sentences " << GeneratedSentenceCount(log)
            << ", published lines " << published.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: make_showcase_fixture <data-dir> <out-dir>\n";
    return 2;
  }
  try {
    return Run(argv[1], argv[2]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
