// Copyright 2026 The pathoicl Authors
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

#include "pathoicl/fold_planner.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pathoicl/error.hpp"
#include "pathoicl/rng.hpp"

namespace pathoicl {
namespace {

using WordKey = std::pair<Category, std::string>;

// Lower is better. Each level loosens one more constraint.
enum Quality : int {
  kExact = 0,
  kSameGenderSameCategory = 1,
  kSameWordOtherGender = 2,
  kSameCategoryOnly = 3,
  kIncompatible = 4,
};

struct SpeakerPool {
  const SpeakerRecord* speaker = nullptr;
  std::vector<const UtteranceRecord*> utterances;
};

class FoldBuilder {
 public:
  FoldBuilder(const Corpus& corpus, std::string_view test_speaker, int k, std::uint64_t seed,
              const PlannerOptions& options)
      : corpus_(corpus),
        test_speaker_(test_speaker),
        k_(k),
        seed_(seed),
        options_(options),
        rng_(splitmix64(seed ^ fnv1a64(test_speaker))) {}

  FoldPlan build() {
    if (k_ < 1) fail(ErrorCode::kInvalidArgument, "k must be >= 1");
    const auto& test = corpus_.speaker(test_speaker_);
    FoldPlan plan;
    plan.test_speaker = test.speaker_id;
    plan.k = k_;
    plan.seed = seed_;
    plan.test_utterances = draw_tests();
    select_references(plan);
    return plan;
  }

 private:
  std::vector<UtteranceRecord> draw_tests() {
    const auto own = corpus_.utterances_of(test_speaker_);
    std::vector<UtteranceRecord> tests;
    for (const auto category : kAllCategories) {
      std::vector<const UtteranceRecord*> pool;
      for (const auto* u : own) {
        if (u->category == category) pool.push_back(u);
      }
      if (pool.size() < static_cast<std::size_t>(kTestsPerCategory)) {
        fail(ErrorCode::kInsufficientTestMaterial,
             fmt::format("speaker '{}' has {} {} utterances, {} required", test_speaker_,
                         pool.size(), to_string(category), kTestsPerCategory));
      }
      // Partial Fisher-Yates: the first draws are uniform without replacement.
      for (int i = 0; i < kTestsPerCategory; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng_.below(pool.size() - static_cast<std::size_t>(i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
        tests.push_back(*pool[static_cast<std::size_t>(i)]);
      }
    }
    return tests;
  }

  std::vector<SpeakerPool> eligible(Cohort cohort) {
    std::vector<SpeakerPool> pools;
    for (const auto& s : corpus_.speakers()) {
      if (s.cohort != cohort || s.speaker_id == test_speaker_) continue;
      auto utts = corpus_.utterances_of(s.speaker_id);
      if (utts.empty()) continue;
      pools.push_back({&s, std::move(utts)});
    }
    rng_.shuffle(std::span(pools));
    return pools;
  }

  bool unused(const UtteranceRecord* u) const { return !used_.contains(u->utterance_id); }

  std::vector<WordKey> shared_words(const SpeakerPool& a, const SpeakerPool& b) const {
    std::set<WordKey> mine;
    for (const auto* u : a.utterances) {
      if (unused(u)) mine.emplace(u->category, u->word_id);
    }
    std::set<WordKey> both;
    for (const auto* u : b.utterances) {
      if (unused(u) && mine.contains({u->category, u->word_id})) both.emplace(u->category, u->word_id);
    }
    return {both.begin(), both.end()};
  }

  std::vector<Category> shared_categories(const SpeakerPool& a, const SpeakerPool& b) const {
    std::set<Category> mine;
    for (const auto* u : a.utterances) {
      if (unused(u)) mine.insert(u->category);
    }
    std::set<Category> both;
    for (const auto* u : b.utterances) {
      if (unused(u) && mine.contains(u->category)) both.insert(u->category);
    }
    return {both.begin(), both.end()};
  }

  int quality(const SpeakerPool& c, const SpeakerPool& p) const {
    const bool same_gender = c.speaker->gender == p.speaker->gender;
    const bool word = !shared_words(c, p).empty();
    if (same_gender && word) return kExact;
    const bool category = word || !shared_categories(c, p).empty();
    if (same_gender && category) return kSameGenderSameCategory;
    if (word) return kSameWordOtherGender;
    if (category) return kSameCategoryOnly;
    return kIncompatible;
  }

  // Kuhn's augmenting-path matching over edges with quality <= max_quality.
  bool augment(std::size_t left, int max_quality, const std::vector<std::vector<std::size_t>>& adjacency,
               const std::vector<std::vector<int>>& edge_quality, std::vector<int>& match_right,
               std::vector<int>& match_left, std::vector<char>& visited) {
    for (const auto right : adjacency[left]) {
      if (edge_quality[left][right] > max_quality || visited[right]) continue;
      visited[right] = 1;
      if (match_right[right] < 0 ||
          augment(static_cast<std::size_t>(match_right[right]), max_quality, adjacency, edge_quality,
                  match_right, match_left, visited)) {
        match_right[right] = static_cast<int>(left);
        match_left[left] = static_cast<int>(right);
        return true;
      }
    }
    return false;
  }

  const UtteranceRecord* pick(const SpeakerPool& pool, Category category, const std::string* word) {
    std::vector<const UtteranceRecord*> candidates;
    for (const auto* u : pool.utterances) {
      if (unused(u) && u->category == category && (word == nullptr || u->word_id == *word)) {
        candidates.push_back(u);
      }
    }
    return candidates[static_cast<std::size_t>(rng_.below(candidates.size()))];
  }

  // One matching round; returns number of pairs added.
  int match_round(std::vector<SpeakerPool>& controls, std::vector<SpeakerPool>& patients, int need,
                  bool reuse, FoldPlan& plan, std::vector<ReferenceSample>& control_refs,
                  std::vector<ReferenceSample>& patient_refs) {
    const auto n_left = controls.size();
    const auto n_right = patients.size();
    std::vector<std::vector<int>> edge_quality(n_left, std::vector<int>(n_right, kIncompatible));
    std::vector<std::vector<std::size_t>> adjacency(n_left);
    for (std::size_t i = 0; i < n_left; ++i) {
      for (std::size_t j = 0; j < n_right; ++j) {
        edge_quality[i][j] = quality(controls[i], patients[j]);
        if (edge_quality[i][j] < kIncompatible) adjacency[i].push_back(j);
      }
      // Patients were shuffled already; a stable sort keeps that order within
      // each quality level so better edges are tried first.
      std::stable_sort(adjacency[i].begin(), adjacency[i].end(), [&](std::size_t a, std::size_t b) {
        return edge_quality[i][a] < edge_quality[i][b];
      });
    }

    std::vector<int> match_right(n_right, -1);
    std::vector<int> match_left(n_left, -1);
    int size = 0;
    for (int level = kExact; level < kIncompatible && size < need; ++level) {
      for (std::size_t i = 0; i < n_left && size < need; ++i) {
        if (match_left[i] >= 0) continue;
        std::vector<char> visited(n_right, 0);
        if (augment(i, level, adjacency, edge_quality, match_right, match_left, visited)) ++size;
      }
    }

    for (std::size_t i = 0; i < n_left; ++i) {
      if (match_left[i] < 0) continue;
      const auto& c = controls[i];
      const auto& p = patients[static_cast<std::size_t>(match_left[i])];
      const int q = edge_quality[i][static_cast<std::size_t>(match_left[i])];
      const int pair = static_cast<int>(control_refs.size());
      const UtteranceRecord* cu = nullptr;
      const UtteranceRecord* pu = nullptr;
      if (q == kExact || q == kSameWordOtherGender) {
        const auto words = shared_words(c, p);
        const auto& key = words[static_cast<std::size_t>(rng_.below(words.size()))];
        cu = pick(c, key.first, &key.second);
        pu = pick(p, key.first, &key.second);
      } else {
        const auto cats = shared_categories(c, p);
        const auto category = cats[static_cast<std::size_t>(rng_.below(cats.size()))];
        cu = pick(c, category, nullptr);
        pu = pick(p, category, nullptr);
      }
      used_.insert(cu->utterance_id);
      used_.insert(pu->utterance_id);
      control_refs.push_back({*cu, Cohort::kControl, c.speaker->gender, pair});
      patient_refs.push_back({*pu, Cohort::kPathological, p.speaker->gender, pair});
      if (q == kSameGenderSameCategory || q == kSameCategoryOnly) {
        plan.relaxations.push_back({pair, Relaxation::kWordToCategory});
      }
      if (q == kSameWordOtherGender || q == kSameCategoryOnly) {
        plan.relaxations.push_back({pair, Relaxation::kGender});
      }
      if (reuse) plan.relaxations.push_back({pair, Relaxation::kSpeakerReuse});
    }
    return size;
  }

  void select_references(FoldPlan& plan) {
    auto controls = eligible(Cohort::kControl);
    auto patients = eligible(Cohort::kPathological);
    for (const auto& [cohort, pools] : {std::pair{Cohort::kControl, &controls},
                                        std::pair{Cohort::kPathological, &patients}}) {
      if (pools->empty()) {
        fail(ErrorCode::kInfeasibleBalance,
             fmt::format("fold '{}': no {} speaker other than the test speaker is available",
                         test_speaker_, to_string(cohort)));
      }
      if (pools->size() < static_cast<std::size_t>(k_) && !options_.allow_speaker_reuse) {
        fail(ErrorCode::kInfeasibleBalance,
             fmt::format("fold '{}': k={} needs {} distinct {} reference speakers, only {} eligible",
                         test_speaker_, k_, k_, to_string(cohort), pools->size()));
      }
    }

    std::vector<ReferenceSample> control_refs;
    std::vector<ReferenceSample> patient_refs;
    int have = 0;
    for (int round = 0; have < k_; ++round) {
      const int added = match_round(controls, patients, k_ - have, round > 0, plan, control_refs,
                                    patient_refs);
      have += added;
      if (have >= k_) break;
      if (added == 0 || !options_.allow_speaker_reuse) {
        fail(ErrorCode::kInfeasibleBalance,
             fmt::format("fold '{}': only {} of {} reference pairs share a word category under "
                         "all relaxations",
                         test_speaker_, have, k_));
      }
    }
    plan.references = std::move(control_refs);
    plan.references.insert(plan.references.end(), patient_refs.begin(), patient_refs.end());
  }

  const Corpus& corpus_;
  std::string test_speaker_;
  int k_;
  std::uint64_t seed_;
  PlannerOptions options_;
  DeterministicRng rng_;
  std::set<std::string> used_;
};

}  // namespace

std::string_view to_string(Relaxation relaxation) noexcept {
  switch (relaxation) {
    case Relaxation::kWordToCategory: return "word_to_category";
    case Relaxation::kGender: return "gender";
    case Relaxation::kSpeakerReuse: return "speaker_reuse";
  }
  return "?";
}

std::vector<const ReferenceSample*> FoldPlan::references_of(Cohort cohort) const {
  std::vector<const ReferenceSample*> out;
  for (const auto& r : references) {
    if (r.cohort == cohort) out.push_back(&r);
  }
  return out;
}

FoldPlan build_fold(const Corpus& corpus, std::string_view test_speaker, int k, std::uint64_t seed,
                    const PlannerOptions& options) {
  return FoldBuilder(corpus, test_speaker, k, seed, options).build();
}

std::vector<FoldPlan> plan_experiment(const Corpus& corpus, int k, std::uint64_t seed,
                                      const PlannerOptions& options) {
  std::vector<FoldPlan> plans;
  plans.reserve(corpus.speakers().size());
  for (const auto& s : corpus.speakers()) {
    try {
      plans.push_back(build_fold(corpus, s.speaker_id, k, seed, options));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("test speaker '{}' (k={}, seed={}): {}", s.speaker_id, k,
                                        seed, e.what()));
    }
  }
  return plans;
}

nlohmann::json to_json(const FoldPlan& plan) {
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& r : plan.references) {
    refs.push_back({{"pair", r.pair_index},
                    {"cohort", to_string(r.cohort)},
                    {"gender", to_string(r.gender)},
                    {"speaker_id", r.utterance.speaker_id},
                    {"utterance_id", r.utterance.utterance_id},
                    {"category", to_string(r.utterance.category)},
                    {"word_id", r.utterance.word_id}});
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& u : plan.test_utterances) {
    tests.push_back({{"utterance_id", u.utterance_id},
                     {"category", to_string(u.category)},
                     {"word_id", u.word_id}});
  }
  nlohmann::json relaxations = nlohmann::json::array();
  for (const auto& r : plan.relaxations) {
    relaxations.push_back({{"pair", r.pair_index}, {"relaxation", to_string(r.relaxation)}});
  }
  return {{"test_speaker", plan.test_speaker},
          {"k", plan.k},
          {"seed", plan.seed},
          {"references", std::move(refs)},
          {"test_utterances", std::move(tests)},
          {"relaxations", std::move(relaxations)}};
}

std::string serialize_fold(const FoldPlan& plan) { return to_json(plan).dump(2) + "\n"; }

}  // namespace pathoicl
