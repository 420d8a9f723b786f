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

#include <doctest.h>

#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pathoicl/error.hpp"
#include "pathoicl/fold_planner.hpp"

using namespace pathoicl;

namespace {

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("30-speaker folds satisfy every balance invariant") {
  const auto corpus = testing::synthetic_corpus(testing::thirty_speaker_spec());
  std::size_t folds = 0;
  for (const int k : {1, 3, 5}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const auto plans = plan_experiment(corpus, k, seed);
      REQUIRE(plans.size() == 30);
      for (const auto& plan : plans) {
        const auto violations = testing::fold_violations(corpus, plan);
        for (const auto& v : violations) INFO(v);
        CHECK(violations.empty());
        CHECK(plan.relaxations.empty());
        CHECK(plan.test_utterances.size() == 10);
        ++folds;
      }
    }
  }
  CHECK(folds == 3 * 8 * 30);
}

TEST_CASE("two test utterances per category, distinct, from the test speaker") {
  const auto corpus = testing::synthetic_corpus(testing::thirty_speaker_spec());
  const auto plan = build_fold(corpus, "CM03", 3, 5);
  std::map<Category, int> per_category;
  std::set<std::string> ids;
  for (const auto& u : plan.test_utterances) {
    ++per_category[u.category];
    ids.insert(u.utterance_id);
    CHECK(u.speaker_id == "CM03");
  }
  CHECK(ids.size() == 10);
  for (const auto c : kAllCategories) CHECK(per_category[c] == 2);
}

TEST_CASE("plans are deterministic in the seed and vary with it") {
  const auto corpus = testing::synthetic_corpus(testing::thirty_speaker_spec());
  CHECK(build_fold(corpus, "F02", 5, 9) == build_fold(corpus, "F02", 5, 9));
  int differing = 0;
  const auto base = build_fold(corpus, "F02", 5, 0);
  for (std::uint64_t seed = 1; seed <= 16; ++seed) {
    if (!(build_fold(corpus, "F02", 5, seed) == base)) ++differing;
  }
  CHECK(differing >= 15);
  CHECK(serialize_fold(base) == serialize_fold(build_fold(corpus, "F02", 5, 0)));
}

TEST_CASE("references never repeat an utterance") {
  const auto corpus = testing::synthetic_corpus(testing::ten_speaker_spec());
  for (const auto& s : corpus.speakers()) {
    const auto plan = build_fold(corpus, s.speaker_id, 5, 1, PlannerOptions{true});
    std::set<std::string> seen;
    for (const auto& r : plan.references) CHECK(seen.insert(r.utterance.utterance_id).second);
  }
}

TEST_CASE("too few speakers per cohort is infeasible unless reuse is allowed") {
  const auto corpus = testing::synthetic_corpus(testing::ten_speaker_spec());
  // a control test speaker leaves three other controls
  CHECK(error_of([&] { build_fold(corpus, "CF01", 5, 0); }) == ErrorCode::kInfeasibleBalance);
  CHECK(error_of([&] { plan_experiment(corpus, 5, 0); }) == ErrorCode::kInfeasibleBalance);
  const auto plan = build_fold(corpus, "CF01", 5, 0, PlannerOptions{true});
  CHECK(plan.references.size() == 10);
  bool reuse = false;
  for (const auto& r : plan.relaxations) reuse |= r.relaxation == Relaxation::kSpeakerReuse;
  CHECK(reuse);
  const auto j = to_json(plan);
  CHECK(j.at("relaxations").size() == plan.relaxations.size());
}

TEST_CASE("mismatched vocabularies fall back to category matches and record it") {
  std::vector<SpeakerRecord> speakers{{"CF01", Cohort::kControl, Gender::kFemale},
                                      {"CF02", Cohort::kControl, Gender::kFemale},
                                      {"F01", Cohort::kPathological, Gender::kFemale},
                                      {"M01", Cohort::kPathological, Gender::kMale}};
  std::vector<UtteranceRecord> utterances;
  for (const auto& s : speakers) {
    for (const auto c : kAllCategories) {
      for (int w = 0; w < 2; ++w) {
        // each speaker has private words
        const auto word = fmt::format("{}_{}{}", s.speaker_id, to_string(c), w);
        utterances.push_back({word, s.speaker_id, c, word, "/x.wav", 1});
      }
    }
  }
  const auto corpus = Corpus::from_records(speakers, utterances);
  const auto plan = build_fold(corpus, "CF02", 1, 0);
  REQUIRE(plan.references.size() == 2);
  CHECK(plan.references[0].utterance.category == plan.references[1].utterance.category);
  bool relaxed = false;
  for (const auto& r : plan.relaxations) relaxed |= r.relaxation == Relaxation::kWordToCategory;
  CHECK(relaxed);
  // the same-gender patient is preferred
  CHECK(plan.references[1].utterance.speaker_id == "F01");
}

TEST_CASE("gender is relaxed only when no same-gender partner exists") {
  std::vector<SpeakerRecord> speakers{{"CF01", Cohort::kControl, Gender::kFemale},
                                      {"CM01", Cohort::kControl, Gender::kMale},
                                      {"M01", Cohort::kPathological, Gender::kMale}};
  std::vector<UtteranceRecord> utterances;
  for (const auto& s : speakers) {
    for (const auto c : kAllCategories) {
      for (int w = 0; w < 2; ++w) {
        const auto word = fmt::format("{}{}", to_string(c), w);
        utterances.push_back({s.speaker_id + "_" + word, s.speaker_id, c, word, "/x.wav", 1});
      }
    }
  }
  const auto corpus = Corpus::from_records(speakers, utterances);
  const auto plan = build_fold(corpus, "CM01", 1, 0);
  CHECK(plan.references[0].utterance.speaker_id == "CF01");
  CHECK(plan.references[0].utterance.word_id == plan.references[1].utterance.word_id);
  REQUIRE(plan.relaxations.size() == 1);
  CHECK(plan.relaxations[0].relaxation == Relaxation::kGender);
}

TEST_CASE("insufficient test material") {
  std::vector<SpeakerRecord> speakers{{"CF01", Cohort::kControl, Gender::kFemale},
                                      {"F01", Cohort::kPathological, Gender::kFemale}};
  std::vector<UtteranceRecord> utterances;
  for (const auto& s : speakers) {
    for (const auto c : kAllCategories) {
      const auto word = std::string(to_string(c)) + "1";
      utterances.push_back({s.speaker_id + "_" + word, s.speaker_id, c, word, "/x.wav", 1});
    }
  }
  const auto corpus = Corpus::from_records(speakers, utterances);
  CHECK(error_of([&] { build_fold(corpus, "CF01", 1, 0); }) == ErrorCode::kInsufficientTestMaterial);
  CHECK(error_of([&] { build_fold(corpus, "CF01", 0, 0); }) == ErrorCode::kInvalidArgument);
}
