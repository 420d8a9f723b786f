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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pathoicl/corpus.hpp"

namespace pathoicl {

inline constexpr int kTestsPerCategory = 2;

/// A constraint loosened because the exact balanced selection was not
/// available. Relaxations are always written into the plan.
enum class Relaxation {
  kWordToCategory,  ///< pair shares a category but not a word
  kGender,          ///< pair speakers differ in gender
  kSpeakerReuse,    ///< a speaker supplies more than one reference
};

std::string_view to_string(Relaxation relaxation) noexcept;

struct ReferenceSample {
  UtteranceRecord utterance;
  Cohort cohort = Cohort::kControl;
  Gender gender = Gender::kFemale;
  /// References with the same pair index were selected as a matched pair.
  int pair_index = 0;

  friend bool operator==(const ReferenceSample&, const ReferenceSample&) = default;
};

struct PairRelaxation {
  int pair_index = 0;
  Relaxation relaxation = Relaxation::kWordToCategory;

  friend bool operator==(const PairRelaxation&, const PairRelaxation&) = default;
};

/// One leave-one-speaker-out fold. References hold all control samples
/// (by pair index) followed by all pathological samples.
struct FoldPlan {
  std::string test_speaker;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<ReferenceSample> references;
  std::vector<UtteranceRecord> test_utterances;
  std::vector<PairRelaxation> relaxations;

  std::vector<const ReferenceSample*> references_of(Cohort cohort) const;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

struct PlannerOptions {
  /// Permit a reference speaker to contribute several samples when a cohort
  /// has fewer than k eligible speakers. Off by default.
  bool allow_speaker_reuse = false;

  friend bool operator==(const PlannerOptions&, const PlannerOptions&) = default;
};

/// Picks k matched reference pairs (one control and one pathological
/// speaker of equal gender uttering the same word) from speakers other than
/// the test speaker, plus two random test utterances per category.
/// Deterministic in (corpus, test_speaker, k, seed).
/// Throws InfeasibleBalance or InsufficientTestMaterial.
FoldPlan build_fold(const Corpus& corpus, std::string_view test_speaker, int k, std::uint64_t seed,
                    const PlannerOptions& options = {});

/// One fold per corpus speaker, ordered by speaker id.
std::vector<FoldPlan> plan_experiment(const Corpus& corpus, int k, std::uint64_t seed,
                                      const PlannerOptions& options = {});

nlohmann::json to_json(const FoldPlan& plan);
std::string serialize_fold(const FoldPlan& plan);

}  // namespace pathoicl
