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
#include <span>
#include <string>
#include <vector>

#include "pathoicl/corpus.hpp"
#include "pathoicl/response_parser.hpp"

namespace pathoicl {

/// Mean scores at or above this are decided pathological.
inline constexpr double kDecisionThreshold = 0.5;

struct SpeakerResult {
  std::string speaker_id;
  double mean_score = 0.0;
  Cohort decision = Cohort::kControl;
  Cohort true_cohort = Cohort::kControl;
  int n_utterances_scored = 0;
  int n_excluded = 0;

  bool correct() const noexcept { return decision == true_cohort; }
  friend bool operator==(const SpeakerResult&, const SpeakerResult&) = default;
};

/// Soft vote: arithmetic mean of the scores, thresholded at 0.5. Scores
/// are summed in sorted order so the result does not depend on input
/// order. Throws EmptyPredictionSet.
SpeakerResult soft_vote(std::string speaker_id, Cohort true_cohort, std::span<const double> scores,
                        int n_excluded = 0);
SpeakerResult soft_vote(std::string speaker_id, Cohort true_cohort,
                        std::span<const Prediction> predictions, int n_excluded = 0);

struct RunSummary {
  double accuracy_percent = 0.0;
  std::vector<SpeakerResult> per_speaker;
  /// Speakers without a single scored utterance; not in the accuracy.
  std::vector<std::string> excluded_speakers;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
  int repeat_index = 0;

  int excluded_utterances() const;
};

/// Accuracy = 100 * correct / scored speakers (0 when none were scored).
RunSummary summarize_run(std::vector<SpeakerResult> per_speaker, std::vector<std::string> excluded_speakers,
                         std::string config_fingerprint, std::uint64_t seed, int repeat_index);

struct ExperimentSummary {
  std::string cell_id;
  std::string variant_id;
  int k = 0;
  double mean_accuracy = 0.0;
  /// Population standard deviation over repeats.
  double std_accuracy = 0.0;
  int n_repeats = 0;
  int exclusions = 0;
};

/// Throws MixedConfigs if the runs do not share a fingerprint, and
/// InvalidArgument when empty.
ExperimentSummary summarize_runs(std::span<const RunSummary> runs, std::string variant_id, int k);

/// "mean ± std" with one decimal.
std::string format_cell(double mean, double std);

struct Report {
  /// Rows = variants (first-seen order), columns = shot counts ascending.
  std::string table;
  /// cell_id, variant, k, mean, std, n_repeats, exclusions
  std::string tsv;
};

Report emit_report(std::span<const ExperimentSummary> cells);

/// Reads the machine-readable copy produced by emit_report.
std::vector<ExperimentSummary> parse_report_tsv(std::string_view tsv);

/// Per-speaker decisions as shared with other classifiers: run_id,
/// speaker_id, true_cohort, mean_score, decision, n_scored, n_excluded.
struct SpeakerResultRow {
  std::string run_id;
  SpeakerResult result;

  friend bool operator==(const SpeakerResultRow&, const SpeakerResultRow&) = default;
};

std::string format_speaker_results(std::span<const SpeakerResultRow> rows);
std::vector<SpeakerResultRow> parse_speaker_results(std::string_view tsv);

}  // namespace pathoicl
