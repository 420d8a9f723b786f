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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pathoicl/evaluation.hpp"
#include "pathoicl/fold_planner.hpp"
#include "pathoicl/llm_client.hpp"
#include "pathoicl/render.hpp"

namespace pathoicl {

struct ExperimentConfig {
  std::filesystem::path manifest_path;
  std::vector<int> shots{1, 3, 5};
  std::vector<VariantAxes> variants = standard_variants();
  int repeats = 3;
  std::uint64_t seed = 0;
  EndpointConfig endpoint;
  /// Serve requests from an in-process mock instead of the network.
  bool offline = false;
  std::string mock_policy = "label-leak";
  std::filesystem::path output_dir = "runs/latest";
  /// Defaults to <output_dir>/cache.
  std::optional<std::filesystem::path> cache_dir;
  StftConfig stft;
  RenderConfig render;
  PlannerOptions planner;
  /// Directory of template overrides; built-in wording otherwise.
  std::optional<std::filesystem::path> templates_dir;

  /// Unknown keys throw ConfigError. Relative paths are resolved against
  /// base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  /// Throws ConfigError.
  void validate() const;

  std::filesystem::path effective_cache_dir() const;
  PromptTemplates templates() const;
};

/// Digest of the settings that can change a score: data, planning,
/// prompts, model and rendering. Transport knobs and paths are left out.
std::string config_fingerprint(const ExperimentConfig& cfg);
std::string cell_fingerprint(std::string_view config_fingerprint, const PromptVariant& variant);

/// One model query per row.
struct LedgerRow {
  std::string run_id;
  std::string fold;
  std::string utterance_id;
  VariantAxes axes;
  int k = 0;
  int repeat = 0;
  std::optional<double> score;
  /// Hash of the exchange the score came from (the re-prompt when there was one).
  std::string cache_hash;
  /// Hash of the first exchange when a re-prompt followed, else empty.
  std::string reprompt_of;
  bool excluded = false;
  std::string exclusion_reason;

  friend bool operator==(const LedgerRow&, const LedgerRow&) = default;
};

std::string format_ledger(std::span<const LedgerRow> rows);
std::vector<LedgerRow> parse_ledger(std::string_view tsv);

/// Per-cell summaries from ledger rows: variants in the given order, shot
/// counts ascending.
std::vector<ExperimentSummary> aggregate_ledger(std::span<const LedgerRow> rows, const Corpus& corpus,
                                                std::string_view config_fingerprint,
                                                std::span<const VariantAxes> variant_order, std::uint64_t seed,
                                                std::vector<SpeakerResultRow>* speakers = nullptr);

struct RunOutcome {
  std::filesystem::path run_dir;
  std::string fingerprint;
  std::vector<LedgerRow> ledger;
  std::vector<ExperimentSummary> cells;
  std::vector<SpeakerResultRow> speaker_results;
  Report report;
  std::size_t network_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t artifacts_created = 0;
};

/// Runs the whole matrix and writes config.json, fold-plans/, artifacts/,
/// ledger.tsv, speaker-results.tsv, report.txt and report.tsv under output_dir. Responses go to
/// the cache as they arrive, so an interrupted run resumes where it
/// stopped. A backend passed in replaces the configured one.
RunOutcome run_experiment(const ExperimentConfig& cfg, std::shared_ptr<ChatBackend> backend = nullptr);

struct DryRunEstimate {
  std::size_t requests = 0;
  std::size_t cached = 0;
  std::size_t attachments = 0;
  std::uint64_t attachment_bytes = 0;
};

/// Plans and renders locally and counts what a run would send. No backend
/// is contacted.
DryRunEstimate dry_run(const ExperimentConfig& cfg);

/// Rebuilds the report of a finished run from its config.json and
/// ledger.tsv.
Report report_from_run_dir(const std::filesystem::path& run_dir);

std::string fold_plan_dir_name(int k, int repeat);
std::uint64_t repeat_seed(std::uint64_t seed, int repeat);

}  // namespace pathoicl
