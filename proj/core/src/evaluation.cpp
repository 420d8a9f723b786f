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

#include "pathoicl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "pathoicl/error.hpp"

namespace pathoicl {
namespace {

std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (const char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;  // count UTF-8 lead bytes
  }
  return n;
}

std::string pad_left(const std::string& s, std::size_t width) {
  const auto w = display_width(s);
  return w >= width ? s : std::string(width - w, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  const auto w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

std::string cell_id(const std::string& variant_id, int k) { return fmt::format("{}.k{}", variant_id, k); }

}  // namespace

SpeakerResult soft_vote(std::string speaker_id, Cohort true_cohort, std::span<const double> scores,
                        int n_excluded) {
  if (scores.empty()) {
    fail(ErrorCode::kEmptyPredictionSet, fmt::format("speaker '{}' has no scored utterances", speaker_id));
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (const double s : sorted) sum += s;
  SpeakerResult r;
  r.speaker_id = std::move(speaker_id);
  r.true_cohort = true_cohort;
  r.mean_score = sum / static_cast<double>(sorted.size());
  r.decision = r.mean_score >= kDecisionThreshold ? Cohort::kPathological : Cohort::kControl;
  r.n_utterances_scored = static_cast<int>(sorted.size());
  r.n_excluded = n_excluded;
  return r;
}

SpeakerResult soft_vote(std::string speaker_id, Cohort true_cohort, std::span<const Prediction> predictions,
                        int n_excluded) {
  std::vector<double> scores;
  scores.reserve(predictions.size());
  for (const auto& p : predictions) scores.push_back(p.score);
  return soft_vote(std::move(speaker_id), true_cohort, scores, n_excluded);
}

int RunSummary::excluded_utterances() const {
  int n = 0;
  for (const auto& s : per_speaker) n += s.n_excluded;
  return n;
}

RunSummary summarize_run(std::vector<SpeakerResult> per_speaker, std::vector<std::string> excluded_speakers,
                         std::string config_fingerprint, std::uint64_t seed, int repeat_index) {
  RunSummary run;
  const auto correct = std::count_if(per_speaker.begin(), per_speaker.end(),
                                     [](const SpeakerResult& s) { return s.correct(); });
  run.accuracy_percent = per_speaker.empty()
                             ? 0.0
                             : 100.0 * static_cast<double>(correct) / static_cast<double>(per_speaker.size());
  run.per_speaker = std::move(per_speaker);
  run.excluded_speakers = std::move(excluded_speakers);
  run.config_fingerprint = std::move(config_fingerprint);
  run.seed = seed;
  run.repeat_index = repeat_index;
  return run;
}

ExperimentSummary summarize_runs(std::span<const RunSummary> runs, std::string variant_id, int k) {
  if (runs.empty()) fail(ErrorCode::kInvalidArgument, "no runs to summarize");
  for (const auto& r : runs) {
    if (r.config_fingerprint != runs.front().config_fingerprint) {
      fail(ErrorCode::kMixedConfigs,
           fmt::format("runs with fingerprints {} and {} cannot be pooled", runs.front().config_fingerprint,
                       r.config_fingerprint));
    }
  }
  const double n = static_cast<double>(runs.size());
  double mean = 0.0;
  for (const auto& r : runs) mean += r.accuracy_percent;
  mean /= n;
  double var = 0.0;
  for (const auto& r : runs) var += (r.accuracy_percent - mean) * (r.accuracy_percent - mean);
  var /= n;

  ExperimentSummary s;
  s.variant_id = std::move(variant_id);
  s.k = k;
  s.cell_id = cell_id(s.variant_id, k);
  s.mean_accuracy = mean;
  s.std_accuracy = std::sqrt(var);
  s.n_repeats = static_cast<int>(runs.size());
  for (const auto& r : runs) s.exclusions += r.excluded_utterances();
  return s;
}

std::string format_cell(double mean, double std) { return fmt::format("{:.1f} ± {:.1f}", mean, std); }

Report emit_report(std::span<const ExperimentSummary> cells) {
  std::vector<std::string> rows;
  std::set<int> shots;
  std::map<std::pair<std::string, int>, const ExperimentSummary*> grid;
  for (const auto& c : cells) {
    if (std::find(rows.begin(), rows.end(), c.variant_id) == rows.end()) rows.push_back(c.variant_id);
    shots.insert(c.k);
    grid[{c.variant_id, c.k}] = &c;
  }
  const std::vector<int> columns(shots.begin(), shots.end());

  std::vector<std::string> headers;
  for (const int k : columns) headers.push_back(fmt::format("{}-shot", k));
  std::vector<std::vector<std::string>> body;
  for (const auto& row : rows) {
    std::vector<std::string> line;
    for (const int k : columns) {
      const auto it = grid.find({row, k});
      line.push_back(it == grid.end() ? "-" : format_cell(it->second->mean_accuracy, it->second->std_accuracy));
    }
    body.push_back(std::move(line));
  }

  std::size_t label_width = display_width("variant");
  for (const auto& r : rows) label_width = std::max(label_width, display_width(r));
  std::vector<std::size_t> widths;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::size_t w = display_width(headers[c]);
    for (const auto& line : body) w = std::max(w, display_width(line[c]));
    widths.push_back(w);
  }
  auto join_cells = [&](const std::vector<std::string>& cellsv) {
    std::string out;
    for (std::size_t c = 0; c < cellsv.size(); ++c) {
      if (c > 0) out += " / ";
      out += pad_left(cellsv[c], widths[c]);
    }
    return out;
  };

  Report report;
  report.table = "Speaker-level accuracy (%), mean ± std over repeats\n\n";
  report.table += pad_right("variant", label_width);
  if (!columns.empty()) report.table += "  " + join_cells(headers);
  report.table += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    report.table += pad_right(rows[r], label_width) + "  " + join_cells(body[r]) + "\n";
  }
  int total_exclusions = 0;
  for (const auto& c : cells) total_exclusions += c.exclusions;
  if (total_exclusions > 0) {
    report.table += "\nExcluded utterances (refused or unparseable after re-prompt):\n";
    for (const auto& c : cells) {
      if (c.exclusions > 0) report.table += fmt::format("  {}: {}\n", c.cell_id, c.exclusions);
    }
  }

  report.tsv = "cell_id\tvariant\tk\tmean\tstd\tn_repeats\texclusions\n";
  for (const auto& c : cells) {
    report.tsv += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", c.cell_id, c.variant_id, c.k, c.mean_accuracy,
                              c.std_accuracy, c.n_repeats, c.exclusions);
  }
  return report;
}

std::vector<ExperimentSummary> parse_report_tsv(std::string_view tsv) {
  std::vector<ExperimentSummary> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, '\t')) f.push_back(field);
    if (f.size() != 7) fail(ErrorCode::kConfigError, fmt::format("report tsv line {}: expected 7 fields", line_no));
    try {
      ExperimentSummary s;
      s.cell_id = f[0];
      s.variant_id = f[1];
      s.k = std::stoi(f[2]);
      s.mean_accuracy = std::stod(f[3]);
      s.std_accuracy = std::stod(f[4]);
      s.n_repeats = std::stoi(f[5]);
      s.exclusions = std::stoi(f[6]);
      out.push_back(std::move(s));
    } catch (const std::exception&) {
      fail(ErrorCode::kConfigError, fmt::format("report tsv line {}: bad number", line_no));
    }
  }
  return out;
}

namespace {
constexpr std::string_view kSpeakerHeader =
    "run_id\tspeaker_id\ttrue_cohort\tmean_score\tdecision\tn_scored\tn_excluded";
}  // namespace

std::string format_speaker_results(std::span<const SpeakerResultRow> rows) {
  std::string out(kSpeakerHeader);
  out += '\n';
  for (const auto& row : rows) {
    const auto& r = row.result;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", row.run_id, r.speaker_id, to_string(r.true_cohort),
                       r.mean_score, to_string(r.decision), r.n_utterances_scored, r.n_excluded);
  }
  return out;
}

std::vector<SpeakerResultRow> parse_speaker_results(std::string_view tsv) {
  std::vector<SpeakerResultRow> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kSpeakerHeader) fail(ErrorCode::kInvalidArgument, "speaker results: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, '\t')) f.push_back(field);
    auto bad = [line_no] {
      fail(ErrorCode::kInvalidArgument, fmt::format("speaker results line {}: malformed", line_no));
    };
    if (f.size() != 7) bad();
    const auto truth = parse_cohort(f[2]);
    const auto decision = parse_cohort(f[4]);
    if (!truth || !decision) bad();
    SpeakerResultRow row;
    row.run_id = f[0];
    row.result.speaker_id = f[1];
    row.result.true_cohort = *truth;
    row.result.decision = *decision;
    try {
      row.result.mean_score = std::stod(f[3]);
      row.result.n_utterances_scored = std::stoi(f[5]);
      row.result.n_excluded = std::stoi(f[6]);
    } catch (const std::exception&) {
      bad();
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace pathoicl
