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
#include <string>
#include <vector>

#include "pathoicl/corpus.hpp"
#include "pathoicl/evaluation.hpp"

namespace pathoicl::testing {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::vector<double> sine(double freq_hz, std::size_t n, int rate, double amplitude = 0.5, double phase = 0.0);

struct FixtureSpec {
  int control_female = 2;
  int control_male = 2;
  int pathological_female = 3;
  int pathological_male = 3;
  /// Every speaker utters every word, so exact pairs always exist.
  int words_per_category = 3;
  std::size_t samples_per_clip = 4000;
  int sample_rate = 16000;
  std::uint64_t seed = 7;
};

/// 4 control + 6 pathological speakers, 15 words each.
FixtureSpec ten_speaker_spec();
/// 15 control + 15 pathological speakers, 20 words each.
FixtureSpec thirty_speaker_spec();

/// In-memory corpus; audio paths point nowhere.
Corpus synthetic_corpus(const FixtureSpec& spec);

struct Fixture {
  std::filesystem::path manifest;
  Corpus corpus;
};

/// Writes one WAV per utterance plus manifest.tsv under dir.
Fixture write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec);

/// Writes a JSON experiment config and returns its path.
std::filesystem::path write_config(const std::filesystem::path& path, const std::string& json_text);

std::string read_text(const std::filesystem::path& path);

/// Reference ablation grid (four variants by 1/3/5 shots), three repeats each.
std::vector<ExperimentSummary> ablation_cells();

}  // namespace pathoicl::testing
