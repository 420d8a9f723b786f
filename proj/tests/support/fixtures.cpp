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

#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "pathoicl/audio.hpp"
#include "pathoicl/rng.hpp"

namespace pathoicl::testing {

namespace fs = std::filesystem;

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() / fmt::format("pathoicl-{}-{}-{}", tag, ::getpid(), counter++);
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<double> sine(double freq_hz, std::size_t n, int rate, double amplitude, double phase) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / rate + phase);
  }
  return out;
}

FixtureSpec ten_speaker_spec() { return {}; }

FixtureSpec thirty_speaker_spec() {
  FixtureSpec s;
  s.control_female = 7;
  s.control_male = 8;
  s.pathological_female = 7;
  s.pathological_male = 8;
  s.words_per_category = 4;
  return s;
}

namespace {

std::vector<SpeakerRecord> speakers_of(const FixtureSpec& spec) {
  std::vector<SpeakerRecord> out;
  auto add = [&out](int n, std::string_view prefix, Cohort cohort, Gender gender) {
    for (int i = 1; i <= n; ++i) out.push_back({fmt::format("{}{:02d}", prefix, i), cohort, gender});
  };
  add(spec.control_female, "CF", Cohort::kControl, Gender::kFemale);
  add(spec.control_male, "CM", Cohort::kControl, Gender::kMale);
  add(spec.pathological_female, "F", Cohort::kPathological, Gender::kFemale);
  add(spec.pathological_male, "M", Cohort::kPathological, Gender::kMale);
  return out;
}

std::vector<UtteranceRecord> utterances_of(const FixtureSpec& spec, const std::vector<SpeakerRecord>& speakers,
                                           const fs::path& audio_dir) {
  std::vector<UtteranceRecord> out;
  for (const auto& s : speakers) {
    for (const auto category : kAllCategories) {
      for (int w = 1; w <= spec.words_per_category; ++w) {
        UtteranceRecord u;
        u.speaker_id = s.speaker_id;
        u.category = category;
        u.word_id = fmt::format("B1_{}{}", to_string(category), w);
        u.utterance_id = fmt::format("{}_{}", s.speaker_id, u.word_id);
        u.audio_path = audio_dir / (u.utterance_id + "_M5.wav");
        out.push_back(std::move(u));
      }
    }
  }
  return out;
}

}  // namespace

Corpus synthetic_corpus(const FixtureSpec& spec) {
  const auto speakers = speakers_of(spec);
  return Corpus::from_records(speakers, utterances_of(spec, speakers, "/nonexistent"));
}

Fixture write_fixture(const fs::path& dir, const FixtureSpec& spec) {
  const auto audio_dir = dir / "audio";
  fs::create_directories(audio_dir);
  const auto speakers = speakers_of(spec);
  const auto utterances = utterances_of(spec, speakers, audio_dir);
  DeterministicRng rng(spec.seed);
  for (const auto& u : utterances) {
    const bool pathological = u.speaker_id[0] != 'C';
    const double f0 = 150.0 + 40.0 * static_cast<double>(rng.below(10));
    AudioClip clip{sine(f0, spec.samples_per_clip, spec.sample_rate, 0.3), spec.sample_rate};
    auto harmonic = sine(3.0 * f0, spec.samples_per_clip, spec.sample_rate, pathological ? 0.05 : 0.15);
    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
      const double noise = (static_cast<double>(rng.below(2001)) / 1000.0 - 1.0) * (pathological ? 0.08 : 0.01);
      clip.samples[i] += harmonic[i] + noise;
    }
    write_file(u.audio_path, encode_wav_pcm16(clip));
  }
  Fixture fixture{dir / "manifest.tsv", Corpus::from_records(speakers, utterances)};
  write_manifest(fixture.corpus, fixture.manifest);
  return fixture;
}

fs::path write_config(const fs::path& path, const std::string& json_text) {
  std::ofstream(path, std::ios::binary) << json_text;
  return path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ExperimentSummary> ablation_cells() {
  struct Row {
    const char* variant;
    double values[3][2];
  };
  static constexpr Row kRows[] = {
      {"generic.detailed.image", {{70.2, 3.4}, {82.1, 0.0}, {85.7, 0.0}}},
      {"dysarthria.detailed.image", {{60.7, 2.9}, {69.0, 1.6}, {76.2, 1.6}}},
      {"generic.score-only.image", {{64.3, 0.0}, {75.0, 0.0}, {79.8, 3.4}}},
      {"generic.detailed.audio", {{52.4, 6.7}, {60.7, 5.8}, {67.9, 2.9}}},
  };
  constexpr int kShots[] = {1, 3, 5};
  std::vector<ExperimentSummary> cells;
  for (const auto& row : kRows) {
    for (int c = 0; c < 3; ++c) {
      ExperimentSummary s;
      s.variant_id = row.variant;
      s.k = kShots[c];
      s.cell_id = s.variant_id + ".k" + std::to_string(s.k);
      s.mean_accuracy = row.values[c][0];
      s.std_accuracy = row.values[c][1];
      s.n_repeats = 3;
      cells.push_back(s);
    }
  }
  return cells;
}

}  // namespace pathoicl::testing
