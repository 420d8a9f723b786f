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

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pathoicl {

enum class Cohort { kControl, kPathological };
enum class Gender { kFemale, kMale };
enum class Category { kCW, kUW, kC, kL, kD };

inline constexpr std::array<Category, 5> kAllCategories{Category::kCW, Category::kUW, Category::kC,
                                                        Category::kL, Category::kD};

std::string_view to_string(Cohort cohort) noexcept;
std::string_view to_string(Gender gender) noexcept;
std::string_view to_string(Category category) noexcept;

std::optional<Cohort> parse_cohort(std::string_view text) noexcept;
std::optional<Gender> parse_gender(std::string_view text) noexcept;
std::optional<Category> parse_category(std::string_view text) noexcept;

struct SpeakerRecord {
  std::string speaker_id;
  Cohort cohort = Cohort::kControl;
  Gender gender = Gender::kFemale;

  friend bool operator==(const SpeakerRecord&, const SpeakerRecord&) = default;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  Category category = Category::kCW;
  /// Identifies the spoken item; equal word ids across speakers mean the
  /// same word was uttered.
  std::string word_id;
  std::filesystem::path audio_path;
  /// 1-based channel index within the audio file.
  int channel = 1;

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

/// Immutable, validated speech corpus. Speakers are kept sorted by id and
/// utterances by (speaker_id, utterance_id) so equality is order-free.
class Corpus {
 public:
  Corpus() = default;

  /// Validates type invariants and referential integrity.
  /// Throws DuplicateKey or DanglingReference.
  static Corpus from_records(std::vector<SpeakerRecord> speakers,
                             std::vector<UtteranceRecord> utterances);

  const std::vector<SpeakerRecord>& speakers() const noexcept { return speakers_; }
  const std::vector<UtteranceRecord>& utterances() const noexcept { return utterances_; }

  const SpeakerRecord* find_speaker(std::string_view speaker_id) const;
  const UtteranceRecord* find_utterance(std::string_view utterance_id) const;
  const SpeakerRecord& speaker(std::string_view speaker_id) const;

  /// Utterances of one speaker, in canonical order.
  std::vector<const UtteranceRecord*> utterances_of(std::string_view speaker_id) const;

  std::size_t count(Cohort cohort) const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.speakers_ == b.speakers_ && a.utterances_ == b.utterances_;
  }

 private:
  std::vector<SpeakerRecord> speakers_;
  std::vector<UtteranceRecord> utterances_;
  std::map<std::string, std::size_t, std::less<>> speaker_index_;
  std::map<std::string, std::size_t, std::less<>> utterance_index_;
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> speaker_spans_;
};

/// Parses a manifest. Relative audio paths are resolved against base_dir.
/// The delimiter (tab or comma) is taken from the header row.
Corpus parse_manifest(std::istream& in, std::string_view source_name,
                      const std::filesystem::path& base_dir);
Corpus load_manifest(const std::filesystem::path& path);

/// Tab-separated canonical form; reloading it yields an equal corpus.
std::string format_manifest(const Corpus& corpus);
void write_manifest(const Corpus& corpus, const std::filesystem::path& path);

struct ScanOptions {
  /// Keep only files recorded by this microphone (the trailing _M<n> tag).
  std::optional<int> microphone;
  /// Channel recorded in the manifest for every file (1-based).
  int channel = 1;
};

/// Builds a corpus from a directory following the UA-Speech naming scheme
/// (<speaker>_<block>_<word>_<mic>.wav, control speakers prefixed with C,
/// e.g. CF02_B1_CW12_M5.wav). Files that do not match are skipped.
Corpus scan_uaspeech_directory(const std::filesystem::path& root, const ScanOptions& options = {});

}  // namespace pathoicl
