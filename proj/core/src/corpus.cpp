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

#include "pathoicl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "pathoicl/error.hpp"

namespace pathoicl {
namespace {

constexpr std::array<std::string_view, 8> kManifestColumns{
    "speaker_id", "cohort", "gender", "utterance_id", "category", "word_id", "channel", "audio_path"};

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return text;
}

std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    fields.emplace_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

}  // namespace

std::string_view to_string(Cohort cohort) noexcept {
  return cohort == Cohort::kControl ? "control" : "pathological";
}

std::string_view to_string(Gender gender) noexcept { return gender == Gender::kFemale ? "f" : "m"; }

std::string_view to_string(Category category) noexcept {
  switch (category) {
    case Category::kCW: return "CW";
    case Category::kUW: return "UW";
    case Category::kC: return "C";
    case Category::kL: return "L";
    case Category::kD: return "D";
  }
  return "?";
}

std::optional<Cohort> parse_cohort(std::string_view text) noexcept {
  const auto t = lower(text);
  if (t == "control") return Cohort::kControl;
  if (t == "pathological") return Cohort::kPathological;
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view text) noexcept {
  const auto t = lower(text);
  if (t == "f") return Gender::kFemale;
  if (t == "m") return Gender::kMale;
  return std::nullopt;
}

std::optional<Category> parse_category(std::string_view text) noexcept {
  for (const auto c : kAllCategories) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

Corpus Corpus::from_records(std::vector<SpeakerRecord> speakers,
                            std::vector<UtteranceRecord> utterances) {
  Corpus corpus;
  std::sort(speakers.begin(), speakers.end(),
            [](const auto& a, const auto& b) { return a.speaker_id < b.speaker_id; });
  std::sort(utterances.begin(), utterances.end(), [](const auto& a, const auto& b) {
    return std::tie(a.speaker_id, a.utterance_id) < std::tie(b.speaker_id, b.utterance_id);
  });

  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (speakers[i].speaker_id.empty()) fail(ErrorCode::kInvalidArgument, "empty speaker_id");
    if (!corpus.speaker_index_.emplace(speakers[i].speaker_id, i).second) {
      fail(ErrorCode::kDuplicateKey, fmt::format("speaker '{}' listed twice", speakers[i].speaker_id));
    }
  }

  std::set<std::tuple<std::string, Category, std::string, int>> natural_keys;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto& u = utterances[i];
    if (u.utterance_id.empty()) fail(ErrorCode::kInvalidArgument, "empty utterance_id");
    if (u.channel < 1) {
      fail(ErrorCode::kInvalidArgument,
           fmt::format("utterance '{}': channel must be >= 1 (1-based)", u.utterance_id));
    }
    if (!corpus.speaker_index_.contains(u.speaker_id)) {
      fail(ErrorCode::kDanglingReference,
           fmt::format("utterance '{}' references unknown speaker '{}'", u.utterance_id, u.speaker_id));
    }
    if (!corpus.utterance_index_.emplace(u.utterance_id, i).second) {
      fail(ErrorCode::kDuplicateKey, fmt::format("utterance '{}' listed twice", u.utterance_id));
    }
    if (!natural_keys.emplace(u.speaker_id, u.category, u.word_id, u.channel).second) {
      fail(ErrorCode::kDuplicateKey,
           fmt::format("speaker '{}' has two utterances of {}/{} on channel {}", u.speaker_id,
                       to_string(u.category), u.word_id, u.channel));
    }
    auto [it, inserted] = corpus.speaker_spans_.try_emplace(u.speaker_id, i, i + 1);
    if (!inserted) it->second.second = i + 1;
  }

  corpus.speakers_ = std::move(speakers);
  corpus.utterances_ = std::move(utterances);
  return corpus;
}

const SpeakerRecord* Corpus::find_speaker(std::string_view speaker_id) const {
  const auto it = speaker_index_.find(speaker_id);
  return it == speaker_index_.end() ? nullptr : &speakers_[it->second];
}

const UtteranceRecord* Corpus::find_utterance(std::string_view utterance_id) const {
  const auto it = utterance_index_.find(utterance_id);
  return it == utterance_index_.end() ? nullptr : &utterances_[it->second];
}

const SpeakerRecord& Corpus::speaker(std::string_view speaker_id) const {
  const auto* s = find_speaker(speaker_id);
  if (s == nullptr) fail(ErrorCode::kInvalidArgument, fmt::format("unknown speaker '{}'", speaker_id));
  return *s;
}

std::vector<const UtteranceRecord*> Corpus::utterances_of(std::string_view speaker_id) const {
  std::vector<const UtteranceRecord*> out;
  const auto it = speaker_spans_.find(speaker_id);
  if (it == speaker_spans_.end()) return out;
  for (auto i = it->second.first; i < it->second.second; ++i) out.push_back(&utterances_[i]);
  return out;
}

std::size_t Corpus::count(Cohort cohort) const {
  return static_cast<std::size_t>(std::count_if(
      speakers_.begin(), speakers_.end(), [&](const auto& s) { return s.cohort == cohort; }));
}

Corpus parse_manifest(std::istream& in, std::string_view source_name,
                      const std::filesystem::path& base_dir) {
  std::string line;
  std::size_t line_no = 0;
  auto malformed = [&](const std::string& what) {
    fail(ErrorCode::kMalformedManifest, fmt::format("{}:{}: {}", source_name, line_no, what));
  };

  char delimiter = '\t';
  bool have_header = false;
  struct PartialSpeaker {
    std::optional<Cohort> cohort;
    std::optional<Gender> gender;
    std::size_t first_line = 0;
  };
  std::map<std::string, PartialSpeaker> speakers;
  std::vector<UtteranceRecord> utterances;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    if (!have_header) {
      delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
      const auto header = split(line, delimiter);
      if (header.size() != kManifestColumns.size() ||
          !std::equal(header.begin(), header.end(), kManifestColumns.begin())) {
        malformed(fmt::format("header must be exactly: {}", fmt::join(kManifestColumns, ",")));
      }
      have_header = true;
      continue;
    }

    const auto fields = split(line, delimiter);
    if (fields.size() != kManifestColumns.size()) {
      malformed(fmt::format("expected {} fields, found {}", kManifestColumns.size(), fields.size()));
    }
    const auto& speaker_id = fields[0];
    if (speaker_id.empty()) malformed("empty speaker_id");

    auto& partial = speakers[speaker_id];
    if (partial.first_line == 0) partial.first_line = line_no;
    // Empty cohort/gender fields refer to a speaker defined on another row.
    if (!fields[1].empty()) {
      const auto cohort = parse_cohort(fields[1]);
      if (!cohort) malformed(fmt::format("cohort must be control|pathological, got '{}'", fields[1]));
      if (partial.cohort && *partial.cohort != *cohort) {
        malformed(fmt::format("speaker '{}' has inconsistent cohort", speaker_id));
      }
      partial.cohort = cohort;
    }
    if (!fields[2].empty()) {
      const auto gender = parse_gender(fields[2]);
      if (!gender) malformed(fmt::format("gender must be f|m, got '{}'", fields[2]));
      if (partial.gender && *partial.gender != *gender) {
        malformed(fmt::format("speaker '{}' has inconsistent gender", speaker_id));
      }
      partial.gender = gender;
    }

    UtteranceRecord u;
    u.speaker_id = speaker_id;
    u.utterance_id = fields[3];
    if (u.utterance_id.empty()) malformed("empty utterance_id");
    const auto category = parse_category(fields[4]);
    if (!category) malformed(fmt::format("category must be one of CW|UW|C|L|D, got '{}'", fields[4]));
    u.category = *category;
    u.word_id = fields[5];
    if (u.word_id.empty()) malformed("empty word_id");
    try {
      std::size_t used = 0;
      u.channel = std::stoi(fields[6], &used);
      if (used != fields[6].size() || u.channel < 1) throw std::invalid_argument("channel");
    } catch (const std::exception&) {
      malformed(fmt::format("channel must be a positive integer, got '{}'", fields[6]));
    }
    if (fields[7].empty()) malformed("empty audio_path");
    std::filesystem::path audio(fields[7]);
    u.audio_path = audio.is_absolute() ? audio : (base_dir / audio).lexically_normal();
    utterances.push_back(std::move(u));
  }
  if (!have_header) malformed("missing header row");

  std::vector<SpeakerRecord> records;
  for (const auto& [id, partial] : speakers) {
    if (!partial.cohort && !partial.gender) {
      fail(ErrorCode::kDanglingReference,
           fmt::format("{}:{}: speaker '{}' is never defined (no row gives its cohort and gender)",
                       source_name, partial.first_line, id));
    }
    if (!partial.cohort || !partial.gender) {
      line_no = partial.first_line;
      malformed(fmt::format("speaker '{}' is missing cohort or gender", id));
    }
    records.push_back({id, *partial.cohort, *partial.gender});
  }
  return Corpus::from_records(std::move(records), std::move(utterances));
}

Corpus load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMalformedManifest, fmt::format("cannot open manifest '{}'", path.string()));
  return parse_manifest(in, path.string(), path.parent_path());
}

std::string format_manifest(const Corpus& corpus) {
  std::string out = fmt::format("{}\n", fmt::join(kManifestColumns, "\t"));
  for (const auto& u : corpus.utterances()) {
    const auto& s = corpus.speaker(u.speaker_id);
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", s.speaker_id, to_string(s.cohort),
                       to_string(s.gender), u.utterance_id, to_string(u.category), u.word_id,
                       u.channel, u.audio_path.string());
  }
  return out;
}

void write_manifest(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, fmt::format("cannot write manifest '{}'", path.string()));
  out << format_manifest(corpus);
  if (!out) fail(ErrorCode::kIoError, fmt::format("short write to '{}'", path.string()));
}

namespace {

struct ParsedName {
  std::string speaker_id;
  Cohort cohort;
  Gender gender;
  std::string block;
  Category category;
  std::string word;
  int microphone;
};

std::optional<ParsedName> parse_uaspeech_name(const std::string& stem) {
  const auto parts = split(stem, '_');
  if (parts.size() != 4) return std::nullopt;
  ParsedName p;
  std::string_view spk = parts[0];
  p.cohort = Cohort::kPathological;
  if (spk.size() > 1 && spk.front() == 'C') {
    p.cohort = Cohort::kControl;
    spk.remove_prefix(1);
  }
  if (spk.size() < 2 || (spk.front() != 'F' && spk.front() != 'M')) return std::nullopt;
  if (!std::all_of(spk.begin() + 1, spk.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  p.gender = spk.front() == 'F' ? Gender::kFemale : Gender::kMale;
  p.speaker_id = parts[0];
  if (parts[1].size() < 2 || parts[1][0] != 'B') return std::nullopt;
  p.block = parts[1];

  const std::string& word = parts[2];
  std::optional<Category> category;
  for (std::string_view prefix : {"CW", "UW", "C", "L", "D"}) {
    if (word.rfind(prefix, 0) == 0 && word.size() > prefix.size()) {
      category = parse_category(prefix);
      break;
    }
  }
  if (!category) return std::nullopt;
  p.category = *category;
  p.word = word;

  const std::string& mic = parts[3];
  if (mic.size() < 2 || mic[0] != 'M') return std::nullopt;
  try {
    p.microphone = std::stoi(mic.substr(1));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return p;
}

}  // namespace

Corpus scan_uaspeech_directory(const std::filesystem::path& root, const ScanOptions& options) {
  if (!std::filesystem::is_directory(root)) {
    fail(ErrorCode::kIoError, fmt::format("'{}' is not a directory", root.string()));
  }
  if (options.channel < 1) fail(ErrorCode::kInvalidArgument, "channel must be >= 1");
  std::map<std::string, SpeakerRecord> speakers;
  std::vector<UtteranceRecord> utterances;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".wav") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto parsed = parse_uaspeech_name(file.stem().string());
    if (!parsed) continue;
    if (options.microphone && parsed->microphone != *options.microphone) continue;
    speakers.try_emplace(parsed->speaker_id,
                         SpeakerRecord{parsed->speaker_id, parsed->cohort, parsed->gender});
    UtteranceRecord u;
    u.utterance_id = file.stem().string();
    u.speaker_id = parsed->speaker_id;
    u.category = parsed->category;
    // Words repeat across recording blocks, so the block is part of the id;
    // without a microphone filter the mic tag is too.
    u.word_id = options.microphone ? fmt::format("{}_{}", parsed->block, parsed->word)
                                   : fmt::format("{}_{}_M{}", parsed->block, parsed->word,
                                                 parsed->microphone);
    u.audio_path = std::filesystem::absolute(file).lexically_normal();
    u.channel = options.channel;
    utterances.push_back(std::move(u));
  }
  std::vector<SpeakerRecord> records;
  for (auto& [id, s] : speakers) records.push_back(std::move(s));
  return Corpus::from_records(std::move(records), std::move(utterances));
}

}  // namespace pathoicl
