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

#include "pathoicl/artifacts.hpp"

#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pathoicl/audio.hpp"
#include "pathoicl/digest.hpp"
#include "pathoicl/error.hpp"

namespace pathoicl {

ArtifactStore::ArtifactStore(std::filesystem::path dir, StftConfig stft, RenderConfig render)
    : dir_(std::move(dir)), stft_(stft), render_(std::move(render)) {
  stft_.validate();
  render_.validate();
  nlohmann::json settings = {
      {"stft", {{"window_ms", stft_.window_ms}, {"hop_ms", stft_.hop_ms}, {"sample_rate", stft_.sample_rate}}},
      {"render",
       {{"db_range", render_.db_range},
        {"reference_db", render_.reference_db ? nlohmann::json(*render_.reference_db) : nlohmann::json()},
        {"min_side", render_.min_side},
        {"normalize", render_.normalize},
        {"colormap", render_.colormap}}},
      {"format", 1}};
  settings_digest_ = sha256_hex(settings.dump());
  std::filesystem::create_directories(dir_);
}

std::string ArtifactStore::file_digest(const std::filesystem::path& path) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = file_digests_.find(path.string()); it != file_digests_.end()) return it->second;
  }
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kUnreadableAudio, e.what());
  }
  auto digest = sha256_hex(bytes);
  std::lock_guard lock(mutex_);
  file_digests_.emplace(path.string(), digest);
  return digest;
}

std::filesystem::path ArtifactStore::path_for(const UtteranceRecord& u, InputRepresentation representation) {
  const bool image = representation == InputRepresentation::kSpectrogramImage;
  const auto key = Sha256()
                       .update(file_digest(u.audio_path))
                       .update(fmt::format("|{}|{}|", u.channel, to_string(representation)))
                       .update(image ? settings_digest_ : std::string("pcm16@16000"))
                       .hex_digest();
  return dir_ / (image ? "image" : "audio") / (key + (image ? ".png" : ".wav"));
}

std::vector<std::uint8_t> ArtifactStore::produce(const UtteranceRecord& u, InputRepresentation representation) const {
  try {
    if (representation == InputRepresentation::kRawAudio) return encode_wav_pcm16(load_audio_16k(u));
    const auto clip = resample(load_audio(u), stft_.sample_rate);
    return encode_png(render_image(stft_log_magnitude(clip, stft_, u.utterance_id), render_));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("utterance '{}': {}", u.utterance_id, e.what()));
  }
}

bool ArtifactStore::ensure(const UtteranceRecord& u, InputRepresentation representation) {
  const auto path = path_for(u, representation);
  if (std::filesystem::exists(path)) return false;
  const auto bytes = produce(u, representation);
  auto tmp = path;
  tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
  write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
  return true;
}

ArtifactStore::Stats ArtifactStore::precompute(const Corpus& corpus,
                                               const std::set<InputRepresentation>& representations,
                                               const std::set<std::string>& only) {
  Stats stats;
  for (const auto& u : corpus.utterances()) {
    if (!only.empty() && !only.contains(u.utterance_id)) continue;
    for (const auto representation : representations) {
      if (ensure(u, representation)) {
        ++stats.created;
      } else {
        ++stats.reused;
      }
    }
  }
  return stats;
}

AttachmentPtr ArtifactStore::get(const UtteranceRecord& u, InputRepresentation representation) {
  const auto memo_key = fmt::format("{}|{}", u.utterance_id, to_string(representation));
  {
    std::lock_guard lock(mutex_);
    if (auto it = loaded_.find(memo_key); it != loaded_.end()) return it->second;
  }
  ensure(u, representation);
  const auto kind = representation == InputRepresentation::kRawAudio ? AttachmentKind::kWavAudio
                                                                     : AttachmentKind::kPngImage;
  auto attachment = Attachment::make(kind, read_file(path_for(u, representation)));
  std::lock_guard lock(mutex_);
  return loaded_.emplace(memo_key, std::move(attachment)).first->second;
}

}  // namespace pathoicl
