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

#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "pathoicl/corpus.hpp"
#include "pathoicl/dsp.hpp"
#include "pathoicl/prompting.hpp"
#include "pathoicl/render.hpp"

namespace pathoicl {

/// Rendered attachments on disk, named by a digest of everything that
/// determines their bytes (audio file contents, channel, STFT and render
/// settings). Safe for concurrent use.
class ArtifactStore {
 public:
  ArtifactStore(std::filesystem::path dir, StftConfig stft, RenderConfig render);

  struct Stats {
    std::size_t created = 0;
    std::size_t reused = 0;
  };

  /// Materializes every listed utterance (all of them when `only` is
  /// empty). Idempotent: a second call creates nothing.
  Stats precompute(const Corpus& corpus, const std::set<InputRepresentation>& representations,
                   const std::set<std::string>& only = {});

  /// Loads or produces one attachment.
  AttachmentPtr get(const UtteranceRecord& utterance, InputRepresentation representation);

  std::filesystem::path path_for(const UtteranceRecord& utterance, InputRepresentation representation);

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::vector<std::uint8_t> produce(const UtteranceRecord& utterance, InputRepresentation representation) const;
  std::string file_digest(const std::filesystem::path& path);
  bool ensure(const UtteranceRecord& utterance, InputRepresentation representation);

  std::filesystem::path dir_;
  StftConfig stft_;
  RenderConfig render_;
  std::string settings_digest_;
  std::mutex mutex_;
  std::map<std::string, std::string> file_digests_;
  std::map<std::string, AttachmentPtr> loaded_;
};

}  // namespace pathoicl
