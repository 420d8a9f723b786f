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
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "pathoicl/prompting.hpp"

namespace pathoicl {

struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o";
  /// Used for raw-audio variants, which need an audio-capable model.
  std::string audio_model_name = "gpt-4o-audio-preview";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 1.0;
  int max_parallel = 4;
  std::chrono::milliseconds timeout{120000};
  int max_retries = 4;
  std::chrono::milliseconds backoff_base{1000};
  std::chrono::milliseconds backoff_cap{30000};
  std::size_t max_image_bytes = 20u << 20;
  std::size_t max_audio_bytes = 20u << 20;

  void validate() const;
  const std::string& model_for(InputRepresentation input) const {
    return input == InputRepresentation::kRawAudio ? audio_model_name : model_name;
  }
};

/// Verbatim model reply plus request metadata.
struct RawResponse {
  std::string text;
  std::string model_name;
  double temperature = 0.0;
  std::string request_hash;
  std::chrono::milliseconds latency{0};
  std::string timestamp;
  bool from_cache = false;
};

nlohmann::json to_json(const RawResponse& response);
RawResponse raw_response_from_json(const nlohmann::json& j);

/// The request in canonical form: model, temperature, the bundle's sample
/// index and its messages with attachments referenced by their SHA-256.
/// Object keys are sorted, so dump() is canonical.
nlohmann::json canonical_request(const PromptBundle& bundle, std::string_view model, double temperature);
std::string request_hash(const nlohmann::json& canonical);

/// OpenAI chat-completions body with base64 data-URL images and
/// input_audio WAV parts.
nlohmann::json wire_request(const PromptBundle& bundle, std::string_view model, double temperature);

struct BackendRequest {
  const PromptBundle& bundle;
  const nlohmann::json& canonical;
  std::string_view request_hash;
  std::string_view model;
  double temperature;
  std::chrono::milliseconds timeout;
};

/// status 0 means the exchange failed below HTTP (connect, timeout).
struct BackendReply {
  int status = 0;
  std::string body;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply send(const BackendRequest& request) = 0;
};

/// Content-addressed response store: <dir>/<hash[0:2]>/<hash>.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<RawResponse> get(std::string_view hash) const;
  void put(const RawResponse& response);
  std::filesystem::path path_for(std::string_view hash) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::mutex& stripe(std::string_view hash) const;

  std::filesystem::path dir_;
  mutable std::array<std::mutex, 32> stripes_;
};

/// Submits bundles with caching, bounded parallelism and retries.
/// Safe for concurrent use.
class LlmClient {
 public:
  LlmClient(EndpointConfig cfg, std::shared_ptr<ChatBackend> backend,
            std::shared_ptr<ResponseCache> cache = nullptr);

  /// Throws TransportError, AuthError, ProviderRefusal or
  /// OversizeAttachment.
  RawResponse submit(const PromptBundle& bundle);

  /// Applies the provider attachment limits: oversized images are halved
  /// until they fit, oversized audio throws OversizeAttachment.
  PromptBundle fit_attachments(const PromptBundle& bundle) const;

  const EndpointConfig& config() const noexcept { return cfg_; }
  std::size_t network_calls() const noexcept { return network_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  RawResponse exchange(const PromptBundle& bundle, const nlohmann::json& canonical,
                       const std::string& hash, const std::string& model);

  EndpointConfig cfg_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  std::counting_semaphore<4096> slots_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Extracts choices[0].message.content from a chat-completions reply.
/// Throws ProviderRefusal on content-filter / refusal replies and
/// TransportError (attempts = 1) on malformed bodies.
std::string extract_content(std::string_view body);

}  // namespace pathoicl
