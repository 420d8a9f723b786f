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

#include "pathoicl/llm_client.hpp"

#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pathoicl/digest.hpp"
#include "pathoicl/error.hpp"
#include "pathoicl/render.hpp"

namespace pathoicl {
namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json wire_part(const nlohmann::json& part, const std::vector<const Attachment*>& pool,
                         std::size_t& next) {
  if (part.at("type") == "text") return part;
  const Attachment& a = *pool.at(next++);
  if (a.kind == AttachmentKind::kPngImage) {
    return {{"type", "image_url"},
            {"image_url", {{"url", "data:image/png;base64," + base64_encode(a.bytes)}}}};
  }
  return {{"type", "input_audio"}, {"input_audio", {{"data", base64_encode(a.bytes)}, {"format", "wav"}}}};
}

std::vector<const Attachment*> attachments_in_order(const PromptBundle& bundle) {
  std::vector<const Attachment*> out;
  for (const auto& e : bundle.exemplars) out.push_back(e.attachment.get());
  if (bundle.test_attachment) out.push_back(bundle.test_attachment.get());
  return out;
}

bool is_retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

bool mentions_content_policy(std::string_view body) {
  return body.find("content_policy") != std::string_view::npos ||
         body.find("content_filter") != std::string_view::npos;
}

AttachmentPtr shrink_image(const AttachmentPtr& image, std::size_t limit) {
  auto decoded = decode_png(image->bytes);
  AttachmentPtr current = image;
  while (current->bytes.size() > limit) {
    if (decoded.width <= 1 && decoded.height <= 1) {
      fail(ErrorCode::kOversizeAttachment, "image cannot be reduced below the provider limit");
    }
    decoded = downscale_half(decoded);
    current = Attachment::make(AttachmentKind::kPngImage,
                               encode_png(decoded.width, decoded.height, decoded.rgb));
  }
  return current;
}

}  // namespace

void EndpointConfig::validate() const {
  if (max_parallel < 1) fail(ErrorCode::kConfigError, "max_parallel must be >= 1");
  if (max_parallel > 4096) fail(ErrorCode::kConfigError, "max_parallel must be <= 4096");
  if (timeout.count() <= 0) fail(ErrorCode::kConfigError, "timeout must be positive");
  if (max_retries < 0) fail(ErrorCode::kConfigError, "max_retries must be >= 0");
  if (!(temperature >= 0.0)) fail(ErrorCode::kConfigError, "temperature must be >= 0");
  if (model_name.empty() || audio_model_name.empty()) fail(ErrorCode::kConfigError, "model name is empty");
}

nlohmann::json to_json(const RawResponse& r) {
  return {{"text", r.text},
          {"model_name", r.model_name},
          {"temperature", r.temperature},
          {"request_hash", r.request_hash},
          {"latency_ms", r.latency.count()},
          {"timestamp", r.timestamp}};
}

RawResponse raw_response_from_json(const nlohmann::json& j) {
  RawResponse r;
  r.text = j.at("text").get<std::string>();
  r.model_name = j.at("model_name").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.request_hash = j.at("request_hash").get<std::string>();
  r.latency = std::chrono::milliseconds(j.at("latency_ms").get<std::int64_t>());
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

nlohmann::json canonical_request(const PromptBundle& bundle, std::string_view model, double temperature) {
  return {{"model", model},
          {"temperature", temperature},
          {"sample", bundle.sample},
          {"messages", bundle_to_json(bundle).at("messages")}};
}

std::string request_hash(const nlohmann::json& canonical) { return sha256_hex(canonical.dump()); }

nlohmann::json wire_request(const PromptBundle& bundle, std::string_view model, double temperature) {
  const auto neutral = bundle_to_json(bundle).at("messages");
  const auto pool = attachments_in_order(bundle);
  std::size_t next = 0;
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : neutral) {
    const auto& parts = m.at("content");
    if (m.at("role") != "user") {
      // system and assistant turns are plain text
      messages.push_back({{"role", m.at("role")}, {"content", parts.at(0).at("text")}});
      continue;
    }
    nlohmann::json content = nlohmann::json::array();
    for (const auto& p : parts) content.push_back(wire_part(p, pool, next));
    messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  }
  return {{"model", model}, {"temperature", temperature}, {"messages", std::move(messages)}};
}

std::string extract_content(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw TransportError("reply body is not JSON", 1);
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw TransportError("reply has no choices", 1);
  }
  const auto& choice = (*choices)[0];
  if (choice.value("finish_reason", std::string()) == "content_filter") {
    fail(ErrorCode::kProviderRefusal, "provider content filter stopped the reply");
  }
  const auto message = choice.find("message");
  if (message == choice.end() || !message->is_object()) throw TransportError("reply has no message", 1);
  if (const auto refusal = message->find("refusal");
      refusal != message->end() && refusal->is_string() && !refusal->get<std::string>().empty()) {
    fail(ErrorCode::kProviderRefusal, fmt::format("model refused: {}", refusal->get<std::string>()));
  }
  const auto content = message->find("content");
  if (content == message->end() || !content->is_string()) {
    throw TransportError("reply message has no text content", 1);
  }
  return content->get<std::string>();
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::path_for(std::string_view hash) const {
  const std::string h(hash);
  return dir_ / h.substr(0, 2) / (h + ".json");
}

std::mutex& ResponseCache::stripe(std::string_view hash) const {
  return stripes_[std::hash<std::string_view>{}(hash) % stripes_.size()];
}

std::optional<RawResponse> ResponseCache::get(std::string_view hash) const {
  std::lock_guard lock(stripe(hash));
  const auto path = path_for(hash);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    auto r = raw_response_from_json(nlohmann::json::parse(in));
    if (r.request_hash != hash) return std::nullopt;
    r.from_cache = true;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // half-written or foreign file: treat as a miss
  }
}

void ResponseCache::put(const RawResponse& response) {
  std::lock_guard lock(stripe(response.request_hash));
  const auto path = path_for(response.request_hash);
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << to_json(response).dump(2) << "\n";
    if (!out) fail(ErrorCode::kIoError, fmt::format("cannot write cache entry '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

LlmClient::LlmClient(EndpointConfig cfg, std::shared_ptr<ChatBackend> backend,
                     std::shared_ptr<ResponseCache> cache)
    : cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      slots_((cfg_.validate(), cfg_.max_parallel)) {
  if (!backend_) fail(ErrorCode::kConfigError, "LLM client needs a backend");
}

PromptBundle LlmClient::fit_attachments(const PromptBundle& bundle) const {
  PromptBundle out = bundle;
  auto fit = [&](AttachmentPtr& a) {
    if (!a) return;
    if (a->kind == AttachmentKind::kWavAudio && a->bytes.size() > cfg_.max_audio_bytes) {
      fail(ErrorCode::kOversizeAttachment,
           fmt::format("audio attachment of {} bytes exceeds the {} byte limit", a->bytes.size(),
                       cfg_.max_audio_bytes));
    }
    if (a->kind == AttachmentKind::kPngImage && a->bytes.size() > cfg_.max_image_bytes) {
      a = shrink_image(a, cfg_.max_image_bytes);
    }
  };
  for (auto& e : out.exemplars) fit(e.attachment);
  fit(out.test_attachment);
  return out;
}

RawResponse LlmClient::submit(const PromptBundle& original) {
  const PromptBundle bundle = fit_attachments(original);
  const auto& model = cfg_.model_for(bundle.variant.axes.input);
  const auto canonical = canonical_request(bundle, model, cfg_.temperature);
  const auto hash = request_hash(canonical);
  if (cache_) {
    if (auto hit = cache_->get(hash)) {
      ++cache_hits_;
      return *hit;
    }
  }
  slots_.acquire();
  struct Release {
    std::counting_semaphore<4096>& s;
    ~Release() { s.release(); }
  } release{slots_};
  auto response = exchange(bundle, canonical, hash, model);
  if (cache_) cache_->put(response);
  return response;
}

RawResponse LlmClient::exchange(const PromptBundle& bundle, const nlohmann::json& canonical,
                                const std::string& hash, const std::string& model) {
  const BackendRequest request{bundle, canonical, hash, model, cfg_.temperature, cfg_.timeout};
  const int max_attempts = cfg_.max_retries + 1;
  std::string last_problem;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    ++network_calls_;
    const BackendReply reply = backend_->send(request);
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

    if (reply.status == 200) {
      try {
        RawResponse r;
        r.text = extract_content(reply.body);
        r.model_name = model;
        r.temperature = cfg_.temperature;
        r.request_hash = hash;
        r.latency = latency;
        r.timestamp = utc_timestamp();
        return r;
      } catch (const TransportError& e) {
        last_problem = e.what();
      }
    } else if (reply.status == 401 || reply.status == 403) {
      fail(ErrorCode::kAuthError, fmt::format("endpoint rejected credentials (HTTP {})", reply.status));
    } else if (reply.status == 413) {
      fail(ErrorCode::kOversizeAttachment, "endpoint rejected the request as too large (HTTP 413)");
    } else if (reply.status == 400 && mentions_content_policy(reply.body)) {
      fail(ErrorCode::kProviderRefusal, "request rejected by provider content policy");
    } else if (!is_retryable(reply.status)) {
      throw TransportError(fmt::format("HTTP {}: {}", reply.status, reply.body.substr(0, 200)), attempt);
    } else {
      last_problem = reply.status == 0 ? fmt::format("transport failure: {}", reply.body)
                                       : fmt::format("HTTP {}", reply.status);
    }

    if (attempt < max_attempts) {
      const auto factor = std::int64_t{1} << std::min(attempt - 1, 20);
      const auto delay = std::min(cfg_.backoff_cap, cfg_.backoff_base * factor);
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
    }
  }
  throw TransportError(last_problem, max_attempts);
}

}  // namespace pathoicl
