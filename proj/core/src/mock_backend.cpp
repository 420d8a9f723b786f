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

#include "pathoicl/mock_backend.hpp"

#include <charconv>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pathoicl/error.hpp"

namespace pathoicl {
namespace mock_policies {

std::string reply_with_score(const PromptBundle& bundle, double score) {
  if (bundle.variant.axes.detail == ResponseDetail::kScoreAndExplanation && bundle.follow_ups.empty()) {
    return fmt::format("The test sample was compared against the reference samples.\nSCORE: {:.1f}", score);
  }
  return fmt::format("SCORE: {:.1f}", score);
}

MockPolicy always(double score) {
  return [score](const MockRequest& r) { return reply_with_score(r.bundle, score); };
}

MockPolicy label_leak(LabelTable labels) {
  return [labels = std::move(labels)](const MockRequest& r) {
    const auto it = labels.find(r.bundle.test_utterance_id);
    if (it == labels.end()) {
      fail(ErrorCode::kInvalidArgument,
           fmt::format("label-leak mock has no label for '{}'", r.bundle.test_utterance_id));
    }
    return reply_with_score(r.bundle, it->second == Cohort::kPathological ? 1.0 : 0.0);
  };
}

MockPolicy hash_score() {
  return [](const MockRequest& r) {
    unsigned value = 0;
    std::from_chars(r.request_hash.data(), r.request_hash.data() + 4, value, 16);
    if (r.bundle.variant.axes.detail == ResponseDetail::kScoreAndExplanation && r.bundle.follow_ups.empty()) {
      return fmt::format("Hash-derived mock answer.\nSCORE: {:.4f}", value / 65535.0);
    }
    return fmt::format("SCORE: {:.4f}", value / 65535.0);
  };
}

bool is_malformed_hash(std::string_view request_hash, unsigned modulus) {
  unsigned lead = 0;
  if (modulus == 0 || request_hash.size() < 2) return false;
  std::from_chars(request_hash.data(), request_hash.data() + 2, lead, 16);
  return lead % modulus == 0;
}

MockPolicy malformed_by_parity(MockPolicy inner, unsigned modulus) {
  return [inner = std::move(inner), modulus](const MockRequest& r) -> std::string {
    if (is_malformed_hash(r.request_hash, modulus)) return "I am unable to assess this sample.";
    return inner(r);
  };
}

}  // namespace mock_policies

MockPolicy make_mock_policy(std::string_view spec, const LabelTable& labels) {
  if (spec == "label-leak") return mock_policies::label_leak(labels);
  if (spec == "hash-score") return mock_policies::hash_score();
  if (spec.starts_with("always:")) {
    const auto text = spec.substr(7);
    double score = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), score);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail(ErrorCode::kConfigError, fmt::format("bad mock score in '{}'", spec));
    }
    return mock_policies::always(score);
  }
  if (spec.starts_with("malformed-parity:")) {
    const auto rest = spec.substr(17);
    const auto colon = rest.find(':');
    unsigned modulus = 0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + std::min(colon, rest.size()), modulus);
    if (ec != std::errc() || colon == std::string_view::npos || modulus == 0) {
      fail(ErrorCode::kConfigError, fmt::format("expected malformed-parity:<modulus>:<policy>, got '{}'", spec));
    }
    return mock_policies::malformed_by_parity(make_mock_policy(rest.substr(colon + 1), labels), modulus);
  }
  fail(ErrorCode::kConfigError, fmt::format("unknown mock policy '{}'", spec));
}

MockBackend::MockBackend(MockPolicy policy) : policy_(std::move(policy)) {}

void MockBackend::set_override(Override hook) {
  std::lock_guard lock(mutex_);
  override_ = std::move(hook);
}

std::string MockBackend::completion_body(std::string_view content) {
  return nlohmann::json{{"object", "chat.completion"},
                        {"choices", nlohmann::json::array({{{"index", 0},
                                                            {"finish_reason", "stop"},
                                                            {"message", {{"role", "assistant"}, {"content", content}}}}})}}
      .dump();
}

BackendReply MockBackend::send(const BackendRequest& request) {
  ++calls_;
  const auto now = ++in_flight_;
  auto peak = max_in_flight_.load();
  while (now > peak && !max_in_flight_.compare_exchange_weak(peak, now)) {
  }
  struct Leave {
    std::atomic<std::size_t>& n;
    ~Leave() { --n; }
  } leave{in_flight_};

  int attempt = 0;
  Override hook;
  {
    std::lock_guard lock(mutex_);
    hashes_.emplace_back(request.request_hash);
    attempt = ++attempts_[std::string(request.request_hash)];
    hook = override_;
  }
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  if (hook) {
    if (auto reply = hook(request, attempt)) return *reply;
  }
  const MockRequest mock{request.bundle, request.request_hash, request.model};
  return {200, completion_body(policy_(mock))};
}

std::vector<std::string> MockBackend::request_hashes() const {
  std::lock_guard lock(mutex_);
  return hashes_;
}

}  // namespace pathoicl
