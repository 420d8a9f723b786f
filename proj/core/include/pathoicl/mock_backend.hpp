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

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pathoicl/llm_client.hpp"

namespace pathoicl {

struct MockRequest {
  const PromptBundle& bundle;
  std::string_view request_hash;
  std::string_view model;
};

/// A pure function from request to reply text.
using MockPolicy = std::function<std::string(const MockRequest&)>;

using LabelTable = std::map<std::string, Cohort, std::less<>>;

namespace mock_policies {

/// "SCORE: <score>" for every request, with a one-line rationale above it
/// for detailed variants.
MockPolicy always(double score);

/// Reads the hidden label of the test utterance: 1.0 for pathological,
/// 0.0 for control.
MockPolicy label_leak(LabelTable labels);

/// Score derived from the request hash, uniform-ish in [0, 1].
MockPolicy hash_score();

/// True when the leading byte of the hex hash is divisible by modulus.
bool is_malformed_hash(std::string_view request_hash, unsigned modulus);

/// Replaces the reply with unparseable text whenever is_malformed_hash
/// holds; otherwise defers to inner.
MockPolicy malformed_by_parity(MockPolicy inner, unsigned modulus = 10);

std::string reply_with_score(const PromptBundle& bundle, double score);

}  // namespace mock_policies

/// Parses "always:<x>", "label-leak", "hash-score" and
/// "malformed-parity:<modulus>:<inner spec>". label-leak needs the table.
MockPolicy make_mock_policy(std::string_view spec, const LabelTable& labels);

/// Deterministic in-process endpoint. Records every request and the peak
/// number of concurrent sends.
class MockBackend : public ChatBackend {
 public:
  /// Optional hook that can replace the reply for a given attempt number
  /// (1-based per request hash), e.g. to script HTTP failures.
  using Override = std::function<std::optional<BackendReply>(const BackendRequest&, int attempt)>;

  explicit MockBackend(MockPolicy policy);

  BackendReply send(const BackendRequest& request) override;

  void set_override(Override hook);
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  std::vector<std::string> request_hashes() const;

  /// Chat-completions JSON wrapping a reply text.
  static std::string completion_body(std::string_view content);

 private:
  MockPolicy policy_;
  Override override_;
  std::chrono::milliseconds latency_{0};
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> hashes_;
  std::map<std::string, int> attempts_;
};

}  // namespace pathoicl
