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

#include <stdexcept>
#include <string>
#include <string_view>

namespace pathoicl {

enum class ErrorCode {
  kInvalidArgument,
  kConfigError,
  kIoError,
  // corpus
  kMalformedManifest,
  kDanglingReference,
  kDuplicateKey,
  kUnreadableAudio,
  kUnsupportedEncoding,
  // dsp
  kClipTooShort,
  // fold_planner
  kInfeasibleBalance,
  kInsufficientTestMaterial,
  // prompting
  kMissingAttachment,
  // llm_client
  kTransportError,
  kAuthError,
  kProviderRefusal,
  kOversizeAttachment,
  // response_parser
  kUnparseableResponse,
  kOutOfRangeScore,
  // evaluation
  kEmptyPredictionSet,
  kMixedConfigs,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure surfaced by the library. The code is the
/// stable, machine-checkable part; the message carries the locus.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised once the retry budget of an endpoint call is exhausted.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts);

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace pathoicl
