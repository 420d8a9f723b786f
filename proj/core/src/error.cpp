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

#include "pathoicl/error.hpp"

#include <fmt/format.h>

namespace pathoicl {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kUnreadableAudio: return "UnreadableAudio";
    case ErrorCode::kUnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::kClipTooShort: return "ClipTooShort";
    case ErrorCode::kInfeasibleBalance: return "InfeasibleBalance";
    case ErrorCode::kInsufficientTestMaterial: return "InsufficientTestMaterial";
    case ErrorCode::kMissingAttachment: return "MissingAttachment";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kAuthError: return "AuthError";
    case ErrorCode::kProviderRefusal: return "ProviderRefusal";
    case ErrorCode::kOversizeAttachment: return "OversizeAttachment";
    case ErrorCode::kUnparseableResponse: return "UnparseableResponse";
    case ErrorCode::kOutOfRangeScore: return "OutOfRangeScore";
    case ErrorCode::kEmptyPredictionSet: return "EmptyPredictionSet";
    case ErrorCode::kMixedConfigs: return "MixedConfigs";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)), code_(code) {}

TransportError::TransportError(const std::string& message, int attempts)
    : Error(ErrorCode::kTransportError, fmt::format("{} (after {} attempts)", message, attempts)),
      attempts_(attempts) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace pathoicl
