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

#include <optional>
#include <string>
#include <string_view>

#include "pathoicl/llm_client.hpp"
#include "pathoicl/prompting.hpp"

namespace pathoicl {

enum class ScoreSource { kDelimiter, kFallback };

/// Result of reading a score out of free text.
struct ParsedScore {
  double score = 0.0;
  std::optional<std::string> explanation;
  ScoreSource source = ScoreSource::kDelimiter;
  /// Set when a delimited score slightly outside [0, 1] was clamped.
  bool clamped = false;
};

/// Rules, in order:
///  1. the last line of the form `SCORE: <decimal>` (case-insensitive,
///     surrounding markdown emphasis tolerated); the explanation is the
///     trimmed text before that line;
///  2. otherwise the last standalone decimal in [0, 1].
/// Delimited scores in [-0.1, 0) and (1, 1.1] are clamped (with a flag);
/// further out they raise OutOfRangeScore. No candidate at all raises
/// UnparseableResponse. Total over arbitrary input.
ParsedScore parse_score_text(std::string_view text);

struct Prediction {
  double score = 0.0;
  std::optional<std::string> explanation;
  std::string utterance_id;
  PromptVariant variant;
  std::string request_hash;
  ScoreSource source = ScoreSource::kDelimiter;
  bool clamped = false;
};

Prediction parse(const RawResponse& raw, const PromptVariant& variant, std::string utterance_id);

/// The reply line the prompt asks for; parse_score_text reads back the same
/// double.
std::string format_score_line(double score);

}  // namespace pathoicl
