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

#include "pathoicl/response_parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "pathoicl/error.hpp"

namespace pathoicl {
namespace {

constexpr double kClampMargin = 0.1;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view strip_emphasis(std::string_view s) {
  auto is_mark = [](char c) { return c == '*' || c == '_' || c == '`' || c == '#'; };
  s = trim(s);
  while (!s.empty() && is_mark(s.front())) s = trim(s.substr(1));
  while (!s.empty() && is_mark(s.back())) s = trim(s.substr(0, s.size() - 1));
  return s;
}

// Parses the whole of `s` as a finite decimal number.
std::optional<double> whole_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value,
                                         std::chars_format::general);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  // from_chars accepts "inf"/"nan" spellings; require a digit.
  bool digit = false;
  for (const char c : s) digit = digit || is_digit(c);
  if (!digit) return std::nullopt;
  return value;
}

// `SCORE: <decimal>`, returns the number when the line matches.
std::optional<double> delimited_score(std::string_view line) {
  auto s = strip_emphasis(line);
  constexpr std::string_view kKeyword = "score";
  if (s.size() < kKeyword.size()) return std::nullopt;
  for (std::size_t i = 0; i < kKeyword.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != kKeyword[i]) return std::nullopt;
  }
  s = strip_emphasis(s.substr(kKeyword.size()));
  if (s.empty() || s.front() != ':') return std::nullopt;
  s = strip_emphasis(s.substr(1));
  return whole_number(s);
}

// Last decimal token standing on its own: not glued to letters, digits,
// signs or a percent sign.
std::optional<double> last_standalone_unit_decimal(std::string_view text) {
  std::optional<double> found;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool starts = is_digit(text[i]) || (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1]));
    if (!starts) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    if (i < text.size() && text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1])) {
      ++i;
      while (i < text.size() && is_digit(text[i])) ++i;
    }
    const std::size_t end = i;
    const char before = begin > 0 ? text[begin - 1] : ' ';
    const char after = end < text.size() ? text[end] : ' ';
    const bool glued_before = is_alpha(before) || is_digit(before) || before == '.' || before == '-' ||
                              before == '+' || before == '_';
    const bool glued_after = is_alpha(after) || is_digit(after) || after == '%' || after == '_' ||
                             (after == '.' && end + 1 < text.size() && is_digit(text[end + 1]));
    if (glued_before || glued_after) continue;
    if (const auto v = whole_number(text.substr(begin, end - begin)); v && *v >= 0.0 && *v <= 1.0) {
      found = v;
    }
  }
  return found;
}

}  // namespace

ParsedScore parse_score_text(std::string_view text) {
  // Locate the last delimited line.
  std::optional<double> score;
  std::size_t score_line_begin = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    if (const auto v = delimited_score(text.substr(pos, eol - pos))) {
      score = v;
      score_line_begin = pos;
    }
    pos = eol + 1;
  }

  ParsedScore out;
  if (score) {
    double value = *score;
    if (value < -kClampMargin || value > 1.0 + kClampMargin) {
      fail(ErrorCode::kOutOfRangeScore, fmt::format("score {} is outside [0, 1]", value));
    }
    if (value < 0.0 || value > 1.0) {
      value = std::clamp(value, 0.0, 1.0);
      out.clamped = true;
    }
    out.score = value;
    out.source = ScoreSource::kDelimiter;
    const auto before = trim(text.substr(0, score_line_begin));
    if (!before.empty()) out.explanation = std::string(before);
    return out;
  }

  if (const auto v = last_standalone_unit_decimal(text)) {
    out.score = *v;
    out.source = ScoreSource::kFallback;
    const auto all = trim(text);
    if (!all.empty()) out.explanation = std::string(all);
    return out;
  }
  fail(ErrorCode::kUnparseableResponse, "no score found in reply");
}

Prediction parse(const RawResponse& raw, const PromptVariant& variant, std::string utterance_id) {
  const auto parsed = parse_score_text(raw.text);
  Prediction p;
  p.score = parsed.score;
  p.explanation = parsed.explanation;
  p.utterance_id = std::move(utterance_id);
  p.variant = variant;
  p.request_hash = raw.request_hash;
  p.source = parsed.source;
  p.clamped = parsed.clamped;
  return p;
}

std::string format_score_line(double score) { return fmt::format("SCORE: {}", score); }

}  // namespace pathoicl
