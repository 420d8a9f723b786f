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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pathoicl/audio.hpp"

namespace pathoicl {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class WindowKind { kHann };

struct StftConfig {
  double window_ms = 10.0;
  /// Equal to window_ms means no overlap.
  double hop_ms = 10.0;
  int sample_rate = kTargetSampleRate;
  WindowKind window = WindowKind::kHann;

  std::size_t window_length() const;
  std::size_t hop_length() const;
  std::size_t bins() const { return window_length() / 2 + 1; }
  void validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// Added to |X| before the logarithm so silence stays finite.
inline constexpr double kLogFloor = 1e-10;

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Log-magnitude STFT: rows are frames, columns one-sided frequency bins.
struct Spectrogram {
  Matrix values;
  std::size_t frame_hop_samples = 0;
  double bin_hz = 0.0;
  std::string source_utterance;

  std::size_t frames() const noexcept { return values.rows(); }
  std::size_t bins() const noexcept { return values.cols(); }
};

/// Number of complete frames of `window` samples at `hop` spacing.
std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop);

/// Linear one-sided STFT magnitudes |DFT(hann * frame)|, no log. Trailing
/// samples that do not fill a window are dropped. Throws ClipTooShort.
Matrix stft_magnitude(std::span<const double> samples, const StftConfig& cfg);

/// log(|DFT(hann * frame)| + kLogFloor). Requires clip.sample_rate ==
/// cfg.sample_rate. Throws ClipTooShort or InvalidArgument.
Spectrogram stft_log_magnitude(const AudioClip& clip, const StftConfig& cfg,
                               std::string source_utterance = {});

struct SegmentConfig {
  double segment_ms = 500.0;
  double segment_hop_ms = 250.0;
  /// Clips shorter than one segment are zero-padded to a single flagged
  /// segment; when false they raise ClipTooShort instead.
  bool pad_short = true;
  bool normalize = true;
};

struct Segment {
  Matrix values;
  std::size_t start_sample = 0;
  bool normalized = false;
  bool padded = false;
};

std::size_t segment_count(std::size_t n_samples, std::size_t segment_len, std::size_t segment_hop);

/// Splits the clip into overlapping fixed-length windows and transforms each
/// independently (log-magnitude STFT, then joint mean/std normalization).
std::vector<Segment> segment_utterance(const AudioClip& clip, const StftConfig& cfg,
                                       const SegmentConfig& seg = {});

/// Zero mean, unit population std over all cells. Constant input is only
/// centered. Returns false in that case.
bool normalize_in_place(Matrix& m);

/// Little-endian float32 matrix dump read by the CNN baseline:
///   magic "PSPC", u32 version (1), u32 rows, u32 cols, u32 hop_samples,
///   f64 bin_hz, then rows*cols float32 values, row-major.
struct SpectrogramDump {
  Matrix values;
  std::uint32_t hop_samples = 0;
  double bin_hz = 0.0;
};

void write_spectrogram_dump(std::ostream& out, const Matrix& values, std::uint32_t hop_samples,
                            double bin_hz);
SpectrogramDump read_spectrogram_dump(std::istream& in);

}  // namespace pathoicl
