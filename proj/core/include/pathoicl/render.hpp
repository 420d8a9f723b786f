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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathoicl/dsp.hpp"

namespace pathoicl {

struct RenderConfig {
  /// Dynamic range kept below the top level, in dB of magnitude.
  double db_range = 80.0;
  /// Fixed top level in dB. When unset the image maximum is used, which makes
  /// each image self-scaled.
  std::optional<double> reference_db;
  /// Nearest-neighbour integer upscaling until both sides reach this many
  /// pixels; 0 keeps one pixel per (frame, bin).
  int min_side = 512;
  /// Apply joint mean/std normalization to the spectrogram before rendering.
  bool normalize = false;
  std::string colormap = "viridis";

  void validate() const;
  friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

/// Raster with time on x and frequency ascending upward (row 0 is the
/// highest bin). `levels` holds the 0-255 intensity each pixel was colored by.
struct SpectrogramImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> levels;
  std::vector<std::uint8_t> rgb;
  std::string colormap_id;
  double db_range = 0.0;

  std::uint8_t level(int x, int y) const { return levels[static_cast<std::size_t>(y) * width + x]; }
};

SpectrogramImage render_image(const Spectrogram& spec, const RenderConfig& cfg);

/// 8-bit RGB PNG, fixed encoder settings so equal images give equal bytes.
std::vector<std::uint8_t> encode_png(int width, int height, std::span<const std::uint8_t> rgb);
std::vector<std::uint8_t> encode_png(const SpectrogramImage& image);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

RgbImage decode_png(std::span<const std::uint8_t> bytes);

/// 2x2 box-filter downscale.
RgbImage downscale_half(const RgbImage& image);

}  // namespace pathoicl
