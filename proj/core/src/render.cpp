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

#include "pathoicl/render.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <png.h>

#include "pathoicl/error.hpp"
#include "viridis_lut.hpp"

namespace pathoicl {
namespace {

constexpr double kNepersToDb = 20.0 / std::numbers::ln10;

std::array<std::uint8_t, 3> colorize(const std::string& colormap, std::uint8_t level) {
  if (colormap == "gray") return {level, level, level};
  return detail::kViridis[level];
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_error_throw(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what != nullptr) *what = message;
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->pos + length > cursor->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(data, cursor->bytes.data() + cursor->pos, length);
  cursor->pos += length;
}

}  // namespace

void RenderConfig::validate() const {
  if (!(db_range > 0.0)) fail(ErrorCode::kInvalidArgument, "db_range must be positive");
  if (min_side < 0) fail(ErrorCode::kInvalidArgument, "min_side must be >= 0");
  if (colormap != "viridis" && colormap != "gray") {
    fail(ErrorCode::kInvalidArgument, fmt::format("unknown colormap '{}'", colormap));
  }
}

SpectrogramImage render_image(const Spectrogram& spec, const RenderConfig& cfg) {
  cfg.validate();
  if (spec.values.empty()) fail(ErrorCode::kInvalidArgument, "empty spectrogram");
  Matrix values = spec.values;
  if (cfg.normalize) normalize_in_place(values);

  double top = 0.0;
  if (cfg.reference_db) {
    top = *cfg.reference_db;
  } else {
    top = -std::numeric_limits<double>::infinity();
    for (const double v : values.data()) top = std::max(top, v * kNepersToDb);
  }
  const double low = top - cfg.db_range;

  const auto frames = static_cast<int>(values.rows());
  const auto bins = static_cast<int>(values.cols());
  const int sx = cfg.min_side > 0 ? std::max(1, (cfg.min_side + frames - 1) / frames) : 1;
  const int sy = cfg.min_side > 0 ? std::max(1, (cfg.min_side + bins - 1) / bins) : 1;

  SpectrogramImage image;
  image.width = frames * sx;
  image.height = bins * sy;
  image.colormap_id = cfg.colormap;
  image.db_range = cfg.db_range;
  image.levels.resize(static_cast<std::size_t>(image.width) * image.height);
  image.rgb.resize(image.levels.size() * 3);

  for (int f = 0; f < frames; ++f) {
    for (int b = 0; b < bins; ++b) {
      const double db = std::clamp(values(f, b) * kNepersToDb, low, top);
      const double unit = (db - low) / cfg.db_range;
      const auto level = static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
      const auto color = colorize(cfg.colormap, level);
      const int y0 = (bins - 1 - b) * sy;
      for (int dy = 0; dy < sy; ++dy) {
        for (int dx = 0; dx < sx; ++dx) {
          const auto idx = static_cast<std::size_t>(y0 + dy) * image.width + (f * sx + dx);
          image.levels[idx] = level;
          std::copy(color.begin(), color.end(), image.rgb.begin() + static_cast<std::ptrdiff_t>(idx * 3));
        }
      }
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_png(int width, int height, std::span<const std::uint8_t> rgb) {
  if (width <= 0 || height <= 0 ||
      rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    fail(ErrorCode::kInvalidArgument, "RGB buffer does not match image dimensions");
  }
  std::string what;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what, png_error_throw,
                                            png_warning_ignore);
  if (png == nullptr) fail(ErrorCode::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIoError, fmt::format("PNG encoding failed: {}", what));
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3);
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::vector<std::uint8_t> encode_png(const SpectrogramImage& image) {
  return encode_png(image.width, image.height, image.rgb);
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    fail(ErrorCode::kInvalidArgument, "not a PNG image");
  }
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what, png_error_throw,
                                           png_warning_ignore);
  if (png == nullptr) fail(ErrorCode::kIoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};
  RgbImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kInvalidArgument, fmt::format("PNG decoding failed: {}", what));
  }
  png_set_read_fn(png, &cursor, png_read_from_span);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.rgb.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  rows.resize(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    rows[static_cast<std::size_t>(y)] = image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

RgbImage downscale_half(const RgbImage& image) {
  RgbImage out;
  out.width = std::max(1, image.width / 2);
  out.height = std::max(1, image.height / 2);
  out.rgb.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = std::min(image.width - 1, 2 * x + dx);
            const int sy = std::min(image.height - 1, 2 * y + dy);
            sum += image.rgb[(static_cast<std::size_t>(sy) * image.width + sx) * 3 + c];
            ++n;
          }
        }
        out.rgb[(static_cast<std::size_t>(y) * out.width + x) * 3 + c] =
            static_cast<std::uint8_t>((sum + n / 2) / n);
      }
    }
  }
  return out;
}

}  // namespace pathoicl
