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

#include "pathoicl/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "pathoicl/error.hpp"

namespace pathoicl {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV codec assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::vector<std::uint8_t> wav_header(std::uint16_t format, int channels, int sample_rate,
                                     int bits, std::size_t data_bytes) {
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + data_bytes));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  const auto block_align = static_cast<std::uint16_t>(channels * bits / 8);
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * block_align);
  put_u16(out, block_align);
  put_u16(out, static_cast<std::uint16_t>(bits));
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(data_bytes));
  return out;
}

// Zeroth-order modified Bessel function of the first kind (power series).
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

constexpr int kHalfTaps = 32;  // 64-tap kernel
constexpr double kKaiserBeta = 8.6;
constexpr double kPassbandFraction = 0.94;

class SincKernel {
 public:
  explicit SincKernel(double cutoff) : cutoff_(cutoff), i0_beta_(bessel_i0(kKaiserBeta)) {}

  // Fills 2*kHalfTaps weights for output lying `frac` input samples past
  // tap index kHalfTaps-1; weights are normalized to unit DC gain.
  void weights(double frac, std::span<double> out) const {
    double total = 0.0;
    for (int j = 0; j < 2 * kHalfTaps; ++j) {
      const double x = static_cast<double>(j - (kHalfTaps - 1)) - frac;
      const double u = x / static_cast<double>(kHalfTaps);
      double w = 0.0;
      if (std::abs(u) < 1.0) {
        const double arg = std::numbers::pi * 2.0 * cutoff_ * x;
        const double sinc = x == 0.0 ? 1.0 : std::sin(arg) / arg;
        w = 2.0 * cutoff_ * sinc * bessel_i0(kKaiserBeta * std::sqrt(1.0 - u * u)) / i0_beta_;
      }
      out[static_cast<std::size_t>(j)] = w;
      total += w;
    }
    if (total != 0.0) {
      for (auto& w : out) w /= total;
    }
  }

 private:
  double cutoff_;
  double i0_beta_;
};

}  // namespace

void validate(const AudioClip& clip) {
  if (clip.samples.empty()) fail(ErrorCode::kInvalidArgument, "audio clip is empty");
  if (clip.sample_rate <= 0) fail(ErrorCode::kInvalidArgument, "sample rate must be positive");
  for (const double s : clip.samples) {
    if (!std::isfinite(s)) fail(ErrorCode::kInvalidArgument, "audio clip contains non-finite samples");
  }
}

AudioClip WavData::channel(int index) const {
  if (index < 1 || index > channels) {
    fail(ErrorCode::kUnsupportedEncoding,
         fmt::format("channel {} requested from a {}-channel file", index, channels));
  }
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(frames());
  const auto c = static_cast<std::size_t>(index - 1);
  const auto stride = static_cast<std::size_t>(channels);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = interleaved[i * stride + c];
  return clip;
}

WavData decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorCode::kUnreadableAudio, "missing RIFF/WAVE header");
  }
  WavData wav;
  std::uint16_t format = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      fail(ErrorCode::kUnreadableAudio, "chunk extends past end of file (truncated?)");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) fail(ErrorCode::kUnreadableAudio, "fmt chunk too short");
      const auto* f = bytes.data() + body;
      format = read_u16(f);
      wav.channels = read_u16(f + 2);
      wav.sample_rate = static_cast<int>(read_u32(f + 4));
      wav.bits_per_sample = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) fail(ErrorCode::kUnreadableAudio, "extensible fmt chunk too short");
        format = read_u16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt || !have_data) fail(ErrorCode::kUnreadableAudio, "missing fmt or data chunk");
  if (wav.channels < 1 || wav.channels > 8) {
    fail(ErrorCode::kUnsupportedEncoding, fmt::format("{} channels (1-8 supported)", wav.channels));
  }
  if (wav.sample_rate <= 0) fail(ErrorCode::kUnreadableAudio, "non-positive sample rate");

  if (format == kFormatPcm && wav.bits_per_sample == 16) {
    wav.interleaved.resize(data.size() / 2);
    for (std::size_t i = 0; i < wav.interleaved.size(); ++i) {
      const auto raw = static_cast<std::int16_t>(read_u16(data.data() + 2 * i));
      wav.interleaved[i] = static_cast<double>(raw) / 32768.0;
    }
  } else if (format == kFormatFloat && wav.bits_per_sample == 32) {
    wav.is_float = true;
    wav.interleaved.resize(data.size() / 4);
    for (std::size_t i = 0; i < wav.interleaved.size(); ++i) {
      const auto v = std::bit_cast<float>(read_u32(data.data() + 4 * i));
      if (!std::isfinite(v)) fail(ErrorCode::kUnreadableAudio, "non-finite float sample");
      wav.interleaved[i] = std::clamp(static_cast<double>(v), -1.0, 1.0);
    }
  } else {
    fail(ErrorCode::kUnsupportedEncoding,
         fmt::format("format tag {} with {} bits per sample (16-bit PCM or 32-bit float only)",
                     format, wav.bits_per_sample));
  }
  wav.interleaved.resize(wav.frames() * static_cast<std::size_t>(wav.channels));
  if (wav.interleaved.empty()) fail(ErrorCode::kUnreadableAudio, "no audio frames");
  return wav;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, fmt::format("cannot write '{}'", path.string()));
}

WavData read_wav(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::kUnreadableAudio, e.what());
  }
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const double> interleaved, int channels,
                                           int sample_rate) {
  auto out = wav_header(kFormatPcm, channels, sample_rate, 16, interleaved.size() * 2);
  for (const double s : interleaved) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  return encode_wav_pcm16(clip.samples, 1, clip.sample_rate);
}

std::vector<std::uint8_t> encode_wav_float32(std::span<const double> interleaved, int channels,
                                             int sample_rate) {
  auto out = wav_header(kFormatFloat, channels, sample_rate, 32, interleaved.size() * 4);
  for (const double s : interleaved) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
  return out;
}

AudioClip load_audio(const UtteranceRecord& utterance) {
  auto clip = read_wav(utterance.audio_path).channel(utterance.channel);
  validate(clip);
  return clip;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail(ErrorCode::kInvalidArgument, "target rate must be positive");
  if (clip.sample_rate <= 0) fail(ErrorCode::kInvalidArgument, "source rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const auto src = static_cast<std::int64_t>(clip.sample_rate);
  const auto dst = static_cast<std::int64_t>(target_rate);
  const auto n_in = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t n_out = n_in * dst / src;

  // Cutoff in cycles per input sample, below the lower of the two Nyquists.
  const double cutoff =
      0.5 * kPassbandFraction * std::min(1.0, static_cast<double>(dst) / static_cast<double>(src));
  const SincKernel kernel(cutoff);

  // The fractional offset of output m is ((m*src) mod dst)/dst, so there are
  // at most dst/gcd distinct phases; tabulate them when that is small.
  const std::int64_t g = std::gcd(src, dst);
  const std::int64_t step = dst / g;
  constexpr std::int64_t kMaxTabulatedPhases = 4096;
  std::vector<double> table;
  if (step <= kMaxTabulatedPhases) {
    table.resize(static_cast<std::size_t>(step * 2 * kHalfTaps));
    for (std::int64_t p = 0; p < step; ++p) {
      kernel.weights(static_cast<double>(p) / static_cast<double>(step),
                     std::span(table).subspan(static_cast<std::size_t>(p * 2 * kHalfTaps),
                                              2 * kHalfTaps));
    }
  }

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  std::array<double, 2 * kHalfTaps> scratch{};
  for (std::int64_t m = 0; m < n_out; ++m) {
    const std::int64_t num = m * src;
    const std::int64_t base = num / dst;
    const std::int64_t rem = num % dst;
    std::span<const double> w;
    if (!table.empty()) {
      const std::int64_t phase = rem / g;
      w = std::span<const double>(table).subspan(static_cast<std::size_t>(phase * 2 * kHalfTaps),
                                                 2 * kHalfTaps);
    } else {
      kernel.weights(static_cast<double>(rem) / static_cast<double>(dst), scratch);
      w = scratch;
    }
    double acc = 0.0;
    for (int j = 0; j < 2 * kHalfTaps; ++j) {
      const std::int64_t idx = base + j - (kHalfTaps - 1);
      if (idx >= 0 && idx < n_in) acc += w[static_cast<std::size_t>(j)] * clip.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[static_cast<std::size_t>(m)] = std::clamp(acc, -1.0, 1.0);
  }
  return out;
}

AudioClip load_audio_16k(const UtteranceRecord& utterance) {
  return resample(load_audio(utterance), kTargetSampleRate);
}

}  // namespace pathoicl
