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

#include "pathoicl/dsp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>

#include <fftw3.h>
#include <fmt/format.h>

#include "pathoicl/error.hpp"

namespace pathoicl {
namespace {

// fftw_plan creation is not thread-safe; execution with new-array
// functions is. Plans are created once per size and kept for the process.
class RealDftPlans {
 public:
  static RealDftPlans& instance() {
    static RealDftPlans plans;
    return plans;
  }

  fftw_plan get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, plan);
    return plan;
  }

 private:
  RealDftPlans() = default;
  ~RealDftPlans() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

struct FftwRealDeleter {
  void operator()(double* p) const { fftw_free(p); }
};
struct FftwComplexDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

std::size_t ms_to_samples(double ms, int sample_rate) {
  return static_cast<std::size_t>(std::llround(ms * static_cast<double>(sample_rate) / 1000.0));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) fail(ErrorCode::kIoError, "truncated spectrogram dump");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::size_t StftConfig::window_length() const { return ms_to_samples(window_ms, sample_rate); }
std::size_t StftConfig::hop_length() const { return ms_to_samples(hop_ms, sample_rate); }

void StftConfig::validate() const {
  if (!(window_ms > 0.0)) fail(ErrorCode::kInvalidArgument, "window_ms must be positive");
  if (!(hop_ms > 0.0)) fail(ErrorCode::kInvalidArgument, "hop_ms must be positive");
  if (sample_rate <= 0) fail(ErrorCode::kInvalidArgument, "sample_rate must be positive");
  if (window_length() < 2) fail(ErrorCode::kInvalidArgument, "window must span at least 2 samples");
  if (hop_length() < 1) fail(ErrorCode::kInvalidArgument, "hop must span at least 1 sample");
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t frame_count(std::size_t n_samples, std::size_t window, std::size_t hop) {
  if (n_samples < window || hop == 0) return 0;
  return (n_samples - window) / hop + 1;
}

Matrix stft_magnitude(std::span<const double> samples, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_length();
  const std::size_t hop = cfg.hop_length();
  const std::size_t frames = frame_count(samples.size(), win, hop);
  if (frames == 0) {
    fail(ErrorCode::kClipTooShort,
         fmt::format("{} samples is shorter than one {}-sample window", samples.size(), win));
  }
  const std::size_t bins = win / 2 + 1;
  const auto window = hann_window(win);

  std::unique_ptr<double, FftwRealDeleter> in(fftw_alloc_real(win));
  std::unique_ptr<fftw_complex, FftwComplexDeleter> out(fftw_alloc_complex(bins));
  fftw_plan plan = RealDftPlans::instance().get(win);

  Matrix mag(frames, bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* frame = samples.data() + f * hop;
    for (std::size_t i = 0; i < win; ++i) in.get()[i] = frame[i] * window[i];
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    auto row = mag.row(f);
    for (std::size_t k = 0; k < bins; ++k) row[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
  }
  return mag;
}

Spectrogram stft_log_magnitude(const AudioClip& clip, const StftConfig& cfg,
                               std::string source_utterance) {
  if (clip.sample_rate != cfg.sample_rate) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("clip is {} Hz but STFT expects {} Hz", clip.sample_rate, cfg.sample_rate));
  }
  Spectrogram spec;
  spec.values = stft_magnitude(clip.samples, cfg);
  for (auto& v : spec.values.data()) v = std::log(v + kLogFloor);
  spec.frame_hop_samples = cfg.hop_length();
  spec.bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.window_length());
  spec.source_utterance = std::move(source_utterance);
  return spec;
}

std::size_t segment_count(std::size_t n_samples, std::size_t segment_len, std::size_t segment_hop) {
  return frame_count(n_samples, segment_len, segment_hop);
}

bool normalize_in_place(Matrix& m) {
  auto data = m.data();
  if (data.empty()) return false;
  const double n = static_cast<double>(data.size());
  double mean = 0.0;
  for (const double v : data) mean += v;
  mean /= n;
  double var = 0.0;
  for (const double v : data) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (!(sd > 0.0)) {
    for (auto& v : data) v -= mean;
    return false;
  }
  for (auto& v : data) v = (v - mean) / sd;
  return true;
}

std::vector<Segment> segment_utterance(const AudioClip& clip, const StftConfig& cfg,
                                       const SegmentConfig& seg) {
  if (clip.sample_rate != cfg.sample_rate) {
    fail(ErrorCode::kInvalidArgument,
         fmt::format("clip is {} Hz but STFT expects {} Hz", clip.sample_rate, cfg.sample_rate));
  }
  const std::size_t seg_len = ms_to_samples(seg.segment_ms, cfg.sample_rate);
  const std::size_t seg_hop = ms_to_samples(seg.segment_hop_ms, cfg.sample_rate);
  if (seg_len < cfg.window_length() || seg_hop == 0) {
    fail(ErrorCode::kInvalidArgument, "segment must hold at least one STFT window");
  }

  auto transform = [&](std::span<const double> samples, std::size_t start, bool padded) {
    Segment s;
    s.values = stft_magnitude(samples, cfg);
    for (auto& v : s.values.data()) v = std::log(v + kLogFloor);
    s.start_sample = start;
    s.padded = padded;
    s.normalized = seg.normalize && normalize_in_place(s.values);
    return s;
  };

  std::vector<Segment> out;
  const std::size_t n = clip.samples.size();
  if (n < seg_len) {
    if (!seg.pad_short) {
      fail(ErrorCode::kClipTooShort,
           fmt::format("{} samples is shorter than one {}-sample segment", n, seg_len));
    }
    std::vector<double> padded(seg_len, 0.0);
    std::copy(clip.samples.begin(), clip.samples.end(), padded.begin());
    out.push_back(transform(padded, 0, true));
    return out;
  }
  const std::size_t count = segment_count(n, seg_len, seg_hop);
  out.reserve(count);
  const std::span<const double> all(clip.samples);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(transform(all.subspan(i * seg_hop, seg_len), i * seg_hop, false));
  }
  return out;
}

void write_spectrogram_dump(std::ostream& out, const Matrix& values, std::uint32_t hop_samples,
                            double bin_hz) {
  out.write("PSPC", 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(values.rows()));
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  put_u32(out, hop_samples);
  const auto hz = std::bit_cast<std::uint64_t>(bin_hz);
  put_u32(out, static_cast<std::uint32_t>(hz & 0xFFFFFFFFU));
  put_u32(out, static_cast<std::uint32_t>(hz >> 32));
  for (const double v : values.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!out) fail(ErrorCode::kIoError, "failed writing spectrogram dump");
}

SpectrogramDump read_spectrogram_dump(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PSPC", 4) != 0) fail(ErrorCode::kIoError, "not a spectrogram dump");
  if (get_u32(in) != 1) fail(ErrorCode::kIoError, "unsupported spectrogram dump version");
  const auto rows = get_u32(in);
  const auto cols = get_u32(in);
  SpectrogramDump dump;
  dump.hop_samples = get_u32(in);
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  dump.bin_hz = std::bit_cast<double>(lo | (hi << 32));
  dump.values = Matrix(rows, cols);
  for (auto& v : dump.values.data()) v = static_cast<double>(std::bit_cast<float>(get_u32(in)));
  return dump;
}

}  // namespace pathoicl
