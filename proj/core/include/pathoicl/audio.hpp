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
#include <filesystem>
#include <span>
#include <vector>

#include "pathoicl/corpus.hpp"

namespace pathoicl {

inline constexpr int kTargetSampleRate = 16000;

/// Mono audio with amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kTargetSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

/// Throws InvalidArgument if the clip is empty, has a non-positive rate or
/// non-finite samples.
void validate(const AudioClip& clip);

/// Decoded RIFF/WAVE file, samples interleaved by channel.
struct WavData {
  int channels = 0;
  int sample_rate = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  std::vector<double> interleaved;

  std::size_t frames() const { return channels == 0 ? 0 : interleaved.size() / channels; }
  /// Extracts one channel (1-based).
  AudioClip channel(int index) const;
};

/// Decodes 16-bit PCM or 32-bit float WAV with 1-8 channels. Integer PCM is
/// divided by 2^15. Throws UnreadableAudio or UnsupportedEncoding.
WavData decode_wav(std::span<const std::uint8_t> bytes);
WavData read_wav(const std::filesystem::path& path);

/// 16-bit PCM encoders (round-to-nearest, clipped to full scale).
std::vector<std::uint8_t> encode_wav_pcm16(const AudioClip& clip);
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const double> interleaved, int channels,
                                           int sample_rate);
std::vector<std::uint8_t> encode_wav_float32(std::span<const double> interleaved, int channels,
                                             int sample_rate);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Reads the utterance's file and selects its configured channel, at the
/// file's native sample rate.
AudioClip load_audio(const UtteranceRecord& utterance);

/// Windowed-sinc band-limited resampler (64-tap Kaiser-windowed kernel).
/// Output length is floor(n * target / source). Equal rates return an
/// identical copy.
AudioClip resample(const AudioClip& clip, int target_rate);

/// load_audio followed by resampling to 16 kHz.
AudioClip load_audio_16k(const UtteranceRecord& utterance);

}  // namespace pathoicl
