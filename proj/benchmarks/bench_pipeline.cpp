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

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>
#include <fmt/format.h>

#include "pathoicl/audio.hpp"
#include "pathoicl/dsp.hpp"
#include "pathoicl/render.hpp"
#include "pathoicl/response_parser.hpp"

namespace {

using namespace pathoicl;

AudioClip chirp(std::size_t n, int rate) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  const double duration = static_cast<double>(n) / rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    clip.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * (100.0 * t + 3000.0 * t * t / (2.0 * duration)));
  }
  return clip;
}

void BM_Stft(benchmark::State& state) {
  const auto clip = chirp(static_cast<std::size_t>(state.range(0)), 16000);
  const StftConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(stft_log_magnitude(clip, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Stft)->Arg(16000)->Arg(160000);

void BM_Resample44k(benchmark::State& state) {
  const auto clip = chirp(44100, 44100);
  for (auto _ : state) benchmark::DoNotOptimize(resample(clip, 16000));
  state.SetItemsProcessed(state.iterations() * 44100);
}
BENCHMARK(BM_Resample44k);

void BM_RenderPng(benchmark::State& state) {
  const auto spec = stft_log_magnitude(chirp(16000, 16000), StftConfig{});
  const RenderConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(encode_png(render_image(spec, cfg)));
}
BENCHMARK(BM_RenderPng);

void BM_Segments(benchmark::State& state) {
  const auto clip = chirp(48000, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(segment_utterance(clip, StftConfig{}));
}
BENCHMARK(BM_Segments);

void BM_ParseScore(benchmark::State& state) {
  std::vector<std::string> replies;
  for (int i = 0; i < 64; ++i) {
    replies.push_back(fmt::format("The formant transitions look {} than the references.\nSCORE: {}",
                                  i % 2 ? "smoother" : "more irregular", i / 64.0));
  }
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(parse_score_text(replies[i++ % replies.size()]));
}
BENCHMARK(BM_ParseScore);

}  // namespace

BENCHMARK_MAIN();
