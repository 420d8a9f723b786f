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

#include <complex>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pathoicl/corpus.hpp"
#include "pathoicl/fold_planner.hpp"

namespace pathoicl::testing {

/// O(n^2) DFT, bins 0..n/2.
std::vector<std::complex<double>> naive_dft(std::span<const double> x);

/// Count of window starts s with s + len <= n, by stepping.
std::size_t loop_segment_count(std::size_t n, std::size_t len, std::size_t hop);

/// Human-readable invariant violations for one fold; empty when sound.
std::vector<std::string> fold_violations(const Corpus& corpus, const FoldPlan& plan);

struct BruteCell {
  std::string variant_id;
  int k = 0;
  double mean = 0.0;
  double std = 0.0;
};

/// Score each planned test utterance of a finished run with `score_of`,
/// reading the fold plans under run_dir/fold-plans, and recompute every
/// cell with plain loops.
std::vector<BruteCell> brute_force_cells(const std::filesystem::path& run_dir, const Corpus& corpus,
                                         const std::vector<std::string>& variant_ids, const std::vector<int>& shots,
                                         int repeats,
                                         const std::function<double(const std::string& utterance_id)>& score_of);

}  // namespace pathoicl::testing
