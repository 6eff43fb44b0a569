// Copyright (c) 2026 The saasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Slow reference implementations used to cross-check the fast paths.

#ifndef SAASR_TOOLS_ORACLES_H_
#define SAASR_TOOLS_ORACLES_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "saasr/metrics.h"
#include "saasr/model.h"
#include "saasr/train.h"

namespace saasr::oracle {

struct DedupOptimum {
  double score;
  std::vector<std::size_t> speakers;  // 1-based; first optimum in
                                      // lexicographic order
};

// Enumerates all K^M speaker sequences without adjacent repeats.
DedupOptimum BruteForceDedup(const std::vector<std::vector<double>>& scores);

// Tries every partial injective map from hypothesis streams to reference
// speakers; unmapped hypothesis words are insertions and unmapped
// reference words deletions.
std::size_t BruteForceCpwerErrors(const std::map<std::string, TokenSeq>& ref,
                                  const std::map<std::string, TokenSeq>& hyp);

struct GradientCheck {
  std::string worst_parameter;
  double max_relative_error = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  std::size_t groups_checked = 0;
};

// Adds N(0, stddev^2) noise to every parameter so a check runs at a
// generic point; zero-initialized biases otherwise leave ReLU inputs
// sitting exactly on the kink.
void JitterParameters(SaAsrModel& model, double stddev, std::uint64_t seed);

// Central differences of Loss() for `per_tensor` entries of every
// parameter tensor that receives a gradient in `stage`. Relative error per
// entry is |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradientCheck CheckGradients(SaAsrModel& model,
                             std::span<const TrainExample> batch,
                             TrainStage stage, double speaker_loss_weight,
                             std::size_t per_tensor, std::uint64_t seed,
                             double step = 1e-5, double floor = 1e-6);

}  // namespace saasr::oracle

#endif  // SAASR_TOOLS_ORACLES_H_
