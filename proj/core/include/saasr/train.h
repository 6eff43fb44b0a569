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

#ifndef SAASR_TRAIN_H_
#define SAASR_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "saasr/model.h"
#include "saasr/sot.h"
#include "saasr/tensor.h"

namespace saasr {

enum class TrainStage {
  kAsrOnly,  // weighted profile fixed at 0, speaker block untouched
  kJoint,
};

const char* StageName(TrainStage stage);
// Accepts "asr_only" and "joint"; throws ArgumentError otherwise.
TrainStage ParseStage(const std::string& name);

struct TrainConfig {
  TrainStage stage = TrainStage::kAsrOnly;
  double peak_lr = 1e-3;
  std::size_t warmup_steps = 1000;
  std::size_t total_steps = 10000;
  std::size_t batch_size = 8;
  bool mask_augment = false;
  double speaker_loss_weight = 1.0;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;  // global gradient norm; 0 disables
  // Batches prepared ahead on a producer thread; 0 prepares inline.
  std::size_t prefetch = 0;

  void Validate() const;
};

// peak_lr * min(step / warmup, sqrt(warmup / step)). step >= 1.
double NoamLr(std::size_t step, const TrainConfig& config);

struct TrainExample {
  Tensor features;           // [l^a, f^a]
  SotTranscript transcript;
  Tensor profiles;           // [K, f^d]
};

struct LossTerms {
  Tensor loss;                // differentiable mean
  double token_loss = 0.0;    // mean -log o_{n, y_n}
  double speaker_loss = 0.0;  // mean -log beta_{n, s_n}; 0 in asr_only
  std::size_t tokens = 0;
};

// Mean over every token position of the batch. asr_only: -log o with the
// weighted profile forced to 0. joint: -log o - weight * log beta.
LossTerms Loss(const SaAsrModel& model, std::span<const TrainExample> batch,
               TrainStage stage, double speaker_loss_weight,
               const ForwardOptions& options = {});

// Zeroes up to 2 time spans (each at most 10% of the frames) and up to one
// feature band (at most 25% of the features). Needs at least 4 frames.
Tensor MaskAugment(const Tensor& features, std::mt19937_64& rng);

// Adam with the Noam-paired constants.
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Updates every parameter that received a gradient this step.
  void Step(std::vector<NamedTensor>& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Rescales gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double ClipGradNorm(std::vector<NamedTensor>& params, double max_norm);

struct TracePoint {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double token_loss = 0.0;
  double speaker_loss = 0.0;
};

// Called after every step; returning false stops training early.
using StepCallback = std::function<bool(const TracePoint&)>;

// Runs config.total_steps updates on batches drawn by reshuffling `data`
// every epoch. Throws NumericError if the loss or a gradient goes
// non-finite.
std::vector<TracePoint> TrainLoop(SaAsrModel& model,
                                  std::span<const TrainExample> data,
                                  const TrainConfig& config,
                                  const StepCallback& on_step = {});

// step,lr,loss,token_loss,speaker_loss with full double precision.
void WriteTraceCsv(const std::string& path, std::span<const TracePoint> trace);

}  // namespace saasr

#endif  // SAASR_TRAIN_H_
