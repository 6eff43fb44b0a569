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

#include "saasr/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include "saasr/bounded_queue.h"
#include "saasr/errors.h"
#include "saasr/ops.h"

namespace saasr {

namespace {

constexpr std::size_t kMaxTimeSpans = 2;
constexpr double kMaxTimeSpanFraction = 0.10;
constexpr double kMaxBandFraction = 0.25;

// Draws batches of example indices, reshuffling at every epoch boundary,
// and applies masking when enabled. Owns all randomness of the loop
// except dropout.
class BatchSource {
 public:
  BatchSource(std::span<const TrainExample> data, const TrainConfig& config)
      : data_(data), config_(config), rng_(config.seed), order_(data.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<TrainExample> Next() {
    std::vector<TrainExample> batch;
    batch.reserve(config_.batch_size);
    while (batch.size() < config_.batch_size) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      TrainExample ex = data_[order_[cursor_++]];
      if (config_.mask_augment) ex.features = MaskAugment(ex.features, rng_);
      batch.push_back(std::move(ex));
    }
    return batch;
  }

 private:
  std::span<const TrainExample> data_;
  const TrainConfig& config_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

bool GradientsFinite(const std::vector<NamedTensor>& params) {
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace

const char* StageName(TrainStage stage) {
  return stage == TrainStage::kAsrOnly ? "asr_only" : "joint";
}

TrainStage ParseStage(const std::string& name) {
  if (name == "asr_only") return TrainStage::kAsrOnly;
  if (name == "joint") return TrainStage::kJoint;
  throw ArgumentError("unknown stage '" + name + "' (expected asr_only or joint)");
}

void TrainConfig::Validate() const {
  if (!(peak_lr > 0.0)) throw ArgumentError("peak_lr must be positive");
  if (warmup_steps == 0) throw ArgumentError("warmup_steps must be >= 1");
  if (warmup_steps > total_steps && total_steps > 0) {
    throw ArgumentError("warmup_steps exceeds total_steps");
  }
  if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
  if (speaker_loss_weight < 0.0) {
    throw ArgumentError("speaker_loss_weight must be >= 0");
  }
  if (clip_norm < 0.0) throw ArgumentError("clip_norm must be >= 0");
}

double NoamLr(std::size_t step, const TrainConfig& config) {
  if (step == 0) throw ArgumentError("Noam schedule starts at step 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(config.warmup_steps);
  if (step == config.warmup_steps) return config.peak_lr;
  return config.peak_lr * std::min(s / w, std::sqrt(w / s));
}

LossTerms Loss(const SaAsrModel& model, std::span<const TrainExample> batch,
               TrainStage stage, double speaker_loss_weight,
               const ForwardOptions& options) {
  if (batch.empty()) throw ArgumentError("empty batch");
  const bool joint = stage == TrainStage::kJoint;
  Tensor token_sum, speaker_sum;
  std::size_t count = 0;
  for (const TrainExample& ex : batch) {
    ValidateTranscript(ex.transcript);
    const auto& y = ex.transcript.tokens;
    const EncoderStates states = joint ? model.Encode(ex.features, options)
                                       : EncoderStates{model.EncodeAsr(ex.features, options), Tensor()};
    const std::vector<std::size_t> input = DecoderInput(model.config(), y);
    DecoderOutputs out = model.Decode(
        input, states, ex.profiles,
        joint ? ProfileMode::kJoint : ProfileMode::kZeroProfile, options);
    Tensor t = Sum(PickColumns(out.token_log_probs, y));
    token_sum = token_sum.defined() ? Add(token_sum, t) : t;
    if (joint) {
      std::vector<std::size_t> s(ex.transcript.speakers.size());
      for (std::size_t n = 0; n < s.size(); ++n) {
        if (ex.transcript.speakers[n] > ex.profiles.rows()) {
          throw ArgumentError("speaker label exceeds profile count");
        }
        s[n] = ex.transcript.speakers[n] - 1;
      }
      Tensor sp = Sum(PickColumns(out.speaker_log_probs, s));
      speaker_sum = speaker_sum.defined() ? Add(speaker_sum, sp) : sp;
    }
    count += y.size();
  }
  const double inv = 1.0 / static_cast<double>(count);
  LossTerms terms;
  terms.tokens = count;
  terms.token_loss = -token_sum.item() * inv;
  Tensor total = token_sum;
  if (joint) {
    terms.speaker_loss = -speaker_sum.item() * inv;
    total = Add(total, Scale(speaker_sum, speaker_loss_weight));
  }
  terms.loss = Scale(total, -inv);
  return terms;
}

Tensor MaskAugment(const Tensor& features, std::mt19937_64& rng) {
  if (features.rank() != 2) throw ArgumentError("MaskAugment needs [frames, dims]");
  const std::size_t frames = features.rows(), dims = features.cols();
  if (frames < 4) throw ArgumentError("MaskAugment needs at least 4 frames");
  std::vector<double> x(features.values().begin(), features.values().end());
  const auto max_span = static_cast<std::size_t>(
      std::floor(kMaxTimeSpanFraction * static_cast<double>(frames)));
  const auto max_band = static_cast<std::size_t>(
      std::floor(kMaxBandFraction * static_cast<double>(dims)));
  std::uniform_int_distribution<std::size_t> span_count(0, kMaxTimeSpans);
  const std::size_t spans = span_count(rng);
  for (std::size_t i = 0; i < spans; ++i) {
    const std::size_t width =
        std::uniform_int_distribution<std::size_t>(0, max_span)(rng);
    const std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, frames - width)(rng);
    std::fill(x.begin() + start * dims, x.begin() + (start + width) * dims, 0.0);
  }
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) {
    const std::size_t width =
        std::uniform_int_distribution<std::size_t>(0, max_band)(rng);
    const std::size_t start =
        std::uniform_int_distribution<std::size_t>(0, dims - width)(rng);
    for (std::size_t r = 0; r < frames; ++r) {
      std::fill(x.begin() + r * dims + start, x.begin() + r * dims + start + width,
                0.0);
    }
  }
  return Tensor(features.shape(), std::move(x));
}

void AdamOptimizer::Step(std::vector<NamedTensor>& params, double lr) {
  if (m_.empty()) {
    for (const auto& [name, t] : params) {
      m_.emplace_back(t.size(), 0.0);
      v_.emplace_back(t.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw ArgumentError("optimizer bound to a different parameter list");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].second;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double ClipGradNorm(std::vector<NamedTensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [name, t] : params) {
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= f;
    }
  }
  return norm;
}

std::vector<TracePoint> TrainLoop(SaAsrModel& model,
                                  std::span<const TrainExample> data,
                                  const TrainConfig& config,
                                  const StepCallback& on_step) {
  config.Validate();
  if (config.total_steps > 0 && data.empty()) {
    throw ArgumentError("training data is empty");
  }
  auto& params = model.parameters();
  AdamOptimizer adam;
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  ForwardOptions options{model.config().dropout, &dropout_rng};
  BatchSource source(data, config);

  // Optional producer thread; the batch sequence is the same either way
  // because only the producer touches the batch generator.
  BoundedQueue<std::vector<TrainExample>> queue(std::max<std::size_t>(1, config.prefetch));
  std::thread producer;
  if (config.prefetch > 0 && config.total_steps > 0) {
    producer = std::thread([&] {
      for (std::size_t s = 0; s < config.total_steps; ++s) {
        if (!queue.Push(source.Next())) return;
      }
      queue.Close();
    });
  }
  struct Joiner {
    BoundedQueue<std::vector<TrainExample>>& q;
    std::thread& t;
    ~Joiner() {
      q.Close();
      if (t.joinable()) t.join();
    }
  } joiner{queue, producer};

  std::vector<TracePoint> trace;
  trace.reserve(config.total_steps);
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    std::vector<TrainExample> batch;
    if (config.prefetch > 0) {
      auto next = queue.Pop();
      if (!next) throw NumericError("batch producer stopped early");
      batch = std::move(*next);
    } else {
      batch = source.Next();
    }
    for (auto& [name, t] : params) t.ZeroGrad();
    TracePoint point;
    point.step = step;
    point.lr = NoamLr(step, config);
    {
      Tape tape;
      LossTerms terms = Loss(model, batch, config.stage,
                             config.speaker_loss_weight, options);
      point.loss = terms.loss.item();
      point.token_loss = terms.token_loss;
      point.speaker_loss = terms.speaker_loss;
      if (!std::isfinite(point.loss)) {
        throw NumericError("non-finite loss at step " + std::to_string(step) +
                           " (token " + std::to_string(point.token_loss) +
                           ", speaker " + std::to_string(point.speaker_loss) +
                           ", lr " + std::to_string(point.lr) + ")");
      }
      tape.Backward(terms.loss);
    }
    if (!GradientsFinite(params)) {
      throw NumericError("non-finite gradient at step " + std::to_string(step));
    }
    ClipGradNorm(params, config.clip_norm);
    adam.Step(params, point.lr);
    trace.push_back(point);
    if (on_step && !on_step(point)) break;
  }
  return trace;
}

void WriteTraceCsv(const std::string& path, std::span<const TracePoint> trace) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "step,lr,loss,token_loss,speaker_loss\n";
  char buf[160];
  for (const TracePoint& p : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", p.step,
                  p.lr, p.loss, p.token_loss, p.speaker_loss);
    out << buf;
  }
}

}  // namespace saasr
