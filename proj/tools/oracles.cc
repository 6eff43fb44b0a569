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

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "saasr/errors.h"

namespace saasr::oracle {

DedupOptimum BruteForceDedup(const std::vector<std::vector<double>>& scores) {
  const std::size_t m = scores.size();
  DedupOptimum best{-std::numeric_limits<double>::infinity(), {}};
  if (m == 0) return {0.0, {}};
  const std::size_t k = scores[0].size();
  std::vector<std::size_t> seq(m, 0);
  // Odometer over K^M sequences in lexicographic order.
  while (true) {
    bool valid = true;
    for (std::size_t i = 1; i < m && valid; ++i) valid = seq[i] != seq[i - 1];
    if (valid) {
      double total = 0.0;
      for (std::size_t i = 0; i < m; ++i) total += scores[i][seq[i]];
      if (total > best.score) {
        best.score = total;
        best.speakers.clear();
        for (std::size_t s : seq) best.speakers.push_back(s + 1);
      }
    }
    std::size_t pos = m;
    while (pos > 0) {
      --pos;
      if (++seq[pos] < k) break;
      seq[pos] = 0;
      if (pos == 0) return best;
    }
  }
}

namespace {

void MapStreams(const std::vector<const TokenSeq*>& refs,
                const std::vector<const TokenSeq*>& hyps, std::size_t i,
                std::vector<bool>& used, std::size_t acc, std::size_t& best) {
  if (acc >= best) return;
  if (i == refs.size()) {
    for (std::size_t j = 0; j < hyps.size(); ++j) {
      if (!used[j]) acc += hyps[j]->size();
    }
    best = std::min(best, acc);
    return;
  }
  MapStreams(refs, hyps, i + 1, used, acc + refs[i]->size(), best);
  for (std::size_t j = 0; j < hyps.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    MapStreams(refs, hyps, i + 1, used, acc + EditDistance(*refs[i], *hyps[j]),
               best);
    used[j] = false;
  }
}

}  // namespace

std::size_t BruteForceCpwerErrors(const std::map<std::string, TokenSeq>& ref,
                                  const std::map<std::string, TokenSeq>& hyp) {
  std::vector<const TokenSeq*> refs, hyps;
  for (const auto& [k, v] : ref) refs.push_back(&v);
  for (const auto& [k, v] : hyp) hyps.push_back(&v);
  std::vector<bool> used(hyps.size(), false);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  MapStreams(refs, hyps, 0, used, 0, best);
  return best;
}

void JitterParameters(SaAsrModel& model, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  for (auto& [name, t] : model.parameters()) {
    for (double& w : t.mutable_values()) w += noise(rng);
  }
}

GradientCheck CheckGradients(SaAsrModel& model,
                             std::span<const TrainExample> batch,
                             TrainStage stage, double speaker_loss_weight,
                             std::size_t per_tensor, std::uint64_t seed,
                             double step, double floor) {
  auto& params = model.parameters();
  for (auto& [name, t] : params) t.ZeroGrad();
  {
    Tape tape;
    LossTerms terms = Loss(model, batch, stage, speaker_loss_weight);
    tape.Backward(terms.loss);
  }
  auto loss_value = [&] {
    return Loss(model, batch, stage, speaker_loss_weight).loss.item();
  };
  std::mt19937_64 rng(seed);
  GradientCheck out;
  for (auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    ++out.groups_checked;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto w = t.mutable_values();
    std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
    for (std::size_t s = 0; s < std::min(per_tensor, w.size()); ++s) {
      const std::size_t i = per_tensor >= w.size() ? s : pick(rng);
      const double orig = w[i];
      w[i] = orig + step;
      const double plus = loss_value();
      w[i] = orig - step;
      const double minus = loss_value();
      w[i] = orig;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++out.entries_checked;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst_parameter = name + "[" + std::to_string(i) + "]";
        out.worst_analytic = analytic[i];
        out.worst_numeric = numeric;
      }
    }
  }
  return out;
}

}  // namespace saasr::oracle
