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

// Acceptance run: one PASS/FAIL line per criterion on stdout, details on
// stderr. Exit status is the number of failed criteria.
//
//   acceptance [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.h"
#include "saasr/decode.h"
#include "saasr/metrics.h"
#include "saasr/model.h"
#include "saasr/sot.h"
#include "saasr/synth.h"
#include "saasr/train.h"
#include "scoring.h"

namespace saasr {
namespace {

using Clock = std::chrono::steady_clock;

// Tolerances.
constexpr double kGradTolerance = 1e-3;
constexpr double kGradTimeLimitSec = 120.0;
constexpr double kSumTolerance = 1e-9;
constexpr double kEquivarianceTolerance = 1e-12;
constexpr double kCountingTarget = 90.0;  // percent, each condition
constexpr double kSaWerTarget = 15.0;     // percent, total
constexpr double kTrainTimeLimitSec = 2 * 3600.0;
constexpr std::size_t kMaxStageSteps = 20000;

// End-to-end setup. Task constants first, then the free choices.
struct EndToEndSetup {
  std::size_t n_train = 5000;
  std::size_t n_test = 500;
  std::size_t vocab_size = 24;
  std::size_t num_speakers = 16;
  std::size_t profiles = 8;
  std::uint64_t seed = 20261017;

  std::size_t feature_dim = 64;
  std::size_t frames_per_token = 6;
  double noise_stddev = 0.1;
  std::size_t min_delay = 5;

  std::size_t model_dim = 64;
  std::size_t subsample = 2;
  std::size_t encoder_layers = 3;
  double dropout = 0.1;

  std::size_t stage1_steps = 15000;
  std::size_t stage2_steps = 10000;
  std::size_t batch_size = 8;
  double peak_lr = 1e-3;
  std::size_t warmup = 1000;
  std::size_t beam = 4;
  std::size_t max_len = 64;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  return buf;
}

ModelConfig ToyModel() {
  ModelConfig c;  // f^h = 32
  c.dropout = 0.0;
  return c;
}

Tensor RandomTensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<TrainExample> ToyBatch(const ModelConfig& c, std::uint64_t seed, std::size_t n) {
  InventoryConfig ic;
  ic.feature_dim = c.input_dim;
  ic.signature_dim = c.profile_dim;
  ic.vocab_size = c.vocab_size;
  const SpeakerInventory inv = SpeakerInventory::Generate(ic, seed);
  DatasetConfig dc;
  dc.min_tokens = 2;
  dc.max_tokens = 4;
  dc.speaker_count_probs = {0.0, 0.5, 0.5};
  std::vector<TrainExample> out;
  for (const MixtureSample& s : GenerateDataset(inv, dc, seed + 1, n)) {
    out.push_back({s.features, s.transcript, ProfileTensor(s.profiles)});
  }
  return out;
}

struct RandomDecode {
  Tensor features, profiles;
  std::vector<std::size_t> input;
};

RandomDecode MakeRandomDecode(const ModelConfig& c, std::mt19937_64& rng) {
  RandomDecode d;
  d.features = RandomTensor({16 + rng() % 17, c.input_dim}, rng);
  d.profiles = RandomTensor({2 + rng() % 7, c.profile_dim}, rng);
  d.input.push_back(c.sos_id());
  const std::size_t n = 2 + rng() % 10;
  for (std::size_t i = 0; i < n; ++i) d.input.push_back(rng() % c.vocab_size);
  return d;
}

std::vector<double> Row(const Tensor& t, std::size_t r) {
  auto v = t.values();
  return {v.begin() + r * t.cols(), v.begin() + (r + 1) * t.cols()};
}

// 1
Outcome GradientFidelity() {
  const auto t0 = Clock::now();
  SaAsrModel model(ToyModel(), 1);
  oracle::JitterParameters(model, 0.02, 2);
  const auto batch = ToyBatch(model.config(), 3, 2);
  double worst = 0.0;
  std::string where;
  std::size_t groups = 0, entries = 0;
  for (TrainStage stage : {TrainStage::kAsrOnly, TrainStage::kJoint}) {
    const oracle::GradientCheck g = oracle::CheckGradients(model, batch, stage, 1.0, 16, 4);
    groups += g.groups_checked;
    entries += g.entries_checked;
    if (g.max_relative_error >= worst) {
      worst = g.max_relative_error;
      where = std::string(StageName(stage)) + ":" + g.worst_parameter;
    }
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  return {worst < kGradTolerance && secs < kGradTimeLimitSec,
          Fmt("max rel err %.2e", worst) + " (" + where + "), " + std::to_string(groups) +
              " groups, " + std::to_string(entries) + " entries, " + Fmt("%.1fs", secs)};
}

// 2
Outcome Normalization() {
  double worst_sum = 0.0, worst_ratio = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const SaAsrModel model(ToyModel(), seed);
    const RandomDecode d = MakeRandomDecode(model.config(), rng);
    const DecoderOutputs out = model.Decode(d.input, model.Encode(d.features), d.profiles,
                                            ProfileMode::kJoint);
    for (std::size_t n = 0; n < d.input.size(); ++n) {
      double so = 0.0;
      for (double lp : Row(out.token_log_probs, n)) so += std::exp(lp);
      const auto beta = Row(out.speaker_probs, n);
      const double sb = std::accumulate(beta.begin(), beta.end(), 0.0);
      worst_sum = std::max({worst_sum, std::abs(so - 1.0), std::abs(sb - 1.0)});
      const auto [lo, hi] = std::minmax_element(beta.begin(), beta.end());
      worst_ratio = std::max(worst_ratio, *hi / *lo);
    }
  }
  return {worst_sum <= kSumTolerance && worst_ratio <= std::exp(4.0),
          Fmt("max |sum-1| %.1e, max beta ratio %.3f (bound %.3f)", worst_sum, worst_ratio,
              std::exp(4.0))};
}

// 3
Outcome Causality() {
  std::size_t rows = 0, mismatches = 0;
  for (int c = 0; c < 50; ++c) {
    std::mt19937_64 rng(1000 + c);
    const SaAsrModel model(ToyModel(), c);
    const RandomDecode d = MakeRandomDecode(model.config(), rng);
    const EncoderStates states = model.Encode(d.features);
    const DecoderOutputs a = model.Decode(d.input, states, d.profiles, ProfileMode::kJoint);
    const std::size_t r = rng() % d.input.size();
    std::vector<std::size_t> changed = d.input;
    for (std::size_t i = r + 1; i < changed.size(); ++i) {
      changed[i] = (changed[i] + 1 + rng() % (model.config().vocab_size - 1)) %
                   model.config().vocab_size;
    }
    const DecoderOutputs b = model.Decode(changed, states, d.profiles, ProfileMode::kJoint);
    for (std::size_t n = 0; n <= r; ++n) {
      ++rows;
      mismatches += Row(a.token_log_probs, n) != Row(b.token_log_probs, n) ||
                    Row(a.speaker_query, n) != Row(b.speaker_query, n) ||
                    Row(a.speaker_probs, n) != Row(b.speaker_probs, n);
    }
  }
  return {mismatches == 0, std::to_string(rows) + " rows compared, " +
                               std::to_string(mismatches) + " differ"};
}

// 4
Outcome ProfileEquivariance() {
  double perm_dev = 0.0, scale_dev = 0.0;
  for (int c = 0; c < 50; ++c) {
    std::mt19937_64 rng(2000 + c);
    const SaAsrModel model(ToyModel(), c);
    const RandomDecode d = MakeRandomDecode(model.config(), rng);
    const std::size_t K = d.profiles.rows(), f = d.profiles.cols();
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pv;
    for (std::size_t j = 0; j < K; ++j) {
      const auto row = Row(d.profiles, perm[j]);
      pv.insert(pv.end(), row.begin(), row.end());
    }
    const EncoderStates states = model.Encode(d.features);
    const DecoderOutputs a = model.Decode(d.input, states, d.profiles, ProfileMode::kJoint);
    const DecoderOutputs b =
        model.Decode(d.input, states, Tensor({K, f}, pv), ProfileMode::kJoint);
    const DecoderOutputs s =
        model.Decode(d.input, states, Scale(d.profiles, 0.1 + 0.3 * c), ProfileMode::kJoint);
    for (std::size_t n = 0; n < d.input.size(); ++n) {
      for (std::size_t j = 0; j < K; ++j) {
        perm_dev = std::max(perm_dev, std::abs(b.speaker_probs.at(n, j) -
                                               a.speaker_probs.at(n, perm[j])));
      }
      for (std::size_t v = 0; v < model.config().vocab_size; ++v) {
        perm_dev = std::max(perm_dev, std::abs(b.token_log_probs.at(n, v) -
                                               a.token_log_probs.at(n, v)));
      }
    }
    // Scaling changes d-bar and therefore later decoder inputs; beta at the
    // first position sees only the encoders and <sos>.
    for (std::size_t j = 0; j < K; ++j) {
      scale_dev = std::max(scale_dev, std::abs(s.speaker_probs.at(0, j) - a.speaker_probs.at(0, j)));
    }
  }
  return {perm_dev <= kEquivarianceTolerance && scale_dev <= kEquivarianceTolerance,
          Fmt("permutation dev %.1e, scaling dev %.1e", perm_dev, scale_dev)};
}

// 5
Outcome DedupOptimality() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 0.0);
  std::size_t wrong = 0, repeats = 0;
  for (int c = 0; c < 200; ++c) {
    std::vector<std::vector<double>> s(1 + rng() % 6, std::vector<double>(2 + rng() % 4));
    for (auto& row : s) {
      for (double& v : row) v = u(rng);
    }
    const SpeakerAssignment a = DedupAssignment(s);
    wrong += a.log_score != oracle::BruteForceDedup(s).score;
    for (std::size_t m = 1; m < a.speakers.size(); ++m) repeats += a.speakers[m] == a.speakers[m - 1];
  }
  return {wrong == 0 && repeats == 0, "200 instances, " + std::to_string(wrong) +
                                          " score mismatches, " + std::to_string(repeats) +
                                          " adjacent repeats"};
}

// 6
Outcome CpwerOracle() {
  std::mt19937_64 rng(6);
  std::size_t wrong = 0;
  auto seq = [&] {
    TokenSeq t(rng() % 7);
    for (auto& w : t) w = rng() % 5;
    return t;
  };
  for (int c = 0; c < 200; ++c) {
    std::map<std::string, TokenSeq> ref, hyp;
    const std::size_t nr = 1 + rng() % 6, nh = rng() % 7;
    for (std::size_t i = 0; i < nr; ++i) ref["s" + std::to_string(i)] = seq();
    for (std::size_t i = 0; i < nh; ++i) hyp["c" + std::to_string(i)] = seq();
    wrong += CpwerCounts(ref, hyp, MatchSolver::kAssignment).errors !=
             oracle::BruteForceCpwerErrors(ref, hyp);
  }
  return {wrong == 0, "200 instances, " + std::to_string(wrong) + " mismatches"};
}

// 7
Outcome SotRoundTrip() {
  std::mt19937_64 rng(7);
  std::size_t wrong = 0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<Utterance> utts(1 + rng() % 4);
    std::size_t start = 0;
    for (Utterance& u : utts) {
      u.tokens.resize(1 + rng() % 8);
      for (auto& t : u.tokens) t = kFirstContentToken + rng() % 22;
      u.speaker_id = 1 + rng() % 8;
      u.start_frame = start;
      start += 1 + rng() % 20;
    }
    const auto back = Deserialize(Serialize(utts));
    bool same = back.size() == utts.size();
    for (std::size_t i = 0; same && i < utts.size(); ++i) {
      same = back[i].tokens == utts[i].tokens && back[i].speaker_id == utts[i].speaker_id;
    }
    wrong += !same;
  }
  return {wrong == 0, "1000 transcript sets, " + std::to_string(wrong) + " differ"};
}

// 10
Outcome StageOneProfileIndependence() {
  const SaAsrModel model(ToyModel(), 10);
  std::vector<TrainExample> batch = ToyBatch(model.config(), 11, 8);
  const double before = Loss(model, batch, TrainStage::kAsrOnly, 1.0).loss.item();
  std::mt19937_64 rng(12);
  for (TrainExample& e : batch) {
    const std::size_t K = e.profiles.rows(), f = e.profiles.cols();
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> v;
    for (std::size_t j : perm) {
      const auto row = Row(e.profiles, j);
      v.insert(v.end(), row.begin(), row.end());
    }
    e.profiles = Tensor({K, f}, v);
  }
  const double after = Loss(model, batch, TrainStage::kAsrOnly, 1.0).loss.item();
  return {before == after, Fmt("loss %.17g vs %.17g", before, after)};
}

// 8 and 9 share one training run.
struct EndToEndResult {
  Outcome reproduction;
  Outcome dedup_effect;
};

EndToEndResult EndToEnd(const EndToEndSetup& e) {
  std::cerr << "[e2e] generating " << e.n_train << " + " << e.n_test << " mixtures\n";
  InventoryConfig ic;
  ic.num_speakers = e.num_speakers;
  ic.feature_dim = e.feature_dim;
  ic.vocab_size = e.vocab_size;
  const SpeakerInventory inv = SpeakerInventory::Generate(ic, e.seed);
  DatasetConfig dc;
  dc.profiles_per_sample = e.profiles;
  dc.frames_per_token = e.frames_per_token;
  dc.noise_stddev = e.noise_stddev;
  dc.min_delay = e.min_delay;
  const auto train = GenerateDataset(inv, dc, e.seed + 1, e.n_train);
  const auto test = GenerateDataset(inv, dc, e.seed + 1, e.n_test, e.n_train);
  std::vector<TrainExample> examples;
  for (const MixtureSample& s : train) {
    examples.push_back({s.features, s.transcript, ProfileTensor(s.profiles)});
  }

  ModelConfig mc;
  mc.input_dim = e.feature_dim;
  mc.profile_dim = ic.signature_dim;
  mc.vocab_size = e.vocab_size;
  mc.model_dim = e.model_dim;
  mc.ff_dim = 2 * e.model_dim;
  mc.subsample = e.subsample;
  mc.encoder_layers = e.encoder_layers;
  mc.dropout = e.dropout;
  SaAsrModel model(mc, e.seed + 2);
  std::cerr << "[e2e] model with " << model.ParameterCount() << " parameters\n";

  const auto t0 = Clock::now();
  auto run_stage = [&](TrainStage stage, std::size_t steps) {
    TrainConfig tc;
    tc.stage = stage;
    tc.total_steps = steps;
    tc.warmup_steps = std::min(e.warmup, steps);
    tc.batch_size = e.batch_size;
    tc.peak_lr = e.peak_lr;
    tc.mask_augment = stage == TrainStage::kAsrOnly;
    tc.seed = e.seed + 3 + static_cast<std::uint64_t>(stage);
    double window = 0.0;
    TrainLoop(model, examples, tc, [&](const TracePoint& p) {
      window += p.loss;
      if (p.step % 1000 == 0) {
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::fprintf(stderr, "[e2e] %s step %zu mean loss %.4f (%.0fs)\n", StageName(stage),
                     p.step, window / 1000.0, secs);
        window = 0.0;
      }
      return true;
    });
  };
  run_stage(TrainStage::kAsrOnly, e.stage1_steps);
  run_stage(TrainStage::kJoint, e.stage2_steps);
  const double train_secs = std::chrono::duration<double>(Clock::now() - t0).count();

  std::vector<ScoredSample> argmax, dedup;
  std::size_t failed = 0;
  for (const MixtureSample& s : test) {
    std::optional<DecodeResult> ra, rd;
    try {
      const Hypothesis best =
          BeamSearch(model, s.features, ProfileTensor(s.profiles), {e.beam, e.max_len}).at(0);
      ra = MakeDecodeResult(best, AssignmentMode::kArgmax);
      rd = MakeDecodeResult(best, AssignmentMode::kDedup);
    } catch (const std::exception& ex) {
      ++failed;
      std::cerr << "[e2e] sample " << s.index << " failed: " << ex.what() << "\n";
    }
    argmax.push_back(ToScoredSample(s, ra));
    dedup.push_back(ToScoredSample(s, rd));
  }
  const EvalReport ra = Evaluate(argmax), rd = Evaluate(dedup);
  std::cerr << "[e2e] argmax assignment\n" << FormatReport(ra)
            << "[e2e] dedup assignment\n" << FormatReport(rd);

  // The full system decodes with deduplication.
  const EvalReport& sys = rd;
  double worst_count = 100.0;
  for (std::size_t c = 1; c <= 3; ++c) {
    worst_count = std::min(worst_count, sys.counting_distinct.Accuracy(c));
  }
  const double sa_wer = 100.0 * sys.total.sa_wer.Rate();
  const bool within_budget = train_secs <= kTrainTimeLimitSec &&
                             e.stage1_steps <= kMaxStageSteps &&
                             e.stage2_steps <= kMaxStageSteps;
  EndToEndResult out;
  out.reproduction = {
      within_budget && worst_count >= kCountingTarget && sa_wer <= kSaWerTarget,
      Fmt("counting %.2f/%.2f/%.2f%%", sys.counting_distinct.Accuracy(1),
          sys.counting_distinct.Accuracy(2), sys.counting_distinct.Accuracy(3)) +
          Fmt(", SA-WER %.2f%%, train %.0fs", sa_wer, train_secs) +
          (failed ? ", " + std::to_string(failed) + " decode failures" : "")};
  const double ser_a = 100.0 * ra.conditions[2].ser.Rate();
  const double ser_d = 100.0 * rd.conditions[2].ser.Rate();
  const double cnt_a = ra.counting_distinct.Accuracy(3);
  const double cnt_d = rd.counting_distinct.Accuracy(3);
  out.dedup_effect = {ser_d <= ser_a && cnt_d >= cnt_a,
                      Fmt("3-speaker SER %.2f%% -> %.2f%%", ser_a, ser_d) +
                          Fmt(", counting %.2f%% -> %.2f%%", cnt_a, cnt_d)};
  return out;
}

}  // namespace
}  // namespace saasr

int main(int argc, char** argv) {
  using saasr::Outcome;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--only N[,N...]]\n";
      return 2;
    }
  }
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  const std::map<int, std::pair<const char*, std::function<Outcome()>>> quick{
      {1, {"gradient fidelity", saasr::GradientFidelity}},
      {2, {"normalization", saasr::Normalization}},
      {3, {"causality", saasr::Causality}},
      {4, {"profile equivariance", saasr::ProfileEquivariance}},
      {5, {"dedup optimality", saasr::DedupOptimality}},
      {6, {"cpWER oracle", saasr::CpwerOracle}},
      {7, {"SOT round-trip", saasr::SotRoundTrip}},
      {10, {"stage-1 profile independence", saasr::StageOneProfileIndependence}},
  };
  std::map<int, std::pair<std::string, Outcome>> results;
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("threw: ") + e.what()};
    }
  };
  for (const auto& [n, entry] : quick) {
    if (wanted(n)) results[n] = {entry.first, guarded(entry.second)};
  }
  if (wanted(8) || wanted(9)) {
    saasr::EndToEndResult e2e;
    try {
      e2e = saasr::EndToEnd(saasr::EndToEndSetup{});
    } catch (const std::exception& ex) {
      e2e.reproduction = e2e.dedup_effect = {false, std::string("threw: ") + ex.what()};
    }
    if (wanted(8)) results[8] = {"toy end-to-end reproduction", e2e.reproduction};
    if (wanted(9)) results[9] = {"deduplication effect", e2e.dedup_effect};
  }
  int failed = 0;
  for (const auto& [n, r] : results) {
    failed += !r.second.pass;
    std::printf("criterion %2d %s: %s (%s)\n", n, r.second.pass ? "PASS" : "FAIL",
                r.first.c_str(), r.second.detail.c_str());
  }
  return failed;
}
