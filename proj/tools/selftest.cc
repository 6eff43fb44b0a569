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

#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "cli.h"
#include "oracles.h"
#include "saasr/decode.h"
#include "saasr/metrics.h"
#include "saasr/sot.h"
#include "saasr/synth.h"
#include "saasr/train.h"

namespace saasr::cli {

namespace {

struct SuiteResult {
  bool ok;
  std::string detail;
};

TokenSeq RandomWords(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(0, max_len), word(0, vocab - 1);
  TokenSeq s(len(rng));
  for (auto& w : s) w = word(rng);
  return s;
}

SuiteResult GradientSuite(std::uint64_t seed) {
  InventoryConfig ic;
  ic.feature_dim = 8;
  const SpeakerInventory inv = SpeakerInventory::Generate(ic, seed);
  DatasetConfig dc;
  dc.min_tokens = 2;
  dc.max_tokens = 3;
  dc.min_delay = 2;
  std::vector<TrainExample> batch;
  for (const MixtureSample& s : GenerateDataset(inv, dc, seed + 1, 2)) {
    batch.push_back({s.features, s.transcript, ProfileTensor(s.profiles)});
  }
  ModelConfig mc;
  mc.dropout = 0.0;
  SaAsrModel model(mc, seed);
  oracle::JitterParameters(model, 0.02, seed + 2);
  double worst = 0.0;
  std::string where;
  for (TrainStage stage : {TrainStage::kAsrOnly, TrainStage::kJoint}) {
    const oracle::GradientCheck g =
        oracle::CheckGradients(model, batch, stage, 1.0, 2, seed + 3);
    if (g.max_relative_error >= worst) {
      worst = g.max_relative_error;
      where = std::string(StageName(stage)) + " " + g.worst_parameter;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max relative error %.2e at ", worst);
  return {worst < 1e-3, buf + where};
}

SuiteResult DedupSuite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logp(-8.0, 0.0);
  for (int c = 0; c < 200; ++c) {
    const std::size_t m = 1 + rng() % 6, k = 2 + rng() % 4;
    std::vector<std::vector<double>> scores(m, std::vector<double>(k));
    for (auto& row : scores) {
      for (double& v : row) v = logp(rng);
    }
    const SpeakerAssignment a = DedupAssignment(scores);
    const oracle::DedupOptimum b = oracle::BruteForceDedup(scores);
    if (a.log_score != b.score) return {false, "case " + std::to_string(c) + " score differs"};
    for (std::size_t i = 1; i < m; ++i) {
      if (a.speakers[i] == a.speakers[i - 1]) {
        return {false, "case " + std::to_string(c) + " repeats a speaker"};
      }
    }
  }
  return {true, "200 instances, M <= 6, K <= 5"};
}

SuiteResult CpwerSuite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 200; ++c) {
    std::map<std::string, TokenSeq> ref, hyp;
    const std::size_t nr = 1 + rng() % 6, nh = rng() % 7;
    for (std::size_t i = 0; i < nr; ++i) ref["r" + std::to_string(i)] = RandomWords(rng, 6, 5);
    for (std::size_t i = 0; i < nh; ++i) hyp["h" + std::to_string(i)] = RandomWords(rng, 6, 5);
    const ErrorCount fast = CpwerCounts(ref, hyp, MatchSolver::kAssignment);
    if (fast.errors != oracle::BruteForceCpwerErrors(ref, hyp)) {
      return {false, "case " + std::to_string(c) + " differs"};
    }
  }
  return {true, "200 instances, <= 6 streams"};
}

SuiteResult MatchingSuite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 200; ++c) {
    std::vector<TokenSeq> refs(1 + rng() % 5), hyps(rng() % 6);
    for (auto& r : refs) r = RandomWords(rng, 5, 4);
    for (auto& h : hyps) h = RandomWords(rng, 5, 4);
    const auto a = MatchUtterances(refs, hyps, MatchSolver::kAssignment);
    const auto b = MatchUtterances(refs, hyps, MatchSolver::kExhaustive);
    if (a.edit_cost != b.edit_cost) return {false, "case " + std::to_string(c) + " differs"};
  }
  return {true, "200 instances"};
}

SuiteResult SotSuite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 1000; ++c) {
    std::vector<Utterance> utts(1 + rng() % 4);
    std::size_t start = 0;
    for (auto& u : utts) {
      u.tokens.resize(1 + rng() % 6);
      for (auto& t : u.tokens) t = kFirstContentToken + rng() % 22;
      u.speaker_id = 1 + rng() % 8;
      u.start_frame = start;
      start += 1 + rng() % 10;
    }
    const std::vector<SpeakerSegment> back = Deserialize(Serialize(utts));
    if (back.size() != utts.size()) return {false, "case " + std::to_string(c)};
    for (std::size_t i = 0; i < utts.size(); ++i) {
      if (back[i].tokens != utts[i].tokens || back[i].speaker_id != utts[i].speaker_id) {
        return {false, "case " + std::to_string(c)};
      }
    }
  }
  return {true, "1000 transcript sets"};
}

}  // namespace

int RunSelfTest(std::ostream& out, unsigned long long seed) {
  const std::pair<const char*, std::function<SuiteResult(std::uint64_t)>> suites[] = {
      {"gradient", GradientSuite}, {"dedup", DedupSuite},
      {"cpwer", CpwerSuite},       {"matching", MatchingSuite},
      {"sot", SotSuite}};
  int failed = 0;
  for (const auto& [name, run] : suites) {
    SuiteResult r{false, ""};
    try {
      r = run(seed);
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    if (!r.ok) ++failed;
    out << (r.ok ? "PASS " : "FAIL ") << name << ": " << r.detail << "\n";
  }
  return failed;
}

}  // namespace saasr::cli
