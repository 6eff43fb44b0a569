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

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.h"
#include "saasr/errors.h"
#include "saasr/metrics.h"

namespace saasr {
namespace {

// Words a..z map to ids 0..25.
TokenSeq W(const std::string& text) {
  TokenSeq out;
  for (char ch : text) {
    if (ch != ' ') out.push_back(static_cast<std::size_t>(ch - 'a'));
  }
  return out;
}

TokenSeq RandomSeq(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab) {
  TokenSeq s(rng() % (max_len + 1));
  for (auto& w : s) w = rng() % vocab;
  return s;
}

// Plain recursive edit distance, exponential but obviously right.
std::size_t NaiveEdit(const TokenSeq& a, std::size_t i, const TokenSeq& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  return std::min({NaiveEdit(a, i + 1, b, j) + 1, NaiveEdit(a, i, b, j + 1) + 1,
                   NaiveEdit(a, i + 1, b, j + 1) + (a[i] != b[j])});
}

TEST(WerTest, Examples) {
  EXPECT_EQ(Align(W("abc"), W("abc")).Rate(), 0.0);
  EXPECT_DOUBLE_EQ(Align(W("abc"), W("axc")).Rate(), 1.0 / 3);
  const AlignmentResult del = Align(W("abc"), W(""));
  EXPECT_EQ(del.deletions, 3u);
  EXPECT_EQ(del.Rate(), 1.0);
  EXPECT_THROW(Align(W(""), W("a")).Rate(), ArgumentError);
  EXPECT_EQ(Align(W("a"), W("abcd")).Rate(), 3.0);
}

TEST(WerTest, MatchesNaiveRecursionAndIsSymmetric) {
  std::mt19937_64 rng(1);
  for (int c = 0; c < 300; ++c) {
    const TokenSeq a = RandomSeq(rng, 7, 3), b = RandomSeq(rng, 7, 3);
    const AlignmentResult r = Align(a, b);
    EXPECT_EQ(r.errors(), NaiveEdit(a, 0, b, 0));
    EXPECT_EQ(EditDistance(a, b), EditDistance(b, a));
    EXPECT_EQ(r.ref_length, a.size());
  }
}

TEST(MultiSpeakerWerTest, Examples) {
  const std::vector<TokenSeq> ref{W("ab"), W("cde")};
  EXPECT_EQ(MultiSpeakerWer(ref, std::vector<TokenSeq>{W("cde"), W("ab")}), 0.0);
  EXPECT_DOUBLE_EQ(MultiSpeakerWer(std::vector<TokenSeq>{W("ab")},
                                   std::vector<TokenSeq>{W("ab"), W("c")}),
                   0.5);
  EXPECT_EQ(MultiSpeakerWer(ref, std::vector<TokenSeq>{}), 1.0);
}

TEST(MatchingTest, AssignmentEqualsExhaustive) {
  std::mt19937_64 rng(2);
  for (int c = 0; c < 300; ++c) {
    std::vector<TokenSeq> refs(1 + rng() % 5), hyps(rng() % 6);
    for (auto& r : refs) r = RandomSeq(rng, 5, 4);
    for (auto& h : hyps) h = RandomSeq(rng, 5, 4);
    const auto a = MatchUtterances(refs, hyps, MatchSolver::kAssignment);
    const auto b = MatchUtterances(refs, hyps, MatchSolver::kExhaustive);
    EXPECT_EQ(a.edit_cost, b.edit_cost);
    // The reported cost is what the pairing actually costs.
    std::size_t cost = 0;
    std::vector<bool> used(hyps.size(), false);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (a.hyp_for_ref[i]) {
        cost += EditDistance(refs[i], hyps[*a.hyp_for_ref[i]]);
        EXPECT_FALSE(used[*a.hyp_for_ref[i]]);
        used[*a.hyp_for_ref[i]] = true;
      } else {
        cost += refs[i].size();
      }
    }
    for (std::size_t j = 0; j < hyps.size(); ++j) {
      if (!used[j]) cost += hyps[j].size();
    }
    EXPECT_EQ(cost, a.edit_cost);
  }
}

TEST(SolveAssignmentTest, MatchesPermutationSearch) {
  std::mt19937_64 rng(3);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<std::vector<std::int64_t>> cost(n, std::vector<std::int64_t>(n));
    for (auto& row : cost) {
      for (auto& v : row) v = static_cast<std::int64_t>(rng() % 10);
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::int64_t best = INT64_MAX;
    do {
      std::int64_t s = 0;
      for (std::size_t i = 0; i < n; ++i) s += cost[i][perm[i]];
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto got = SolveAssignment(cost);
    std::int64_t s = 0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i][got[i]];
    EXPECT_EQ(s, best);
  }
}

TEST(SaWerTest, Examples) {
  const std::vector<AttributedUtterance> ref{{W("ab"), 1}, {W("cd"), 2}};
  EXPECT_EQ(SaWer(ref, ref), 0.0);
  // Swapped speakers: each speaker's stream is two substitutions away.
  const std::vector<AttributedUtterance> swapped{{W("cd"), 1}, {W("ab"), 2}};
  EXPECT_DOUBLE_EQ(SaWer(ref, swapped), 1.0);
  // A single speaker degenerates to plain WER.
  const std::vector<AttributedUtterance> one{{W("abcd"), 3}};
  const std::vector<AttributedUtterance> hyp{{W("abxd"), 3}};
  EXPECT_DOUBLE_EQ(SaWer(one, hyp), Align(W("abcd"), W("abxd")).Rate());
  // Words of an unknown hypothesis speaker are insertions.
  const std::vector<AttributedUtterance> extra{{W("ab"), 1}, {W("cd"), 2}, {W("e"), 5}};
  EXPECT_DOUBLE_EQ(SaWer(ref, extra), 0.25);
}

TEST(SaWerTest, NeverBelowSpeakerAgnosticWer) {
  std::mt19937_64 rng(4);
  for (int c = 0; c < 300; ++c) {
    std::vector<AttributedUtterance> ref(1 + rng() % 3), hyp(rng() % 4);
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = {RandomSeq(rng, 4, 3), i + 1};
    ref[0].tokens.push_back(0);
    // One utterance per hypothesis speaker, so each speaker's stream is one
    // utterance and the speaker-agnostic matching is a relaxation.
    std::vector<std::size_t> labels{1, 2, 3, 4};
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t j = 0; j < hyp.size(); ++j) hyp[j] = {RandomSeq(rng, 4, 3), labels[j]};
    std::vector<TokenSeq> r, h;
    for (const auto& u : ref) r.push_back(u.tokens);
    for (const auto& u : hyp) h.push_back(u.tokens);
    EXPECT_GE(SaWerCounts(ref, hyp).errors, MultiSpeakerWerCounts(r, h).errors);
  }
}

TEST(SerTest, Examples) {
  const std::vector<AttributedUtterance> ref{{W("ab"), 1}, {W("cd"), 2}};
  EXPECT_EQ(Ser(ref, ref), 0.0);
  const std::vector<AttributedUtterance> one_wrong{{W("ab"), 1}, {W("cd"), 1}};
  EXPECT_DOUBLE_EQ(Ser(ref, one_wrong), 0.5);
  const std::vector<AttributedUtterance> merged{{W("abcd"), 1}};
  EXPECT_GE(Ser(ref, merged), 0.5);
}

TEST(SerTest, PrefersCorrectSpeakerAmongEqualCostPairings) {
  // Both hypothesis utterances are one edit from both references.
  const std::vector<AttributedUtterance> ref{{W("a"), 1}, {W("b"), 2}};
  const std::vector<AttributedUtterance> hyp{{W("c"), 2}, {W("d"), 1}};
  EXPECT_EQ(Ser(ref, hyp), 0.0);
}

TEST(CpwerTest, Examples) {
  using Streams = std::map<std::string, TokenSeq>;
  const Streams ref{{"A", W("ab")}, {"B", W("c")}};
  EXPECT_EQ(Cpwer(ref, Streams{{"1", W("c")}, {"2", W("ab")}}), 0.0);
  EXPECT_DOUBLE_EQ(Cpwer(ref, Streams{{"1", W("ab")}, {"2", W("x")}}), 1.0 / 3);
  EXPECT_DOUBLE_EQ(Cpwer(ref, Streams{}), 1.0);
}

TEST(CpwerTest, AssignmentEqualsBruteForce) {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 200; ++c) {
    std::map<std::string, TokenSeq> ref, hyp;
    const std::size_t nr = 1 + rng() % 6, nh = rng() % 7;
    for (std::size_t i = 0; i < nr; ++i) ref["r" + std::to_string(i)] = RandomSeq(rng, 6, 5);
    for (std::size_t i = 0; i < nh; ++i) hyp["h" + std::to_string(i)] = RandomSeq(rng, 6, 5);
    EXPECT_EQ(CpwerCounts(ref, hyp, MatchSolver::kAssignment).errors,
              oracle::BruteForceCpwerErrors(ref, hyp));
    EXPECT_EQ(CpwerCounts(ref, hyp, MatchSolver::kExhaustive).errors,
              oracle::BruteForceCpwerErrors(ref, hyp));
  }
}

TEST(CpwerTest, NoWorseThanAnyFixedMapping) {
  std::mt19937_64 rng(6);
  for (int c = 0; c < 200; ++c) {
    std::map<std::string, TokenSeq> ref, hyp;
    const std::size_t n = 1 + rng() % 4;
    for (std::size_t i = 0; i < n; ++i) {
      ref[std::to_string(i)] = RandomSeq(rng, 5, 4);
      hyp[std::to_string(i)] = RandomSeq(rng, 5, 4);
    }
    // Identity mapping by key.
    std::size_t fixed = 0;
    for (const auto& [key, seq] : ref) fixed += EditDistance(seq, hyp[key]);
    EXPECT_LE(CpwerCounts(ref, hyp).errors, fixed);
  }
}

TEST(MetricsTest, InvariantUnderVocabularyRelabeling) {
  std::mt19937_64 rng(7);
  std::vector<std::size_t> relabel(6);
  std::iota(relabel.begin(), relabel.end(), 10);
  std::shuffle(relabel.begin(), relabel.end(), rng);
  auto map_seq = [&](TokenSeq s) {
    for (auto& w : s) w = relabel[w];
    return s;
  };
  for (int c = 0; c < 100; ++c) {
    std::vector<AttributedUtterance> ref(1 + rng() % 3), hyp(rng() % 4);
    for (auto& u : ref) u = {RandomSeq(rng, 4, 6), 1 + rng() % 3};
    ref[0].tokens.push_back(1);
    for (auto& u : hyp) u = {RandomSeq(rng, 4, 6), 1 + rng() % 3};
    auto mapped = [&](std::vector<AttributedUtterance> v) {
      for (auto& u : v) u.tokens = map_seq(u.tokens);
      return v;
    };
    EXPECT_EQ(SaWer(ref, hyp), SaWer(mapped(ref), mapped(hyp)));
    EXPECT_EQ(Ser(ref, hyp), Ser(mapped(ref), mapped(hyp)));
  }
}

TEST(CountingTest, RowsArePercentagesOfTheirCondition) {
  SpeakerCountingMatrix m;
  m.Add(1, 1);
  m.Add(2, 2);
  m.Add(2, 3);
  m.Add(3, 7);
  EXPECT_EQ(m.Percent(2, 1), 50.0);
  EXPECT_EQ(m.Accuracy(1), 100.0);
  EXPECT_EQ(m.count(3, 3), 1u);
  EXPECT_EQ(m.Accuracy(3), 0.0);
  for (std::size_t a = 1; a <= 3; ++a) {
    double s = 0.0;
    for (std::size_t col = 0; col < 4; ++col) s += m.Percent(a, col);
    EXPECT_NEAR(s, 100.0, 0.01);
  }
  EXPECT_THROW(m.Add(4, 1), ArgumentError);
  EXPECT_THROW(m.Add(1, 0), ArgumentError);
}

TEST(EvaluateTest, PerfectOutputScoresZeroAndFailuresCountAsEmpty) {
  ScoredSample good{{{W("ab"), 1}, {W("c"), 2}}, {{W("ab"), 1}, {W("c"), 2}}, 2, 2, 2, false};
  ScoredSample bad{{{W("abc"), 1}}, {}, 1, 0, 0, true};
  const std::vector<ScoredSample> samples{good, bad};
  const EvalReport r = Evaluate(samples);
  EXPECT_EQ(r.conditions[1].sa_wer.errors, 0u);
  EXPECT_EQ(r.conditions[0].wer.errors, 3u);
  EXPECT_EQ(r.total.samples, 2u);
  EXPECT_EQ(r.counting_distinct.Accuracy(2), 100.0);
  EXPECT_EQ(r.counting_distinct.Accuracy(1), 100.0);  // failed -> estimate 1
  EXPECT_NE(FormatReport(r).find("2-speaker"), std::string::npos);
}

}  // namespace
}  // namespace saasr
