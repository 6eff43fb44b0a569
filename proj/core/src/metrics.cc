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

#include "saasr/metrics.h"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include "saasr/errors.h"

namespace saasr {

namespace {

constexpr std::size_t kExhaustiveMatchLimit = 6;
constexpr std::size_t kExhaustiveStreamLimit = 8;

// Lexicographic (edit cost, speaker mismatches).
using MatchCost = std::pair<std::size_t, std::size_t>;

struct ExhaustiveMatcher {
  std::span<const TokenSeq> refs;
  std::span<const TokenSeq> hyps;
  const std::vector<std::vector<std::size_t>>& dist;
  const std::vector<std::vector<bool>>* mismatch;

  std::vector<bool> used;
  std::vector<std::optional<std::size_t>> current;
  std::vector<std::optional<std::size_t>> best;
  MatchCost best_cost{std::numeric_limits<std::size_t>::max(), 0};

  void Search(std::size_t i, MatchCost cost) {
    if (i == refs.size()) {
      for (std::size_t j = 0; j < hyps.size(); ++j) {
        if (!used[j]) cost.first += hyps[j].size();
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = current;
      }
      return;
    }
    current[i] = std::nullopt;
    Search(i + 1, {cost.first + refs[i].size(), cost.second + (mismatch ? 1 : 0)});
    for (std::size_t j = 0; j < hyps.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      current[i] = j;
      const std::size_t mm = mismatch && (*mismatch)[i][j] ? 1 : 0;
      Search(i + 1, {cost.first + dist[i][j], cost.second + mm});
      used[j] = false;
    }
    current[i] = std::nullopt;
  }
};

std::vector<std::vector<std::size_t>> PairwiseDistances(
    std::span<const TokenSeq> refs, std::span<const TokenSeq> hyps) {
  std::vector<std::vector<std::size_t>> dist(refs.size(),
                                             std::vector<std::size_t>(hyps.size()));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    for (std::size_t j = 0; j < hyps.size(); ++j) {
      dist[i][j] = EditDistance(refs[i], hyps[j]);
    }
  }
  return dist;
}

std::size_t TotalWords(std::span<const TokenSeq> seqs) {
  std::size_t n = 0;
  for (const TokenSeq& s : seqs) n += s.size();
  return n;
}

}  // namespace

double AlignmentResult::Rate() const {
  if (ref_length == 0) {
    throw ArgumentError("error rate undefined for an empty reference");
  }
  return static_cast<double>(errors()) / static_cast<double>(ref_length);
}

double ErrorCount::Rate() const {
  if (total == 0) throw ArgumentError("error rate undefined: zero denominator");
  return static_cast<double>(errors) / static_cast<double>(total);
}

AlignmentResult Align(std::span<const std::size_t> ref,
                      std::span<const std::size_t> hyp) {
  const std::size_t r = ref.size(), h = hyp.size();
  std::vector<std::size_t> d((r + 1) * (h + 1));
  auto at = [h](std::size_t i, std::size_t j) { return i * (h + 1) + j; };
  for (std::size_t i = 0; i <= r; ++i) d[at(i, 0)] = i;
  for (std::size_t j = 0; j <= h; ++j) d[at(0, j)] = j;
  for (std::size_t i = 1; i <= r; ++i) {
    for (std::size_t j = 1; j <= h; ++j) {
      const std::size_t diag = d[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[at(i, j)] = std::min({diag, d[at(i - 1, j)] + 1, d[at(i, j - 1)] + 1});
    }
  }
  AlignmentResult a;
  a.ref_length = r;
  std::size_t i = r, j = h;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (d[at(i, j)] == d[at(i - 1, j - 1)] + (same ? 0 : 1)) {
        if (!same) ++a.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[at(i, j)] == d[at(i - 1, j)] + 1) {
      ++a.deletions;
      --i;
    } else {
      ++a.insertions;
      --j;
    }
  }
  return a;
}

std::size_t EditDistance(std::span<const std::size_t> ref,
                         std::span<const std::size_t> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                         prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

std::vector<std::size_t> SolveAssignment(
    const std::vector<std::vector<std::int64_t>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost) {
    if (row.size() != n) throw ArgumentError("assignment matrix must be square");
  }
  if (n == 0) return {};
  constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  // 1-based potentials formulation; column 0 is a virtual start.
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<std::int64_t> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      std::int64_t delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_for_row(n);
  for (std::size_t j = 1; j <= n; ++j) col_for_row[p[j] - 1] = j - 1;
  return col_for_row;
}

UtteranceMatching MatchUtterances(
    std::span<const TokenSeq> refs, std::span<const TokenSeq> hyps,
    MatchSolver solver, const std::vector<std::vector<bool>>* speaker_mismatch) {
  const std::size_t r = refs.size(), h = hyps.size();
  const auto dist = PairwiseDistances(refs, hyps);
  if (solver == MatchSolver::kAuto) {
    solver = std::max(r, h) <= kExhaustiveMatchLimit ? MatchSolver::kExhaustive
                                                     : MatchSolver::kAssignment;
  }
  UtteranceMatching out;
  if (solver == MatchSolver::kExhaustive) {
    ExhaustiveMatcher m{refs, hyps, dist, speaker_mismatch,
                        std::vector<bool>(h, false),
                        std::vector<std::optional<std::size_t>>(r),
                        std::vector<std::optional<std::size_t>>(r)};
    m.Search(0, {0, 0});
    out.hyp_for_ref = m.best;
    out.edit_cost = m.best_cost.first;
    return out;
  }
  // Square problem: rows are refs then h slack rows, columns are hyps then
  // r slack columns. Slack pairings encode unmatched utterances.
  const std::size_t n = r + h;
  const std::int64_t weight = static_cast<std::int64_t>(r + 1);
  std::vector<std::vector<std::int64_t>> cost(n, std::vector<std::int64_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::int64_t c = 0;
      if (i < r && j < h) {
        c = static_cast<std::int64_t>(dist[i][j]) * weight;
        if (speaker_mismatch && (*speaker_mismatch)[i][j]) c += 1;
      } else if (i < r) {
        c = static_cast<std::int64_t>(refs[i].size()) * weight;
        if (speaker_mismatch) c += 1;
      } else if (j < h) {
        c = static_cast<std::int64_t>(hyps[j].size()) * weight;
      }
      cost[i][j] = c;
    }
  }
  const std::vector<std::size_t> col = SolveAssignment(cost);
  out.hyp_for_ref.assign(r, std::nullopt);
  std::vector<bool> hyp_used(h, false);
  for (std::size_t i = 0; i < r; ++i) {
    if (col[i] < h) {
      out.hyp_for_ref[i] = col[i];
      hyp_used[col[i]] = true;
      out.edit_cost += dist[i][col[i]];
    } else {
      out.edit_cost += refs[i].size();
    }
  }
  for (std::size_t j = 0; j < h; ++j) {
    if (!hyp_used[j]) out.edit_cost += hyps[j].size();
  }
  return out;
}

ErrorCount MultiSpeakerWerCounts(std::span<const TokenSeq> refs,
                                 std::span<const TokenSeq> hyps,
                                 MatchSolver solver) {
  if (refs.empty()) throw ArgumentError("multi-speaker WER needs a reference");
  return {MatchUtterances(refs, hyps, solver).edit_cost, TotalWords(refs)};
}

double MultiSpeakerWer(std::span<const TokenSeq> refs,
                       std::span<const TokenSeq> hyps) {
  return MultiSpeakerWerCounts(refs, hyps).Rate();
}

ErrorCount SaWerCounts(std::span<const AttributedUtterance> ref,
                       std::span<const AttributedUtterance> hyp) {
  std::map<std::size_t, TokenSeq> ref_by_speaker, hyp_by_speaker;
  ErrorCount out;
  for (const AttributedUtterance& u : ref) {
    TokenSeq& s = ref_by_speaker[u.speaker];
    s.insert(s.end(), u.tokens.begin(), u.tokens.end());
    out.total += u.tokens.size();
  }
  for (const AttributedUtterance& u : hyp) {
    TokenSeq& s = hyp_by_speaker[u.speaker];
    s.insert(s.end(), u.tokens.begin(), u.tokens.end());
  }
  for (const auto& [speaker, words] : ref_by_speaker) {
    auto it = hyp_by_speaker.find(speaker);
    out.errors += it == hyp_by_speaker.end()
                      ? words.size()
                      : EditDistance(words, it->second);
  }
  for (const auto& [speaker, words] : hyp_by_speaker) {
    if (!ref_by_speaker.contains(speaker)) out.errors += words.size();
  }
  return out;
}

double SaWer(std::span<const AttributedUtterance> ref,
             std::span<const AttributedUtterance> hyp) {
  return SaWerCounts(ref, hyp).Rate();
}

ErrorCount SerCounts(std::span<const AttributedUtterance> ref,
                     std::span<const AttributedUtterance> hyp,
                     MatchSolver solver) {
  std::vector<TokenSeq> refs, hyps;
  for (const auto& u : ref) refs.push_back(u.tokens);
  for (const auto& u : hyp) hyps.push_back(u.tokens);
  std::vector<std::vector<bool>> mismatch(ref.size(),
                                          std::vector<bool>(hyp.size()));
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t j = 0; j < hyp.size(); ++j) {
      mismatch[i][j] = ref[i].speaker != hyp[j].speaker;
    }
  }
  const UtteranceMatching m = MatchUtterances(refs, hyps, solver, &mismatch);
  ErrorCount out{0, ref.size()};
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!m.hyp_for_ref[i] || mismatch[i][*m.hyp_for_ref[i]]) ++out.errors;
  }
  return out;
}

double Ser(std::span<const AttributedUtterance> ref,
           std::span<const AttributedUtterance> hyp) {
  return SerCounts(ref, hyp).Rate();
}

ErrorCount CpwerCounts(const std::map<std::string, TokenSeq>& ref,
                       const std::map<std::string, TokenSeq>& hyp,
                       MatchSolver solver) {
  std::vector<TokenSeq> refs, hyps;
  std::size_t ref_words = 0;
  for (const auto& [name, words] : ref) {
    refs.push_back(words);
    ref_words += words.size();
  }
  for (const auto& [name, words] : hyp) hyps.push_back(words);
  if (refs.empty()) throw ArgumentError("cpWER needs a reference");
  const std::size_t n = std::max(refs.size(), hyps.size());
  refs.resize(n);
  hyps.resize(n);
  const auto dist = PairwiseDistances(refs, hyps);
  if (solver == MatchSolver::kAuto) {
    solver = n <= kExhaustiveStreamLimit ? MatchSolver::kExhaustive
                                         : MatchSolver::kAssignment;
  }
  std::size_t best = std::numeric_limits<std::size_t>::max();
  if (solver == MatchSolver::kExhaustive) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    do {
      std::size_t total = 0;
      for (std::size_t i = 0; i < n; ++i) total += dist[i][perm[i]];
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<std::vector<std::int64_t>> cost(n, std::vector<std::int64_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        cost[i][j] = static_cast<std::int64_t>(dist[i][j]);
      }
    }
    const std::vector<std::size_t> col = SolveAssignment(cost);
    best = 0;
    for (std::size_t i = 0; i < n; ++i) best += dist[i][col[i]];
  }
  return {best, ref_words};
}

double Cpwer(const std::map<std::string, TokenSeq>& ref,
             const std::map<std::string, TokenSeq>& hyp) {
  return CpwerCounts(ref, hyp).Rate();
}

void SpeakerCountingMatrix::Add(std::size_t actual, std::size_t estimated) {
  if (actual < 1 || actual > kRows) {
    throw ArgumentError("actual speaker count must be 1..3, got " +
                        std::to_string(actual));
  }
  if (estimated == 0) throw ArgumentError("estimated speaker count is 0");
  ++counts_[actual - 1][std::min(estimated, kCols) - 1];
}

std::size_t SpeakerCountingMatrix::count(std::size_t actual,
                                         std::size_t column) const {
  return counts_.at(actual - 1).at(column);
}

std::size_t SpeakerCountingMatrix::RowTotal(std::size_t actual) const {
  const auto& row = counts_.at(actual - 1);
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

double SpeakerCountingMatrix::Percent(std::size_t actual,
                                      std::size_t column) const {
  const std::size_t total = RowTotal(actual);
  if (total == 0) return 0.0;
  return 100.0 * static_cast<double>(count(actual, column)) /
         static_cast<double>(total);
}

double SpeakerCountingMatrix::Accuracy(std::size_t actual) const {
  return Percent(actual, actual - 1);
}

EvalReport Evaluate(std::span<const ScoredSample> samples) {
  EvalReport report;
  for (const ScoredSample& s : samples) {
    if (s.true_speakers < 1 || s.true_speakers > 3) {
      throw ArgumentError("true speaker count must be 1..3");
    }
    const std::vector<AttributedUtterance> none;
    const std::span<const AttributedUtterance> hyp =
        s.failed ? std::span<const AttributedUtterance>(none) : s.hyp;
    std::vector<TokenSeq> ref_tokens, hyp_tokens;
    for (const auto& u : s.ref) ref_tokens.push_back(u.tokens);
    for (const auto& u : hyp) hyp_tokens.push_back(u.tokens);
    ConditionScores& c = report.conditions[s.true_speakers - 1];
    for (ConditionScores* dst : {&c, &report.total}) {
      ++dst->samples;
      dst->ser += SerCounts(s.ref, hyp);
      dst->wer += MultiSpeakerWerCounts(ref_tokens, hyp_tokens);
      dst->sa_wer += SaWerCounts(s.ref, hyp);
    }
    report.counting_distinct.Add(s.true_speakers,
                                 s.failed ? 1 : std::max<std::size_t>(1, s.estimated_distinct));
    report.counting_segments.Add(s.true_speakers,
                                 s.failed ? 1 : std::max<std::size_t>(1, s.estimated_segments));
  }
  return report;
}

namespace {

std::string Percent(const ErrorCount& c) {
  char buf[32];
  if (c.total == 0) return "     -";
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * c.Rate());
  return buf;
}

std::string CountingTable(const char* title, const SpeakerCountingMatrix& m) {
  std::string out = std::string(title) + "\n";
  out += "actual |      1      2      3    >=4\n";
  char buf[96];
  for (std::size_t a = 1; a <= SpeakerCountingMatrix::kRows; ++a) {
    std::snprintf(buf, sizeof(buf), "%6zu | %6.2f %6.2f %6.2f %6.2f\n", a,
                  m.Percent(a, 0), m.Percent(a, 1), m.Percent(a, 2),
                  m.Percent(a, 3));
    out += buf;
  }
  return out;
}

}  // namespace

std::string FormatReport(const EvalReport& report) {
  std::string out = "condition | samples |    SER    WER SA-WER\n";
  char buf[96];
  for (std::size_t i = 0; i <= 3; ++i) {
    const ConditionScores& c = i < 3 ? report.conditions[i] : report.total;
    const std::string name = i < 3 ? std::to_string(i + 1) + "-speaker" : "total";
    std::snprintf(buf, sizeof(buf), "%9s | %7zu | %s %s %s\n", name.c_str(),
                  c.samples, Percent(c.ser).c_str(), Percent(c.wer).c_str(),
                  Percent(c.sa_wer).c_str());
    out += buf;
  }
  out += "\n";
  out += CountingTable("speaker counting (distinct speakers), %",
                       report.counting_distinct);
  out += "\n";
  out += CountingTable("speaker counting (segments), %", report.counting_segments);
  return out;
}

}  // namespace saasr
