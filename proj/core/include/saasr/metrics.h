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

// Word error measures for multi-talker output. Rates are fractions; they
// become percentages only in reports.

#ifndef SAASR_METRICS_H_
#define SAASR_METRICS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace saasr {

using TokenSeq = std::vector<std::size_t>;

struct AlignmentResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  // errors / ref_length; throws ArgumentError when ref_length is 0.
  double Rate() const;
};

// Unit-cost Levenshtein alignment.
AlignmentResult Align(std::span<const std::size_t> ref,
                      std::span<const std::size_t> hyp);
std::size_t EditDistance(std::span<const std::size_t> ref,
                         std::span<const std::size_t> hyp);

// Errors and the denominator they are normalized by.
struct ErrorCount {
  std::size_t errors = 0;
  std::size_t total = 0;

  double Rate() const;
  ErrorCount& operator+=(const ErrorCount& other) {
    errors += other.errors;
    total += other.total;
    return *this;
  }
};

struct AttributedUtterance {
  TokenSeq tokens;
  std::size_t speaker = 0;
};

enum class MatchSolver { kAuto, kExhaustive, kAssignment };

// Minimum-cost pairing of hypothesis utterances with reference utterances.
// A pair costs its edit distance, an unmatched reference its length and an
// unmatched hypothesis its length. `speaker_mismatch` (optional) breaks
// ties among equal-cost pairings in favour of fewer speaker errors
// (mismatched pairs plus unmatched references).
struct UtteranceMatching {
  std::vector<std::optional<std::size_t>> hyp_for_ref;
  std::size_t edit_cost = 0;
};

UtteranceMatching MatchUtterances(
    std::span<const TokenSeq> refs, std::span<const TokenSeq> hyps,
    MatchSolver solver = MatchSolver::kAuto,
    const std::vector<std::vector<bool>>* speaker_mismatch = nullptr);

// Speaker-agnostic multi-talker WER.
ErrorCount MultiSpeakerWerCounts(std::span<const TokenSeq> refs,
                                 std::span<const TokenSeq> hyps,
                                 MatchSolver solver = MatchSolver::kAuto);
double MultiSpeakerWer(std::span<const TokenSeq> refs,
                       std::span<const TokenSeq> hyps);

// Per reference speaker, WER between the concatenation of that speaker's
// reference utterances (given order) and hypothesis utterances (given
// order). Words of hypothesis speakers absent from the reference are
// insertions.
ErrorCount SaWerCounts(std::span<const AttributedUtterance> ref,
                       std::span<const AttributedUtterance> hyp);
double SaWer(std::span<const AttributedUtterance> ref,
             std::span<const AttributedUtterance> hyp);

// Utterances paired by MatchUtterances; a matched pair with a different
// speaker or an unmatched reference utterance is one error, over the
// number of reference utterances.
ErrorCount SerCounts(std::span<const AttributedUtterance> ref,
                     std::span<const AttributedUtterance> hyp,
                     MatchSolver solver = MatchSolver::kAuto);
double Ser(std::span<const AttributedUtterance> ref,
           std::span<const AttributedUtterance> hyp);

// Concatenated minimum-permutation WER. Streams are padded with empty ones
// to equal count, then mapped one-to-one at minimum total edit distance.
ErrorCount CpwerCounts(const std::map<std::string, TokenSeq>& ref,
                       const std::map<std::string, TokenSeq>& hyp,
                       MatchSolver solver = MatchSolver::kAuto);
double Cpwer(const std::map<std::string, TokenSeq>& ref,
             const std::map<std::string, TokenSeq>& hyp);

// Minimum-cost perfect matching of a square cost matrix (Hungarian
// method with potentials). Returns column index per row.
std::vector<std::size_t> SolveAssignment(
    const std::vector<std::vector<std::int64_t>>& cost);

// Rows: actual speaker count 1..3. Columns: estimated 1, 2, 3, >= 4.
class SpeakerCountingMatrix {
 public:
  static constexpr std::size_t kRows = 3;
  static constexpr std::size_t kCols = 4;

  // Throws ArgumentError for actual outside 1..3 or estimated == 0.
  void Add(std::size_t actual, std::size_t estimated);
  std::size_t count(std::size_t actual, std::size_t column) const;
  std::size_t RowTotal(std::size_t actual) const;
  // Row-normalized percentages; a row with no samples is all zeros.
  double Percent(std::size_t actual, std::size_t column) const;
  // Diagonal percentage for `actual`.
  double Accuracy(std::size_t actual) const;

 private:
  std::array<std::array<std::size_t, kCols>, kRows> counts_{};
};

// One scored input: reference and hypothesis utterances with speakers, the
// true speaker count and the estimated counts.
struct ScoredSample {
  std::vector<AttributedUtterance> ref;
  std::vector<AttributedUtterance> hyp;
  std::size_t true_speakers = 0;       // 1..3
  std::size_t estimated_distinct = 0;  // distinct assigned speakers
  std::size_t estimated_segments = 0;  // count(<sc>) + 1
  bool failed = false;                 // decoding produced no output
};

struct ConditionScores {
  std::size_t samples = 0;
  ErrorCount ser, wer, sa_wer;
};

// Per-condition (true speaker count 1..3) and total error counts with the
// two counting confusion matrices.
struct EvalReport {
  std::array<ConditionScores, 3> conditions;
  ConditionScores total;
  SpeakerCountingMatrix counting_distinct;
  SpeakerCountingMatrix counting_segments;
};

// A failed sample is scored as an empty hypothesis.
EvalReport Evaluate(std::span<const ScoredSample> samples);
// Fixed-width tables: SER/WER/SA-WER per condition, then both counting
// matrices. Percentages with two decimals.
std::string FormatReport(const EvalReport& report);

}  // namespace saasr

#endif  // SAASR_METRICS_H_
