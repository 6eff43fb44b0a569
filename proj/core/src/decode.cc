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

#include "saasr/decode.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "saasr/errors.h"

namespace saasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Tokens that keep the hypothesis a valid transcript prefix.
std::vector<bool> AllowedTokens(const std::vector<std::size_t>& prefix,
                                std::size_t vocab, std::size_t max_len) {
  std::vector<bool> allowed(vocab, true);
  const std::size_t len = prefix.size();
  if (len >= max_len) {
    std::fill(allowed.begin(), allowed.end(), false);
    allowed[kEndOfSequence] = true;
    return allowed;
  }
  if (len == 0 || prefix.back() == kSpeakerChange) {
    allowed[kSpeakerChange] = false;
    allowed[kEndOfSequence] = false;
  } else if (len + 1 == max_len) {
    // <sc> here would be followed by a forced <eos>.
    allowed[kSpeakerChange] = false;
  }
  return allowed;
}

struct Candidate {
  std::size_t parent;
  std::size_t token;
  double score;
};

}  // namespace

double Hypothesis::NormalizedScore() const {
  return tokens.empty() ? log_score
                        : log_score / static_cast<double>(tokens.size());
}

std::vector<Hypothesis> BeamSearch(const SaAsrModel& model,
                                   const Tensor& features,
                                   const Tensor& profiles,
                                   const SearchOptions& options) {
  if (options.beam_width == 0) throw ArgumentError("beam_width must be >= 1");
  if (options.max_len == 0) throw ArgumentError("max_len must be >= 1");
  const std::size_t vocab = model.config().vocab_size;
  const EncoderStates states = model.Encode(features);

  std::vector<Hypothesis> active(1);
  std::vector<Hypothesis> finished;
  while (!active.empty()) {
    std::vector<Candidate> candidates;
    std::vector<StepOutput> steps;
    steps.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      steps.push_back(model.DecoderStep(active[i].tokens, states, profiles));
      const std::vector<bool> allowed =
          AllowedTokens(active[i].tokens, vocab, options.max_len);
      std::vector<Candidate> local;
      for (std::size_t t = 0; t < vocab; ++t) {
        if (!allowed[t]) continue;
        local.push_back({i, t, active[i].log_score + steps[i].token_log_probs[t]});
      }
      const std::size_t keep = std::min(options.beam_width, local.size());
      std::partial_sort(local.begin(), local.begin() + keep, local.end(),
                        [](const Candidate& a, const Candidate& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.token < b.token;
                        });
      candidates.insert(candidates.end(), local.begin(), local.begin() + keep);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.score > b.score;
                     });
    if (candidates.size() > options.beam_width) {
      candidates.resize(options.beam_width);
    }
    std::vector<Hypothesis> next;
    for (const Candidate& c : candidates) {
      Hypothesis h = active[c.parent];
      h.tokens.push_back(c.token);
      h.log_score = c.score;
      h.beta_rows.push_back(steps[c.parent].speaker_probs);
      if (c.token == kEndOfSequence) {
        h.terminated = true;
        finished.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     return a.NormalizedScore() > b.NormalizedScore();
                   });
  return finished;
}

Hypothesis GreedySearch(const SaAsrModel& model, const Tensor& features,
                        const Tensor& profiles, std::size_t max_len) {
  if (max_len == 0) throw ArgumentError("max_len must be >= 1");
  const std::size_t vocab = model.config().vocab_size;
  const EncoderStates states = model.Encode(features);
  Hypothesis h;
  while (!h.terminated) {
    const StepOutput step = model.DecoderStep(h.tokens, states, profiles);
    const std::vector<bool> allowed = AllowedTokens(h.tokens, vocab, max_len);
    std::size_t best = vocab;
    double best_lp = kNegInf;
    for (std::size_t t = 0; t < vocab; ++t) {
      if (allowed[t] && (best == vocab || step.token_log_probs[t] > best_lp)) {
        best = t;
        best_lp = step.token_log_probs[t];
      }
    }
    h.tokens.push_back(best);
    h.log_score += best_lp;
    h.beta_rows.push_back(step.speaker_probs);
    h.terminated = best == kEndOfSequence;
  }
  return h;
}

std::vector<std::vector<double>> UtteranceSpeakerScores(const Hypothesis& h) {
  ValidateTokenSequence(h.tokens);
  if (h.beta_rows.size() != h.tokens.size()) {
    throw ArgumentError("hypothesis has " + std::to_string(h.beta_rows.size()) +
                        " beta rows for " + std::to_string(h.tokens.size()) +
                        " tokens");
  }
  const std::size_t k = h.beta_rows.empty() ? 0 : h.beta_rows[0].size();
  if (k == 0) throw ArgumentError("hypothesis carries no speaker posteriors");
  const std::vector<std::size_t> utt = UtteranceIndexOfPositions(h.tokens);
  std::vector<std::vector<double>> scores(CountUtterances(h.tokens),
                                          std::vector<double>(k, 0.0));
  for (std::size_t n = 0; n < h.tokens.size(); ++n) {
    for (std::size_t j = 0; j < k; ++j) {
      scores[utt[n]][j] += std::log(h.beta_rows[n][j]);
    }
  }
  return scores;
}

SpeakerAssignment ArgmaxAssignment(
    const std::vector<std::vector<double>>& scores) {
  SpeakerAssignment a;
  for (const auto& row : scores) {
    if (row.empty()) throw ArgumentError("empty score row");
    // Within one utterance the mean is the sum over a fixed count, so the
    // argmax of either is the same.
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    a.speakers.push_back(best + 1);
    a.utterance_scores.push_back(row[best]);
    a.log_score += row[best];
  }
  return a;
}

SpeakerAssignment DedupAssignment(
    const std::vector<std::vector<double>>& scores) {
  const std::size_t m_count = scores.size();
  if (m_count == 0) return {};
  const std::size_t k_count = scores[0].size();
  if (k_count == 0) throw ArgumentError("empty score row");
  for (const auto& row : scores) {
    if (row.size() != k_count) throw ArgumentError("ragged score matrix");
  }
  if (m_count >= 2 && k_count < 2) {
    throw InfeasibleError(
        "speaker deduplication needs at least 2 profiles for " +
        std::to_string(m_count) + " utterances");
  }
  // best[m][k]: highest total for utterances 0..m with utterance m -> k.
  std::vector<std::vector<double>> best(m_count, std::vector<double>(k_count));
  std::vector<std::vector<std::size_t>> back(m_count,
                                             std::vector<std::size_t>(k_count, 0));
  best[0] = scores[0];
  for (std::size_t m = 1; m < m_count; ++m) {
    // Best and runner-up of the previous column give the best predecessor
    // different from k in O(1).
    std::size_t first = 0;
    for (std::size_t k = 1; k < k_count; ++k) {
      if (best[m - 1][k] > best[m - 1][first]) first = k;
    }
    std::size_t second = first == 0 ? 1 : 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      if (k != first && best[m - 1][k] > best[m - 1][second]) second = k;
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      const std::size_t prev = k == first ? second : first;
      back[m][k] = prev;
      best[m][k] = best[m - 1][prev] + scores[m][k];
    }
  }
  std::size_t last = 0;
  for (std::size_t k = 1; k < k_count; ++k) {
    if (best[m_count - 1][k] > best[m_count - 1][last]) last = k;
  }
  SpeakerAssignment a;
  a.speakers.assign(m_count, 0);
  std::size_t k = last;
  for (std::size_t m = m_count; m-- > 0;) {
    a.speakers[m] = k + 1;
    if (m > 0) k = back[m][k];
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    a.utterance_scores.push_back(scores[m][a.speakers[m] - 1]);
  }
  a.log_score = best[m_count - 1][last];
  return a;
}

SpeakerAssignment AssignSpeakersArgmax(const Hypothesis& h) {
  return ArgmaxAssignment(UtteranceSpeakerScores(h));
}

SpeakerAssignment AssignSpeakersDedup(const Hypothesis& h) {
  return DedupAssignment(UtteranceSpeakerScores(h));
}

DecodeResult MakeDecodeResult(const Hypothesis& h, AssignmentMode mode) {
  DecodeResult r;
  r.assignment = mode == AssignmentMode::kDedup ? AssignSpeakersDedup(h)
                                                : AssignSpeakersArgmax(h);
  r.transcript.tokens = h.tokens;
  const std::vector<std::size_t> utt = UtteranceIndexOfPositions(h.tokens);
  r.transcript.speakers.reserve(h.tokens.size());
  for (std::size_t n = 0; n < h.tokens.size(); ++n) {
    r.transcript.speakers.push_back(r.assignment.speakers[utt[n]]);
  }
  r.beta = h.beta_rows;
  r.token_log_score = h.log_score;
  r.count = CountSpeakers(r);
  return r;
}

SpeakerCount CountSpeakers(const DecodeResult& result) {
  SpeakerCount c;
  c.segments = CountUtterances(result.transcript.tokens);
  c.distinct = std::set<std::size_t>(result.assignment.speakers.begin(),
                                     result.assignment.speakers.end())
                   .size();
  return c;
}

}  // namespace saasr
