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

#ifndef SAASR_DECODE_H_
#define SAASR_DECODE_H_

#include <cstddef>
#include <vector>

#include "saasr/model.h"
#include "saasr/sot.h"
#include "saasr/tensor.h"

namespace saasr {

struct Hypothesis {
  std::vector<std::size_t> tokens;  // without <sos>; ends in <eos> once done
  double log_score = 0.0;           // sum of log o_n at the chosen tokens
  std::vector<std::vector<double>> beta_rows;  // beta_n per emitted token
  bool terminated = false;

  double NormalizedScore() const;
};

struct SpeakerAssignment {
  std::vector<std::size_t> speakers;        // 1-based, one per utterance
  std::vector<double> utterance_scores;     // summed log beta of the choice
  double log_score = 0.0;                   // sum of utterance_scores
};

struct SpeakerCount {
  std::size_t segments = 0;  // count(<sc>) + 1
  std::size_t distinct = 0;  // distinct assigned speakers
};

struct DecodeResult {
  SotTranscript transcript;
  SpeakerAssignment assignment;
  std::vector<std::vector<double>> beta;  // [N][K]
  SpeakerCount count;
  double token_log_score = 0.0;
};

enum class AssignmentMode { kArgmax, kDedup };

struct SearchOptions {
  std::size_t beam_width = 4;
  // Tokens emitted before the terminating <eos>; reaching it forces <eos>.
  std::size_t max_len = 64;
};

// Label-synchronous beam search over token probabilities. Marker placement
// is constrained so every finished hypothesis is a valid transcript.
// Finished hypotheses are ranked by log_score / token count.
std::vector<Hypothesis> BeamSearch(const SaAsrModel& model,
                                   const Tensor& features,
                                   const Tensor& profiles,
                                   const SearchOptions& options);

// Independent argmax decoder used as the beam-1 reference.
Hypothesis GreedySearch(const SaAsrModel& model, const Tensor& features,
                        const Tensor& profiles, std::size_t max_len);

// score[m][k] = sum over utterance m's positions (its content tokens and
// the marker closing it) of log beta_{n,k}.
std::vector<std::vector<double>> UtteranceSpeakerScores(const Hypothesis& h);

// Independent per-utterance choice of the highest average log beta.
// Lowest profile index wins ties.
SpeakerAssignment AssignSpeakersArgmax(const Hypothesis& h);
SpeakerAssignment ArgmaxAssignment(
    const std::vector<std::vector<double>>& scores);

// Highest total score subject to consecutive utterances having different
// speakers; exact dynamic program over (utterance, profile). Throws
// InfeasibleError for several utterances and a single profile.
SpeakerAssignment AssignSpeakersDedup(const Hypothesis& h);
SpeakerAssignment DedupAssignment(
    const std::vector<std::vector<double>>& scores);

DecodeResult MakeDecodeResult(const Hypothesis& h, AssignmentMode mode);
SpeakerCount CountSpeakers(const DecodeResult& result);

}  // namespace saasr

#endif  // SAASR_DECODE_H_
