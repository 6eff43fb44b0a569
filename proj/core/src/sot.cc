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

#include "saasr/sot.h"

#include <algorithm>
#include <string>

#include "saasr/errors.h"

namespace saasr {

namespace {

bool IsMarker(std::size_t token) {
  return token == kSpeakerChange || token == kEndOfSequence;
}

}  // namespace

Vocabulary::Vocabulary(std::size_t size) : size_(size) {
  if (size <= kFirstContentToken) {
    throw ArgumentError("vocabulary needs at least one content token, size " +
                        std::to_string(size));
  }
}

SotTranscript Serialize(std::span<const Utterance> utterances) {
  if (utterances.empty()) {
    throw ArgumentError("Serialize: no utterances");
  }
  std::vector<const Utterance*> order;
  order.reserve(utterances.size());
  for (const Utterance& u : utterances) {
    if (u.tokens.empty()) throw ArgumentError("Serialize: empty utterance");
    if (u.speaker_id == 0) {
      throw ArgumentError("Serialize: speaker ids are 1-based");
    }
    for (std::size_t t : u.tokens) {
      if (IsMarker(t)) {
        throw ArgumentError("Serialize: reserved token " + std::to_string(t) +
                            " inside an utterance");
      }
    }
    order.push_back(&u);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Utterance* a, const Utterance* b) {
                     if (a->start_frame != b->start_frame) {
                       return a->start_frame < b->start_frame;
                     }
                     return a->speaker_id < b->speaker_id;
                   });
  SotTranscript out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Utterance& u = *order[i];
    out.tokens.insert(out.tokens.end(), u.tokens.begin(), u.tokens.end());
    out.tokens.push_back(i + 1 == order.size() ? kEndOfSequence : kSpeakerChange);
    out.speakers.insert(out.speakers.end(), u.tokens.size() + 1, u.speaker_id);
  }
  return out;
}

void ValidateTokenSequence(std::span<const std::size_t> tokens) {
  if (tokens.empty() || tokens.back() != kEndOfSequence) {
    throw FormatError("transcript must end with <eos>");
  }
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const std::size_t t = tokens[n];
    if (t == kEndOfSequence && n + 1 != tokens.size()) {
      throw FormatError("<eos> before the final position " + std::to_string(n));
    }
    if (!IsMarker(t)) continue;
    // Every marker closes a nonempty utterance.
    if (n == 0 || IsMarker(tokens[n - 1])) {
      throw FormatError("empty utterance before marker at position " +
                        std::to_string(n));
    }
  }
}

void ValidateTranscript(const SotTranscript& transcript) {
  if (transcript.tokens.size() != transcript.speakers.size()) {
    throw FormatError("token and speaker sequences differ in length");
  }
  ValidateTokenSequence(transcript.tokens);
  for (std::size_t s : transcript.speakers) {
    if (s == 0) throw FormatError("speaker labels are 1-based");
  }
}

std::vector<SpeakerSegment> Deserialize(const SotTranscript& transcript) {
  ValidateTranscript(transcript);
  std::vector<SpeakerSegment> segments;
  SpeakerSegment current;
  for (std::size_t n = 0; n < transcript.tokens.size(); ++n) {
    const std::size_t t = transcript.tokens[n];
    if (IsMarker(t)) {
      current.speaker_id = transcript.speakers[n];
      segments.push_back(std::move(current));
      current = SpeakerSegment{};
    } else {
      current.tokens.push_back(t);
    }
  }
  return segments;
}

std::size_t CountUtterances(std::span<const std::size_t> tokens) {
  return static_cast<std::size_t>(
             std::count(tokens.begin(), tokens.end(), kSpeakerChange)) +
         1;
}

std::vector<std::size_t> UtteranceIndexOfPositions(
    std::span<const std::size_t> tokens) {
  std::vector<std::size_t> index(tokens.size());
  std::size_t m = 0;
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    index[n] = m;
    if (tokens[n] == kSpeakerChange) ++m;
  }
  return index;
}

}  // namespace saasr
