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

// Serialized output representation: the utterances of all speakers joined
// into one token stream with <sc> between utterances and a final <eos>,
// paired with a per-position speaker label.

#ifndef SAASR_SOT_H_
#define SAASR_SOT_H_

#include <cstddef>
#include <span>
#include <vector>

namespace saasr {

inline constexpr std::size_t kSpeakerChange = 0;  // <sc>
inline constexpr std::size_t kEndOfSequence = 1;  // <eos>
inline constexpr std::size_t kFirstContentToken = 2;

class Vocabulary {
 public:
  // `size` counts the two reserved markers.
  explicit Vocabulary(std::size_t size);

  std::size_t size() const { return size_; }
  std::size_t content_size() const { return size_ - kFirstContentToken; }
  bool IsContent(std::size_t token) const {
    return token >= kFirstContentToken && token < size_;
  }
  bool Contains(std::size_t token) const { return token < size_; }

 private:
  std::size_t size_;
};

struct Utterance {
  std::vector<std::size_t> tokens;
  std::size_t speaker_id = 1;  // 1-based profile index
  std::size_t start_frame = 0;

  bool operator==(const Utterance&) const = default;
};

struct SotTranscript {
  std::vector<std::size_t> tokens;    // Y, ends with <eos>
  std::vector<std::size_t> speakers;  // S, same length as Y

  bool operator==(const SotTranscript&) const = default;
};

struct SpeakerSegment {
  std::vector<std::size_t> tokens;
  std::size_t speaker_id = 1;

  bool operator==(const SpeakerSegment&) const = default;
};

// Orders utterances by (start_frame, speaker_id), joins their tokens with
// <sc> and terminates with <eos>. Markers carry the speaker of the
// utterance they close. Throws ArgumentError on an empty list, an empty
// utterance, a reserved token inside an utterance or speaker_id 0.
SotTranscript Serialize(std::span<const Utterance> utterances);

// Inverse of Serialize up to start frames. Throws FormatError when the
// transcript violates the marker invariants.
std::vector<SpeakerSegment> Deserialize(const SotTranscript& transcript);

// Throws FormatError describing the first violated invariant.
void ValidateTranscript(const SotTranscript& transcript);
// Same checks on a bare token sequence (no speaker labels).
void ValidateTokenSequence(std::span<const std::size_t> tokens);

// Number of <sc>-joined utterances, i.e. count(<sc>) + 1.
std::size_t CountUtterances(std::span<const std::size_t> tokens);

// Index of the utterance each position belongs to; markers belong to the
// utterance they terminate.
std::vector<std::size_t> UtteranceIndexOfPositions(
    std::span<const std::size_t> tokens);

}  // namespace saasr

#endif  // SAASR_SOT_H_
