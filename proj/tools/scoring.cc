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

#include "scoring.h"

#include "saasr/sot.h"

namespace saasr {

ScoredSample ToScoredSample(const MixtureSample& sample,
                            const std::optional<DecodeResult>& result) {
  ScoredSample sc;
  sc.true_speakers = sample.speaker_count();
  for (const Utterance& u : sample.utterances) sc.ref.push_back({u.tokens, u.speaker_id});
  if (!result) {
    sc.failed = true;
    return sc;
  }
  for (const SpeakerSegment& seg : Deserialize(result->transcript)) {
    sc.hyp.push_back({seg.tokens, seg.speaker_id});
  }
  sc.estimated_distinct = result->count.distinct;
  sc.estimated_segments = result->count.segments;
  return sc;
}

}  // namespace saasr
