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

#ifndef SAASR_TOOLS_SCORING_H_
#define SAASR_TOOLS_SCORING_H_

#include <optional>

#include "saasr/decode.h"
#include "saasr/metrics.h"
#include "saasr/synth.h"

namespace saasr {

// Reference and hypothesis utterances of one sample in scoring form. An
// absent result is a failed decode.
ScoredSample ToScoredSample(const MixtureSample& sample,
                            const std::optional<DecodeResult>& result);

}  // namespace saasr

#endif  // SAASR_TOOLS_SCORING_H_
