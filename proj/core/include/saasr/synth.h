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

// Synthetic multi-talker mixtures. Each (speaker, token) pair owns an
// emission vector: a token component shared by all speakers plus a
// projection of the speaker's signature, so both the words and the voice
// are recoverable from the features alone.

#ifndef SAASR_SYNTH_H_
#define SAASR_SYNTH_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "saasr/sot.h"
#include "saasr/tensor.h"

namespace saasr {

struct InventoryConfig {
  std::size_t num_speakers = 16;
  std::size_t feature_dim = 16;    // f^a
  std::size_t signature_dim = 16;  // f^d
  std::size_t vocab_size = 24;     // includes the two markers
  double token_scale = 1.0;        // norm of the token component
  double speaker_scale = 1.0;      // norm of the projected signature
  double max_signature_cosine = 0.8;

  void Validate() const;
};

class SpeakerInventory {
 public:
  // Signatures are unit vectors drawn until every pair satisfies
  // |cos| <= max_signature_cosine.
  static SpeakerInventory Generate(const InventoryConfig& config,
                                   std::uint64_t seed);
  // Rebuilds an inventory from stored parts; checks the invariants.
  SpeakerInventory(InventoryConfig config, std::uint64_t seed,
                   std::vector<std::vector<double>> signatures,
                   std::vector<std::vector<std::vector<double>>> emissions);

  const InventoryConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return signatures_.size(); }
  // speaker ids are 0-based inventory indices.
  const std::vector<double>& signature(std::size_t speaker) const;
  // Throws ArgumentError for an unknown speaker or a non-content token.
  const std::vector<double>& emission(std::size_t speaker,
                                      std::size_t token) const;
  const std::vector<std::vector<double>>& signatures() const {
    return signatures_;
  }
  // [speaker][token], markers included as zero vectors.
  const std::vector<std::vector<std::vector<double>>>& emissions() const {
    return emissions_;
  }

 private:
  InventoryConfig config_;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<double>> signatures_;
  std::vector<std::vector<std::vector<double>>> emissions_;
};

// Each token emits frames_per_token frames of its emission vector plus
// N(0, noise_stddev^2) noise. Returns [tokens * frames_per_token, f^a].
Tensor SynthUtterance(const SpeakerInventory& inventory, std::size_t speaker,
                      std::span<const std::size_t> tokens,
                      std::size_t frames_per_token, double noise_stddev,
                      std::mt19937_64& rng);

// Sum of the sources placed at their offsets, zero elsewhere. Offsets must
// ascend with gaps of at least min_delay frames.
Tensor Mix(std::span<const Tensor> sources, std::span<const std::size_t> offsets,
           std::size_t min_delay);

struct DatasetConfig {
  // Probability of 1, 2 and 3 speakers.
  std::array<double, 3> speaker_count_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::size_t profiles_per_sample = 8;
  std::size_t min_tokens = 3;
  std::size_t max_tokens = 8;
  std::size_t frames_per_token = 4;
  double noise_stddev = 0.1;
  std::size_t min_delay = 5;

  void Validate() const;
};

struct MixtureSample {
  std::size_t index = 0;
  Tensor features;                  // X, [l^a, f^a]
  std::vector<Utterance> utterances;  // speaker_id indexes `profiles`, 1-based
  SotTranscript transcript;
  std::vector<std::vector<double>> profiles;  // D, K rows of f^d
  std::vector<std::size_t> profile_speakers;  // inventory id of each row of D
  std::vector<std::size_t> true_speakers;     // inventory ids, start order

  std::size_t speaker_count() const { return true_speakers.size(); }
};

// Sample `index` draws from its own generator seeded by (seed, index), so
// any subset can be produced independently and in parallel.
MixtureSample GenerateSample(const SpeakerInventory& inventory,
                             const DatasetConfig& config, std::uint64_t seed,
                             std::size_t index);
// Samples first_index .. first_index + n - 1.
std::vector<MixtureSample> GenerateDataset(const SpeakerInventory& inventory,
                                           const DatasetConfig& config,
                                           std::uint64_t seed, std::size_t n,
                                           std::size_t first_index = 0);

}  // namespace saasr

#endif  // SAASR_SYNTH_H_
