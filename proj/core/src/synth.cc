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

#include "saasr/synth.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "saasr/errors.h"

namespace saasr {

namespace {

constexpr int kMaxSignatureDraws = 100000;

std::vector<double> GaussianVector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = normal(rng);
  return v;
}

double Norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void ScaleTo(std::vector<double>& v, double norm) {
  const double n = Norm(v);
  for (double& x : v) x *= norm / n;
}

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

void InventoryConfig::Validate() const {
  if (num_speakers == 0 || feature_dim == 0 || signature_dim == 0) {
    throw ArgumentError("inventory dimensions must be positive");
  }
  if (vocab_size <= kFirstContentToken) {
    throw ArgumentError("inventory vocab_size must exceed the two markers");
  }
  if (!(max_signature_cosine > 0.0 && max_signature_cosine <= 1.0)) {
    throw ArgumentError("max_signature_cosine must lie in (0, 1]");
  }
  if (token_scale < 0.0 || speaker_scale < 0.0) {
    throw ArgumentError("emission scales must be non-negative");
  }
}

SpeakerInventory SpeakerInventory::Generate(const InventoryConfig& config,
                                            std::uint64_t seed) {
  config.Validate();
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> sigs;
  int draws = 0;
  while (sigs.size() < config.num_speakers) {
    if (++draws > kMaxSignatureDraws) {
      throw ArgumentError("cannot place " + std::to_string(config.num_speakers) +
                          " signatures in " +
                          std::to_string(config.signature_dim) +
                          " dimensions under the cosine limit");
    }
    std::vector<double> s = GaussianVector(config.signature_dim, rng);
    if (Norm(s) < 1e-6) continue;
    ScaleTo(s, 1.0);
    const bool separated = std::all_of(sigs.begin(), sigs.end(), [&](const auto& o) {
      return std::abs(Dot(s, o)) <= config.max_signature_cosine;
    });
    if (separated) sigs.push_back(std::move(s));
  }

  // Signature-to-feature projection, shared by all speakers.
  std::vector<std::vector<double>> proj(config.feature_dim);
  for (auto& row : proj) row = GaussianVector(config.signature_dim, rng);
  std::vector<std::vector<double>> token_part(config.vocab_size);
  for (std::size_t t = kFirstContentToken; t < config.vocab_size; ++t) {
    token_part[t] = GaussianVector(config.feature_dim, rng);
    ScaleTo(token_part[t], config.token_scale);
  }
  std::vector<std::vector<std::vector<double>>> emissions(config.num_speakers);
  for (std::size_t s = 0; s < config.num_speakers; ++s) {
    std::vector<double> voice(config.feature_dim);
    for (std::size_t i = 0; i < config.feature_dim; ++i) {
      voice[i] = Dot(proj[i], sigs[s]);
    }
    ScaleTo(voice, config.speaker_scale);
    emissions[s].assign(config.vocab_size,
                        std::vector<double>(config.feature_dim, 0.0));
    for (std::size_t t = kFirstContentToken; t < config.vocab_size; ++t) {
      for (std::size_t i = 0; i < config.feature_dim; ++i) {
        emissions[s][t][i] = token_part[t][i] + voice[i];
      }
    }
  }
  return SpeakerInventory(config, seed, std::move(sigs), std::move(emissions));
}

SpeakerInventory::SpeakerInventory(
    InventoryConfig config, std::uint64_t seed,
    std::vector<std::vector<double>> signatures,
    std::vector<std::vector<std::vector<double>>> emissions)
    : config_(config),
      seed_(seed),
      signatures_(std::move(signatures)),
      emissions_(std::move(emissions)) {
  config_.Validate();
  if (signatures_.size() != config_.num_speakers ||
      emissions_.size() != config_.num_speakers) {
    throw ArgumentError("inventory holds the wrong number of speakers");
  }
  for (std::size_t s = 0; s < signatures_.size(); ++s) {
    if (signatures_[s].size() != config_.signature_dim) {
      throw ArgumentError("signature " + std::to_string(s) + " has wrong size");
    }
    if (std::abs(Norm(signatures_[s]) - 1.0) > 1e-9) {
      throw ArgumentError("signature " + std::to_string(s) + " is not unit norm");
    }
    for (std::size_t o = 0; o < s; ++o) {
      if (std::abs(Dot(signatures_[s], signatures_[o])) >
          config_.max_signature_cosine) {
        throw ArgumentError("signatures " + std::to_string(o) + " and " +
                            std::to_string(s) + " are too similar");
      }
    }
    if (emissions_[s].size() != config_.vocab_size) {
      throw ArgumentError("emission table has the wrong vocabulary size");
    }
    for (const auto& e : emissions_[s]) {
      if (e.size() != config_.feature_dim) {
        throw ArgumentError("emission vector has the wrong dimension");
      }
    }
  }
}

const std::vector<double>& SpeakerInventory::signature(std::size_t speaker) const {
  if (speaker >= signatures_.size()) {
    throw ArgumentError("unknown speaker " + std::to_string(speaker));
  }
  return signatures_[speaker];
}

const std::vector<double>& SpeakerInventory::emission(std::size_t speaker,
                                                      std::size_t token) const {
  if (speaker >= emissions_.size()) {
    throw ArgumentError("unknown speaker " + std::to_string(speaker));
  }
  if (token < kFirstContentToken || token >= config_.vocab_size) {
    throw ArgumentError("token " + std::to_string(token) +
                        " is not a content token");
  }
  return emissions_[speaker][token];
}

Tensor SynthUtterance(const SpeakerInventory& inventory, std::size_t speaker,
                      std::span<const std::size_t> tokens,
                      std::size_t frames_per_token, double noise_stddev,
                      std::mt19937_64& rng) {
  if (frames_per_token == 0) throw ArgumentError("frames_per_token must be >= 1");
  if (noise_stddev < 0.0) throw ArgumentError("noise_stddev must be >= 0");
  const std::size_t dim = inventory.config().feature_dim;
  std::vector<double> x;
  x.reserve(tokens.size() * frames_per_token * dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t : tokens) {
    const std::vector<double>& e = inventory.emission(speaker, t);
    for (std::size_t f = 0; f < frames_per_token; ++f) {
      for (std::size_t i = 0; i < dim; ++i) {
        x.push_back(noise_stddev > 0.0 ? e[i] + noise_stddev * noise(rng) : e[i]);
      }
    }
  }
  return Tensor({tokens.size() * frames_per_token, dim}, std::move(x));
}

Tensor Mix(std::span<const Tensor> sources, std::span<const std::size_t> offsets,
           std::size_t min_delay) {
  if (sources.empty()) throw ArgumentError("nothing to mix");
  if (sources.size() != offsets.size()) {
    throw ArgumentError("mix needs one offset per source");
  }
  const std::size_t dim = sources[0].cols();
  std::size_t length = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].rank() != 2 || sources[i].cols() != dim) {
      throw ArgumentError("mix sources differ in feature dimension");
    }
    if (i > 0 && offsets[i] < offsets[i - 1] + min_delay) {
      throw ArgumentError("offset " + std::to_string(offsets[i]) +
                          " starts less than " + std::to_string(min_delay) +
                          " frames after " + std::to_string(offsets[i - 1]));
    }
    length = std::max(length, offsets[i] + sources[i].rows());
  }
  std::vector<double> out(length * dim, 0.0);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto v = sources[i].values();
    double* dst = out.data() + offsets[i] * dim;
    for (std::size_t j = 0; j < v.size(); ++j) dst[j] += v[j];
  }
  return Tensor({length, dim}, std::move(out));
}

void DatasetConfig::Validate() const {
  double total = 0.0;
  for (double p : speaker_count_probs) {
    if (p < 0.0) throw ArgumentError("speaker count probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ArgumentError("speaker count probabilities must sum to 1");
  }
  if (profiles_per_sample < 3) {
    throw ArgumentError("profiles_per_sample must cover three speakers");
  }
  if (min_tokens == 0 || min_tokens > max_tokens) {
    throw ArgumentError("need 1 <= min_tokens <= max_tokens");
  }
  if (frames_per_token == 0) throw ArgumentError("frames_per_token must be >= 1");
  if (noise_stddev < 0.0) throw ArgumentError("noise_stddev must be >= 0");
  if (min_delay > min_tokens * frames_per_token) {
    // The delay is drawn up to the previous utterance's length.
    throw ArgumentError("min_delay exceeds the shortest utterance");
  }
}

MixtureSample GenerateSample(const SpeakerInventory& inventory,
                             const DatasetConfig& config, std::uint64_t seed,
                             std::size_t index) {
  config.Validate();
  if (inventory.size() < config.profiles_per_sample) {
    throw ArgumentError("inventory of " + std::to_string(inventory.size()) +
                        " speakers cannot fill " +
                        std::to_string(config.profiles_per_sample) + " profiles");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  std::mt19937_64 rng(seq);

  MixtureSample s;
  s.index = index;
  std::discrete_distribution<std::size_t> count_dist(
      config.speaker_count_probs.begin(), config.speaker_count_probs.end());
  const std::size_t n_spk = count_dist(rng) + 1;

  std::vector<std::size_t> pool(inventory.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::shuffle(pool.begin(), pool.end(), rng);
  s.true_speakers.assign(pool.begin(), pool.begin() + n_spk);
  s.profile_speakers.assign(pool.begin(), pool.begin() + config.profiles_per_sample);
  std::shuffle(s.profile_speakers.begin(), s.profile_speakers.end(), rng);
  for (std::size_t id : s.profile_speakers) {
    s.profiles.push_back(inventory.signature(id));
  }

  const std::size_t vocab = inventory.config().vocab_size;
  std::uniform_int_distribution<std::size_t> len_dist(config.min_tokens,
                                                      config.max_tokens);
  std::uniform_int_distribution<std::size_t> token_dist(kFirstContentToken,
                                                        vocab - 1);
  std::vector<Tensor> sources;
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < n_spk; ++i) {
    Utterance u;
    u.tokens.resize(len_dist(rng));
    for (std::size_t& t : u.tokens) t = token_dist(rng);
    const auto pos = std::find(s.profile_speakers.begin(),
                               s.profile_speakers.end(), s.true_speakers[i]);
    u.speaker_id = static_cast<std::size_t>(pos - s.profile_speakers.begin()) + 1;
    if (i == 0) {
      u.start_frame = 0;
    } else {
      const std::size_t prev_len = sources.back().rows();
      std::uniform_int_distribution<std::size_t> delay(config.min_delay,
                                                       prev_len);
      u.start_frame = offsets.back() + delay(rng);
    }
    sources.push_back(SynthUtterance(inventory, s.true_speakers[i], u.tokens,
                                     config.frames_per_token,
                                     config.noise_stddev, rng));
    offsets.push_back(u.start_frame);
    s.utterances.push_back(std::move(u));
  }
  s.features = Mix(sources, offsets, config.min_delay);
  s.transcript = Serialize(s.utterances);
  return s;
}

std::vector<MixtureSample> GenerateDataset(const SpeakerInventory& inventory,
                                           const DatasetConfig& config,
                                           std::uint64_t seed, std::size_t n,
                                           std::size_t first_index) {
  std::vector<MixtureSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(GenerateSample(inventory, config, seed, first_index + i));
  }
  return out;
}

}  // namespace saasr
