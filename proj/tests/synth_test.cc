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

#include <array>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "saasr/errors.h"
#include "saasr/sot.h"
#include "saasr/synth.h"
#include "test_util.h"

namespace saasr {
namespace {

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(InventoryTest, SignaturesAreUnitAndSeparated) {
  const InventoryConfig c;
  const SpeakerInventory inv = SpeakerInventory::Generate(c, 4);
  ASSERT_EQ(inv.size(), c.num_speakers);
  for (std::size_t i = 0; i < inv.size(); ++i) {
    EXPECT_NEAR(Dot(inv.signature(i), inv.signature(i)), 1.0, 1e-12);
    for (std::size_t j = i + 1; j < inv.size(); ++j) {
      EXPECT_LE(std::abs(Dot(inv.signature(i), inv.signature(j))), c.max_signature_cosine);
    }
  }
  EXPECT_THROW(inv.emission(0, kSpeakerChange), ArgumentError);
  EXPECT_THROW(inv.emission(c.num_speakers, 3), ArgumentError);
}

TEST(InventoryTest, RebuildChecksParts) {
  const SpeakerInventory inv = SpeakerInventory::Generate(InventoryConfig{}, 4);
  auto sig = inv.signatures();
  EXPECT_NO_THROW(SpeakerInventory(inv.config(), 4, sig, inv.emissions()));
  sig[0][0] += 0.5;
  EXPECT_THROW(SpeakerInventory(inv.config(), 4, sig, inv.emissions()), ArgumentError);
}

TEST(DatasetTest, SameSeedIsBitIdentical) {
  const SpeakerInventory inv = SpeakerInventory::Generate(InventoryConfig{}, 1);
  const auto a = GenerateDataset(inv, DatasetConfig{}, 9, 30);
  const auto b = GenerateDataset(inv, DatasetConfig{}, 9, 30);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].features.shape(), b[i].features.shape());
    EXPECT_TRUE(std::equal(a[i].features.values().begin(), a[i].features.values().end(),
                           b[i].features.values().begin()));
    EXPECT_EQ(a[i].transcript, b[i].transcript);
    EXPECT_EQ(a[i].profile_speakers, b[i].profile_speakers);
  }
  // A sample does not depend on which other samples were generated.
  const auto tail = GenerateDataset(inv, DatasetConfig{}, 9, 5, 25);
  EXPECT_EQ(tail[0].transcript, a[25].transcript);
  EXPECT_EQ(tail[0].index, 25u);
}

TEST(DatasetTest, SpeakerCountHistogramFollowsProbabilities) {
  const SpeakerInventory inv = SpeakerInventory::Generate(InventoryConfig{}, 2);
  DatasetConfig c;
  c.speaker_count_probs = {0.5, 0.3, 0.2};
  const std::size_t n = 6000;
  std::array<double, 3> freq{};
  for (const MixtureSample& s : GenerateDataset(inv, c, 3, n)) {
    freq[s.speaker_count() - 1] += 1.0 / n;
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(freq[i], c.speaker_count_probs[i], 0.02);
}

TEST(DatasetTest, SamplesSatisfyStructuralInvariants) {
  const SpeakerInventory inv = SpeakerInventory::Generate(InventoryConfig{}, 5);
  const DatasetConfig c;
  for (const MixtureSample& s : GenerateDataset(inv, c, 6, 300)) {
    EXPECT_NO_THROW(ValidateTranscript(s.transcript));
    EXPECT_EQ(CountUtterances(s.transcript.tokens), s.speaker_count());
    EXPECT_EQ(s.profiles.size(), c.profiles_per_sample);
    EXPECT_EQ(std::set<std::size_t>(s.profile_speakers.begin(), s.profile_speakers.end()).size(),
              c.profiles_per_sample);
    for (std::size_t i = 0; i < s.utterances.size(); ++i) {
      const Utterance& u = s.utterances[i];
      EXPECT_EQ(s.profile_speakers[u.speaker_id - 1], s.true_speakers[i]);
      EXPECT_EQ(s.profiles[u.speaker_id - 1], inv.signature(s.true_speakers[i]));
      EXPECT_GE(u.tokens.size(), c.min_tokens);
      EXPECT_LE(u.tokens.size(), c.max_tokens);
      if (i > 0) {
        const std::size_t prev = s.utterances[i - 1].start_frame;
        EXPECT_GE(u.start_frame, prev + c.min_delay);
        // Each speaker starts before the previous one ends.
        EXPECT_LE(u.start_frame, prev + s.utterances[i - 1].tokens.size() * c.frames_per_token);
      }
    }
  }
}

TEST(SynthTest, NoiselessUtteranceRepeatsEmissions) {
  const SpeakerInventory inv = SpeakerInventory::Generate(InventoryConfig{}, 7);
  std::mt19937_64 rng(1);
  const std::vector<std::size_t> tokens{4, 9};
  const Tensor x = SynthUtterance(inv, 3, tokens, 3, 0.0, rng);
  ASSERT_EQ(x.rows(), 6u);
  for (std::size_t t = 0; t < 6; ++t) {
    const auto& e = inv.emission(3, tokens[t / 3]);
    for (std::size_t f = 0; f < e.size(); ++f) EXPECT_EQ(x.at(t, f), e[f]);
  }
}

TEST(MixTest, CommutativeForFixedOffsets) {
  std::mt19937_64 rng(8);
  const Tensor a = test::RandomTensor({5, 3}, rng), b = test::RandomTensor({7, 3}, rng);
  const std::vector<std::size_t> zero{0, 0};
  const Tensor ab = Mix(std::vector<Tensor>{a, b}, zero, 0);
  const Tensor ba = Mix(std::vector<Tensor>{b, a}, zero, 0);
  ASSERT_EQ(ab.shape(), ba.shape());
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(ab.at(i), ba.at(i));
  const Tensor c = test::RandomTensor({4, 3}, rng);
  const std::vector<std::size_t> three{0, 0, 0};
  const Tensor abc = Mix(std::vector<Tensor>{a, b, c}, three, 0);
  const Tensor cab = Mix(std::vector<Tensor>{c, a, b}, three, 0);
  for (std::size_t i = 0; i < abc.size(); ++i) EXPECT_NEAR(abc.at(i), cab.at(i), 1e-15);
}

TEST(MixTest, PlacesSourcesAtOffsets) {
  const Tensor a({2, 1}, {1.0, 2.0}), b({3, 1}, {10.0, 20.0, 30.0});
  const Tensor m = Mix(std::vector<Tensor>{a, b}, std::vector<std::size_t>{0, 1}, 1);
  EXPECT_EQ(std::vector<double>(m.values().begin(), m.values().end()),
            (std::vector<double>{1.0, 12.0, 20.0, 30.0}));
  EXPECT_THROW(Mix(std::vector<Tensor>{a, b}, std::vector<std::size_t>{0, 1}, 2),
               ArgumentError);
}

TEST(ConfigTest, RejectsInvalidValues) {
  DatasetConfig d;
  d.speaker_count_probs = {0.5, 0.5, 0.5};
  EXPECT_THROW(d.Validate(), ArgumentError);
  d = DatasetConfig{};
  d.min_tokens = 0;
  EXPECT_THROW(d.Validate(), ArgumentError);
  InventoryConfig i;
  i.vocab_size = 2;
  EXPECT_THROW(i.Validate(), ArgumentError);
  i = InventoryConfig{};
  i.num_speakers = 4;
  DatasetConfig eight;
  EXPECT_THROW(GenerateSample(SpeakerInventory::Generate(i, 1), eight, 1, 0), ArgumentError);
}

}  // namespace
}  // namespace saasr
