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

// Speaker-attributed attention encoder-decoder.
//
// ASR block: conformer encoder over the acoustic features and a transformer
// decoder whose first feed-forward sublayer also receives the weighted
// speaker profile. Speaker block: convolutional speaker encoder and a
// speaker decoder whose first layer queries the ASR encoder output with the
// ASR decoder's first-layer self-attention state and reads values from the
// speaker encoder. The speaker query attends over the profile inventory by
// cosine similarity.
//
// All sequence tensors are [length, features].

#ifndef SAASR_MODEL_H_
#define SAASR_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "saasr/nn.h"
#include "saasr/sot.h"
#include "saasr/tensor.h"

namespace saasr {

struct ModelConfig {
  std::size_t input_dim = 8;     // acoustic feature dim
  std::size_t model_dim = 32;    // hidden / embedding dim
  std::size_t profile_dim = 16;  // speaker profile dim
  std::size_t vocab_size = 24;   // includes <sc> and <eos>
  std::size_t heads = 4;
  std::size_t encoder_layers = 2;
  std::size_t asr_decoder_layers = 2;
  std::size_t speaker_decoder_layers = 2;
  std::size_t ff_dim = 64;
  std::size_t subsample = 4;     // power of two
  std::size_t conv_kernel = 3;   // conformer depthwise kernel, odd
  std::size_t se_reduction = 8;
  std::size_t speaker_conv_layers = 2;  // same-padded convs after subsampling
  double dropout = 0.1;

  // Throws ArgumentError on an invalid combination.
  void Validate() const;
  // Reserved start-of-sequence row of the token embedding table.
  std::size_t sos_id() const { return vocab_size; }
  // Output length for `frames` input frames: ceil(frames / subsample).
  std::size_t EncodedLength(std::size_t frames) const;
};

using NamedTensor = std::pair<std::string, Tensor>;

struct FeedForwardWeights {
  Tensor norm_gain, norm_shift;
  Tensor in_weight, in_bias;
  Tensor out_weight, out_bias;
};

struct AttentionSublayer {
  Tensor norm_gain, norm_shift;
  AttentionWeights attention;
};

struct ConvModuleWeights {
  Tensor norm_gain, norm_shift;
  Tensor pointwise_in_weight, pointwise_in_bias;      // [h, 2h]
  Tensor depthwise_kernel, depthwise_bias;            // [k, h]
  Tensor pointwise_extra_weight, pointwise_extra_bias;  // [h, h]
  Tensor mid_norm_gain, mid_norm_shift;
  Tensor pointwise_out_weight, pointwise_out_bias;    // [h, h]
  SqueezeExciteWeights squeeze_excite;
};

struct ConformerBlockWeights {
  FeedForwardWeights ff_first;
  AttentionSublayer self_attention;
  ConvModuleWeights conv;
  FeedForwardWeights ff_second;
  Tensor final_norm_gain, final_norm_shift;
};

struct ConvLayerWeights {
  Tensor weight, bias;  // [kernel * in, out], [out]
};

struct AsrDecoderLayerWeights {
  AttentionSublayer self_attention;
  AttentionSublayer source_attention;
  FeedForwardWeights ff;
};

struct SpeakerDecoderLayerWeights {
  AttentionSublayer self_attention;  // unused in the first layer
  AttentionSublayer source_attention;
  FeedForwardWeights ff;
};

// Every trainable tensor. Handles alias the entries of `named`, which fixes
// the checkpoint order.
struct ModelParams {
  // ASR encoder
  std::vector<ConvLayerWeights> asr_subsample;
  Tensor asr_input_weight, asr_input_bias;
  std::vector<ConformerBlockWeights> conformer;
  // Speaker encoder
  std::vector<ConvLayerWeights> speaker_subsample;
  std::vector<ConvLayerWeights> speaker_convs;
  Tensor speaker_output_weight, speaker_output_bias;  // [f^d, f^h]
  // ASR decoder
  Tensor token_embedding;  // [|V| + 1, f^h], last row is <sos>
  std::vector<AsrDecoderLayerWeights> asr_decoder;
  Tensor profile_projection;  // W^spk, stored [f^d, f^h]
  Tensor asr_final_norm_gain, asr_final_norm_shift;
  Tensor output_weight, output_bias;  // W^o [f^h, |V|], b^o [|V|]
  // Speaker decoder
  std::vector<SpeakerDecoderLayerWeights> speaker_decoder;
  Tensor speaker_final_norm_gain, speaker_final_norm_shift;
  Tensor query_projection;  // W^q, stored [f^h, f^d]

  std::vector<NamedTensor> named;
};

struct EncoderStates {
  Tensor asr;      // [l^h, f^h]
  Tensor speaker;  // [l^h, f^h]
};

// Whether the speaker block feeds the ASR decoder.
enum class ProfileMode {
  kJoint,        // weighted profile computed from D and injected
  kZeroProfile,  // weighted profile fixed at 0; speaker block not evaluated
};

// Dropout is active only when `rng` is set.
struct ForwardOptions {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Teacher-forced decoder outputs, one row per output position n.
struct DecoderOutputs {
  Tensor token_log_probs;    // log o_n, [N, |V|]
  Tensor shared_state;       // first-layer ASR self-attention state, [N, f^h]
  // Undefined in kZeroProfile mode:
  Tensor speaker_query;      // q_n, [N, f^d]
  Tensor speaker_log_probs;  // log beta_n, [N, K]
  Tensor speaker_probs;      // beta_n, [N, K]
  Tensor weighted_profile;   // d-bar_n, [N, f^d]
};

// Single decoder step, plain values.
struct StepOutput {
  std::vector<double> token_probs;      // o_n
  std::vector<double> token_log_probs;
  std::vector<double> speaker_query;    // q_n
  std::vector<double> speaker_probs;    // beta_n
  std::vector<double> speaker_log_probs;
  std::vector<double> weighted_profile; // d-bar_n
  std::vector<double> shared_state;
};

class SaAsrModel {
 public:
  SaAsrModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  std::vector<NamedTensor>& parameters() { return params_.named; }
  const std::vector<NamedTensor>& parameters() const { return params_.named; }
  std::size_t ParameterCount() const;

  // features: [l^a, f^a]. Throws ArgumentError if l^a < subsample.
  Tensor EncodeAsr(const Tensor& features,
                   const ForwardOptions& options = {}) const;
  Tensor EncodeSpeaker(const Tensor& features,
                       const ForwardOptions& options = {}) const;
  EncoderStates Encode(const Tensor& features,
                       const ForwardOptions& options = {}) const;

  // decoder_input starts with sos_id() followed by y_1..y_{N-1}; output row
  // n-1 holds the distributions for position n. profiles: [K, f^d].
  DecoderOutputs Decode(std::span<const std::size_t> decoder_input,
                        const EncoderStates& states, const Tensor& profiles,
                        ProfileMode mode,
                        const ForwardOptions& options = {}) const;

  // Distributions for the token following `prefix` (which excludes <sos>).
  StepOutput DecoderStep(std::span<const std::size_t> prefix,
                         const EncoderStates& states, const Tensor& profiles,
                         ProfileMode mode = ProfileMode::kJoint) const;

  // sum_n log o_{n, y_n} + log beta_{n, s_n} under teacher forcing.
  double JointLogProb(const SotTranscript& transcript, const Tensor& features,
                      const Tensor& profiles) const;

 private:
  Tensor FeedForward(const Tensor& x, const FeedForwardWeights& w,
                     const Tensor& extra_input, bool swish,
                     const ForwardOptions& options) const;
  Tensor ConformerBlock(const Tensor& x, const ConformerBlockWeights& w,
                        const ForwardOptions& options) const;
  Tensor ConvModule(const Tensor& x, const ConvModuleWeights& w,
                    const ForwardOptions& options) const;
  void CheckTokens(std::span<const std::size_t> decoder_input) const;

  ModelConfig config_;
  ModelParams params_;
};

// Teacher-forcing decoder input for a transcript: <sos>, y_1 .. y_{N-1}.
std::vector<std::size_t> DecoderInput(const ModelConfig& config,
                                      std::span<const std::size_t> tokens);

// Profile inventory D as a [K, f^d] tensor.
Tensor ProfileTensor(std::span<const std::vector<double>> profiles);

// JSON object with every ModelConfig field. Parsing rejects unknown keys
// and missing keys keep their defaults.
std::string ModelConfigToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const std::string& text);

// Checkpoint: <dir>/params.bin holds every tensor's float64 values,
// little-endian, back to back in manifest order; <dir>/params.json holds
// the config and the name/shape/offset manifest.
void SaveCheckpoint(const SaAsrModel& model, const std::string& dir);
SaAsrModel LoadCheckpoint(const std::string& dir);
// Copies values from `source` into `target`; names and shapes must match.
void CopyParameters(const SaAsrModel& source, SaAsrModel& target);
// FNV-1a over the raw parameter bytes in manifest order.
std::uint64_t ParameterHash(const SaAsrModel& model);

}  // namespace saasr

#endif  // SAASR_MODEL_H_
