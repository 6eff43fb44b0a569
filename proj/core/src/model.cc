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

#include "saasr/model.h"

#include <cmath>
#include <string>
#include <utility>

#include "saasr/errors.h"
#include "saasr/ops.h"

namespace saasr {

namespace {

class ParamBuilder {
 public:
  ParamBuilder(std::vector<NamedTensor>* named, std::uint64_t seed)
      : named_(named), rng_(seed) {}

  // Truncated normal with std 1/sqrt(fan_in), cut at two standard
  // deviations. fan_in is the leading dimension: input features for
  // [in, out] matrices, taps for depthwise kernels.
  Tensor Projection(const std::string& name, Shape shape) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(shape[0]));
    return Normal(name, std::move(shape), stddev);
  }

  Tensor Normal(const std::string& name, Shape shape, double stddev) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(NumElements(shape));
    for (double& x : v) {
      double z;
      do {
        z = dist(rng_);
      } while (std::abs(z) > 2.0);
      x = z * stddev;
    }
    return Add(name, Tensor(std::move(shape), std::move(v), true));
  }

  Tensor Zeros(const std::string& name, Shape shape) {
    return Add(name, Tensor::Zeros(std::move(shape), true));
  }

  Tensor Ones(const std::string& name, Shape shape) {
    return Add(name, Tensor::Full(std::move(shape), 1.0, true));
  }

  FeedForwardWeights FeedForward(const std::string& p, std::size_t dim,
                                 std::size_t hidden) {
    FeedForwardWeights w;
    w.norm_gain = Ones(p + ".norm.gain", {dim});
    w.norm_shift = Zeros(p + ".norm.shift", {dim});
    w.in_weight = Projection(p + ".in.weight", {dim, hidden});
    w.in_bias = Zeros(p + ".in.bias", {hidden});
    w.out_weight = Projection(p + ".out.weight", {hidden, dim});
    w.out_bias = Zeros(p + ".out.bias", {dim});
    return w;
  }

  AttentionSublayer Attention(const std::string& p, std::size_t dim) {
    AttentionSublayer s;
    s.norm_gain = Ones(p + ".norm.gain", {dim});
    s.norm_shift = Zeros(p + ".norm.shift", {dim});
    AttentionWeights& a = s.attention;
    a.query_weight = Projection(p + ".query.weight", {dim, dim});
    a.query_bias = Zeros(p + ".query.bias", {dim});
    a.key_weight = Projection(p + ".key.weight", {dim, dim});
    a.key_bias = Zeros(p + ".key.bias", {dim});
    a.value_weight = Projection(p + ".value.weight", {dim, dim});
    a.value_bias = Zeros(p + ".value.bias", {dim});
    a.output_weight = Projection(p + ".output.weight", {dim, dim});
    a.output_bias = Zeros(p + ".output.bias", {dim});
    return s;
  }

  ConvLayerWeights Conv(const std::string& p, std::size_t kernel,
                        std::size_t in, std::size_t out) {
    return {Projection(p + ".weight", {kernel * in, out}),
            Zeros(p + ".bias", {out})};
  }

 private:
  Tensor Add(const std::string& name, Tensor t) {
    named_->emplace_back(name, t);
    return t;
  }

  std::vector<NamedTensor>* named_;
  std::mt19937_64 rng_;
};

Tensor Norm(const Tensor& x, const Tensor& gain, const Tensor& shift) {
  return LayerNorm(x, gain, shift);
}

Tensor MaybeDropout(const Tensor& x, const ForwardOptions& options) {
  if (options.rng == nullptr || options.dropout <= 0.0) return x;
  return Dropout(x, options.dropout, *options.rng);
}

Tensor Attend(const Tensor& query_input, const Tensor& key, const Tensor& value,
              const AttentionSublayer& w, std::size_t heads, const Mask* mask,
              const ForwardOptions& options) {
  Tensor q = Norm(query_input, w.norm_gain, w.norm_shift);
  return MaybeDropout(
      MultiHeadAttention(q, key, value, heads, w.attention, mask), options);
}

Tensor SelfAttend(const Tensor& x, const AttentionSublayer& w,
                  std::size_t heads, const Mask* mask,
                  const ForwardOptions& options) {
  Tensor normed = Norm(x, w.norm_gain, w.norm_shift);
  return MaybeDropout(
      MultiHeadAttention(normed, normed, normed, heads, w.attention, mask),
      options);
}

// Stride-2 convolution, kernel 3, one frame of zero padding on each side.
Tensor SubsampleConv(const Tensor& x, const ConvLayerWeights& w) {
  return Relu(Linear(Im2Col1d(x, 3, 2, 1), w.weight, w.bias));
}

std::size_t Log2(std::size_t v) {
  std::size_t n = 0;
  while (v > 1) {
    v >>= 1;
    ++n;
  }
  return n;
}

}  // namespace

void ModelConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw ArgumentError("ModelConfig: " + what);
  };
  if (input_dim == 0 || model_dim == 0 || profile_dim == 0 || ff_dim == 0) {
    fail("dimensions must be positive");
  }
  if (vocab_size <= kFirstContentToken) fail("vocab_size too small");
  if (heads == 0 || model_dim % heads != 0) {
    fail("model_dim " + std::to_string(model_dim) + " not divisible by heads " +
         std::to_string(heads));
  }
  if (encoder_layers == 0) fail("encoder_layers must be positive");
  if (asr_decoder_layers < 2) fail("asr_decoder_layers must be at least 2");
  if (speaker_decoder_layers < 2) {
    fail("speaker_decoder_layers must be at least 2");
  }
  if (subsample == 0 || (subsample & (subsample - 1)) != 0) {
    fail("subsample must be a power of two");
  }
  if (conv_kernel % 2 == 0) fail("conv_kernel must be odd");
  if (se_reduction == 0 || model_dim % se_reduction != 0) {
    fail("se_reduction must divide model_dim");
  }
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
}

std::size_t ModelConfig::EncodedLength(std::size_t frames) const {
  return (frames + subsample - 1) / subsample;
}

SaAsrModel::SaAsrModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.Validate();
  const std::size_t h = config_.model_dim, fd = config_.profile_dim;
  const std::size_t V = config_.vocab_size;
  ParamBuilder b(&params_.named, seed);

  std::size_t in = config_.input_dim;
  for (std::size_t i = 0; i < Log2(config_.subsample); ++i) {
    params_.asr_subsample.push_back(
        b.Conv("asr_encoder.subsample." + std::to_string(i), 3, in, h));
    in = h;
  }
  params_.asr_input_weight = b.Projection("asr_encoder.input.weight", {in, h});
  params_.asr_input_bias = b.Zeros("asr_encoder.input.bias", {h});
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const std::string p = "asr_encoder.block." + std::to_string(l);
    ConformerBlockWeights w;
    w.ff_first = b.FeedForward(p + ".ff_first", h, config_.ff_dim);
    w.self_attention = b.Attention(p + ".self_attention", h);
    ConvModuleWeights& c = w.conv;
    c.norm_gain = b.Ones(p + ".conv.norm.gain", {h});
    c.norm_shift = b.Zeros(p + ".conv.norm.shift", {h});
    c.pointwise_in_weight = b.Projection(p + ".conv.pointwise_in.weight", {h, 2 * h});
    c.pointwise_in_bias = b.Zeros(p + ".conv.pointwise_in.bias", {2 * h});
    c.depthwise_kernel = b.Projection(p + ".conv.depthwise.kernel", {config_.conv_kernel, h});
    c.depthwise_bias = b.Zeros(p + ".conv.depthwise.bias", {h});
    c.pointwise_extra_weight = b.Projection(p + ".conv.pointwise_extra.weight", {h, h});
    c.pointwise_extra_bias = b.Zeros(p + ".conv.pointwise_extra.bias", {h});
    c.mid_norm_gain = b.Ones(p + ".conv.mid_norm.gain", {h});
    c.mid_norm_shift = b.Zeros(p + ".conv.mid_norm.shift", {h});
    c.pointwise_out_weight = b.Projection(p + ".conv.pointwise_out.weight", {h, h});
    c.pointwise_out_bias = b.Zeros(p + ".conv.pointwise_out.bias", {h});
    const std::size_t r = h / config_.se_reduction;
    c.squeeze_excite.reduce_weight = b.Projection(p + ".conv.se.reduce.weight", {h, r});
    c.squeeze_excite.reduce_bias = b.Zeros(p + ".conv.se.reduce.bias", {r});
    c.squeeze_excite.expand_weight = b.Projection(p + ".conv.se.expand.weight", {r, h});
    c.squeeze_excite.expand_bias = b.Zeros(p + ".conv.se.expand.bias", {h});
    w.ff_second = b.FeedForward(p + ".ff_second", h, config_.ff_dim);
    w.final_norm_gain = b.Ones(p + ".final_norm.gain", {h});
    w.final_norm_shift = b.Zeros(p + ".final_norm.shift", {h});
    params_.conformer.push_back(std::move(w));
  }

  in = config_.input_dim;
  for (std::size_t i = 0; i < Log2(config_.subsample); ++i) {
    params_.speaker_subsample.push_back(
        b.Conv("speaker_encoder.subsample." + std::to_string(i), 3, in, fd));
    in = fd;
  }
  for (std::size_t i = 0; i < config_.speaker_conv_layers; ++i) {
    params_.speaker_convs.push_back(
        b.Conv("speaker_encoder.conv." + std::to_string(i), 3, in, fd));
    in = fd;
  }
  params_.speaker_output_weight = b.Projection("speaker_encoder.output.weight", {in, h});
  params_.speaker_output_bias = b.Zeros("speaker_encoder.output.bias", {h});

  params_.token_embedding = b.Normal("asr_decoder.embedding", {V + 1, h}, 1.0);
  for (std::size_t l = 0; l < config_.asr_decoder_layers; ++l) {
    const std::string p = "asr_decoder.layer." + std::to_string(l);
    AsrDecoderLayerWeights w;
    w.self_attention = b.Attention(p + ".self_attention", h);
    w.source_attention = b.Attention(p + ".source_attention", h);
    w.ff = b.FeedForward(p + ".ff", h, config_.ff_dim);
    params_.asr_decoder.push_back(std::move(w));
    if (l == 0) {
      params_.profile_projection = b.Projection("asr_decoder.profile_projection", {fd, h});
    }
  }
  params_.asr_final_norm_gain = b.Ones("asr_decoder.final_norm.gain", {h});
  params_.asr_final_norm_shift = b.Zeros("asr_decoder.final_norm.shift", {h});
  params_.output_weight = b.Projection("asr_decoder.output.weight", {h, V});
  params_.output_bias = b.Zeros("asr_decoder.output.bias", {V});

  for (std::size_t l = 0; l < config_.speaker_decoder_layers; ++l) {
    const std::string p = "speaker_decoder.layer." + std::to_string(l);
    SpeakerDecoderLayerWeights w;
    if (l > 0) w.self_attention = b.Attention(p + ".self_attention", h);
    w.source_attention = b.Attention(p + ".source_attention", h);
    w.ff = b.FeedForward(p + ".ff", h, config_.ff_dim);
    params_.speaker_decoder.push_back(std::move(w));
  }
  params_.speaker_final_norm_gain = b.Ones("speaker_decoder.final_norm.gain", {h});
  params_.speaker_final_norm_shift = b.Zeros("speaker_decoder.final_norm.shift", {h});
  params_.query_projection = b.Projection("speaker_decoder.query_projection", {h, fd});
}

std::size_t SaAsrModel::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_.named) n += t.size();
  return n;
}

Tensor SaAsrModel::FeedForward(const Tensor& x, const FeedForwardWeights& w,
                               const Tensor& extra_input, bool swish,
                               const ForwardOptions& options) const {
  Tensor input = extra_input.defined() ? Add(x, extra_input) : x;
  Tensor hidden = Linear(Norm(input, w.norm_gain, w.norm_shift), w.in_weight,
                         w.in_bias);
  hidden = swish ? Swish(hidden) : Relu(hidden);
  hidden = MaybeDropout(hidden, options);
  return MaybeDropout(Linear(hidden, w.out_weight, w.out_bias), options);
}

Tensor SaAsrModel::ConvModule(const Tensor& x, const ConvModuleWeights& w,
                              const ForwardOptions& options) const {
  Tensor y = Norm(x, w.norm_gain, w.norm_shift);
  y = Glu(Conv1dPointwise(y, w.pointwise_in_weight, w.pointwise_in_bias));
  y = DepthwiseConv1d(y, w.depthwise_kernel, w.depthwise_bias);
  y = Conv1dPointwise(y, w.pointwise_extra_weight, w.pointwise_extra_bias);
  y = Swish(Norm(y, w.mid_norm_gain, w.mid_norm_shift));
  y = Conv1dPointwise(y, w.pointwise_out_weight, w.pointwise_out_bias);
  y = SqueezeExcite(y, w.squeeze_excite);
  return MaybeDropout(y, options);
}

Tensor SaAsrModel::ConformerBlock(const Tensor& x,
                                  const ConformerBlockWeights& w,
                                  const ForwardOptions& options) const {
  Tensor y = Add(x, Scale(FeedForward(x, w.ff_first, Tensor(), true, options), 0.5));
  y = Add(y, SelfAttend(y, w.self_attention, config_.heads, nullptr, options));
  y = Add(y, ConvModule(y, w.conv, options));
  y = Add(y, Scale(FeedForward(y, w.ff_second, Tensor(), true, options), 0.5));
  return Norm(y, w.final_norm_gain, w.final_norm_shift);
}

Tensor SaAsrModel::EncodeAsr(const Tensor& features,
                             const ForwardOptions& options) const {
  if (features.rank() != 2 || features.cols() != config_.input_dim) {
    throw ArgumentError("EncodeAsr: features " + ShapeString(features.shape()) +
                        " do not have " + std::to_string(config_.input_dim) +
                        " columns");
  }
  if (features.rows() < config_.subsample) {
    throw ArgumentError("EncodeAsr: " + std::to_string(features.rows()) +
                        " frames is fewer than the subsampling factor " +
                        std::to_string(config_.subsample));
  }
  Tensor x = features;
  for (const ConvLayerWeights& conv : params_.asr_subsample) {
    x = SubsampleConv(x, conv);
  }
  x = Linear(x, params_.asr_input_weight, params_.asr_input_bias);
  x = Add(x, SinusoidalPositions(x.rows(), config_.model_dim));
  x = MaybeDropout(x, options);
  for (const ConformerBlockWeights& block : params_.conformer) {
    x = ConformerBlock(x, block, options);
  }
  return x;
}

Tensor SaAsrModel::EncodeSpeaker(const Tensor& features,
                                 const ForwardOptions& options) const {
  if (features.rank() != 2 || features.cols() != config_.input_dim) {
    throw ArgumentError("EncodeSpeaker: features " +
                        ShapeString(features.shape()) + " do not have " +
                        std::to_string(config_.input_dim) + " columns");
  }
  if (features.rows() < config_.subsample) {
    throw ArgumentError("EncodeSpeaker: " + std::to_string(features.rows()) +
                        " frames is fewer than the subsampling factor " +
                        std::to_string(config_.subsample));
  }
  Tensor x = features;
  for (const ConvLayerWeights& conv : params_.speaker_subsample) {
    x = SubsampleConv(x, conv);
  }
  for (const ConvLayerWeights& conv : params_.speaker_convs) {
    x = Relu(Linear(Im2Col1d(x, 3, 1, 1), conv.weight, conv.bias));
  }
  x = MaybeDropout(x, options);
  // Frame-level linear map in place of the profile extractor's pooling.
  return Linear(x, params_.speaker_output_weight, params_.speaker_output_bias);
}

EncoderStates SaAsrModel::Encode(const Tensor& features,
                                 const ForwardOptions& options) const {
  EncoderStates states{EncodeAsr(features, options),
                       EncodeSpeaker(features, options)};
  if (states.asr.rows() != states.speaker.rows()) {
    throw ArgumentError("encoder lengths differ");
  }
  return states;
}

void SaAsrModel::CheckTokens(std::span<const std::size_t> decoder_input) const {
  if (decoder_input.empty()) {
    throw ArgumentError("decoder input is empty");
  }
  if (decoder_input[0] != config_.sos_id()) {
    throw ArgumentError("decoder input must start with <sos>");
  }
  for (std::size_t i = 1; i < decoder_input.size(); ++i) {
    if (decoder_input[i] >= config_.vocab_size) {
      throw ArgumentError("token " + std::to_string(decoder_input[i]) +
                          " outside vocabulary of " +
                          std::to_string(config_.vocab_size));
    }
  }
}

DecoderOutputs SaAsrModel::Decode(std::span<const std::size_t> decoder_input,
                                  const EncoderStates& states,
                                  const Tensor& profiles, ProfileMode mode,
                                  const ForwardOptions& options) const {
  CheckTokens(decoder_input);
  const bool joint = mode == ProfileMode::kJoint;
  if (joint) {
    if (profiles.rank() != 2 || profiles.cols() != config_.profile_dim ||
        profiles.rows() == 0) {
      throw ArgumentError("profiles must be [K >= 1, " +
                          std::to_string(config_.profile_dim) + "], got " +
                          (profiles.defined() ? ShapeString(profiles.shape())
                                              : std::string("<undefined>")));
    }
  }
  const std::size_t n = decoder_input.size();
  const std::size_t heads = config_.heads;
  const Mask causal = Mask::Causal(n);
  DecoderOutputs out;

  Tensor z = Add(Embedding(params_.token_embedding, decoder_input),
                 SinusoidalPositions(n, config_.model_dim));
  z = MaybeDropout(z, options);

  for (std::size_t l = 0; l < params_.asr_decoder.size(); ++l) {
    const AsrDecoderLayerWeights& w = params_.asr_decoder[l];
    Tensor z_bar = Add(z, SelfAttend(z, w.self_attention, heads, &causal, options));
    Tensor z_bar_bar = Add(z_bar, Attend(z_bar, states.asr, states.asr,
                                         w.source_attention, heads, nullptr,
                                         options));
    Tensor profile_input;
    if (l == 0) {
      out.shared_state = z_bar;
      if (joint) {
        // Speaker block, driven by the first-layer self-attention state.
        const auto& sd = params_.speaker_decoder;
        Tensor s = Add(z_bar, Attend(z_bar, states.asr, states.speaker,
                                     sd[0].source_attention, heads, nullptr,
                                     options));
        s = Add(s, FeedForward(s, sd[0].ff, Tensor(), false, options));
        for (std::size_t k = 1; k < sd.size(); ++k) {
          s = Add(s, SelfAttend(s, sd[k].self_attention, heads, &causal, options));
          s = Add(s, Attend(s, states.speaker, states.speaker,
                            sd[k].source_attention, heads, nullptr, options));
          s = Add(s, FeedForward(s, sd[k].ff, Tensor(), false, options));
        }
        s = Norm(s, params_.speaker_final_norm_gain,
                 params_.speaker_final_norm_shift);
        out.speaker_query = MatMul(s, params_.query_projection);
        Tensor cosine = CosineSimilarity(out.speaker_query, profiles);
        out.speaker_probs = Softmax(cosine, 1);
        out.speaker_log_probs = LogSoftmax(cosine, 1);
        out.weighted_profile = MatMul(out.speaker_probs, profiles);
        profile_input = MatMul(out.weighted_profile, params_.profile_projection);
      }
    }
    z = Add(z_bar_bar, FeedForward(z_bar_bar, w.ff, profile_input, false, options));
  }
  z = Norm(z, params_.asr_final_norm_gain, params_.asr_final_norm_shift);
  out.token_log_probs =
      LogSoftmax(Linear(z, params_.output_weight, params_.output_bias), 1);
  return out;
}

StepOutput SaAsrModel::DecoderStep(std::span<const std::size_t> prefix,
                                   const EncoderStates& states,
                                   const Tensor& profiles,
                                   ProfileMode mode) const {
  std::vector<std::size_t> input;
  input.reserve(prefix.size() + 1);
  input.push_back(config_.sos_id());
  input.insert(input.end(), prefix.begin(), prefix.end());
  DecoderOutputs d = Decode(input, states, profiles, mode);
  const std::size_t last = input.size() - 1;
  auto row = [last](const Tensor& t) {
    const std::size_t c = t.cols();
    auto v = t.values();
    return std::vector<double>(v.begin() + last * c, v.begin() + (last + 1) * c);
  };
  StepOutput step;
  step.token_log_probs = row(d.token_log_probs);
  step.token_probs.reserve(step.token_log_probs.size());
  for (double lp : step.token_log_probs) step.token_probs.push_back(std::exp(lp));
  step.shared_state = row(d.shared_state);
  if (mode == ProfileMode::kJoint) {
    step.speaker_query = row(d.speaker_query);
    step.speaker_probs = row(d.speaker_probs);
    step.speaker_log_probs = row(d.speaker_log_probs);
    step.weighted_profile = row(d.weighted_profile);
  }
  return step;
}

double SaAsrModel::JointLogProb(const SotTranscript& transcript,
                                const Tensor& features,
                                const Tensor& profiles) const {
  ValidateTranscript(transcript);
  const std::size_t k = profiles.rows();
  for (std::size_t s : transcript.speakers) {
    if (s > k) {
      throw ArgumentError("speaker label " + std::to_string(s) +
                          " exceeds profile count " + std::to_string(k));
    }
  }
  EncoderStates states = Encode(features);
  std::vector<std::size_t> input = DecoderInput(config_, transcript.tokens);
  DecoderOutputs d = Decode(input, states, profiles, ProfileMode::kJoint);
  const std::size_t V = config_.vocab_size;
  double total = 0.0;
  for (std::size_t n = 0; n < transcript.tokens.size(); ++n) {
    total += d.token_log_probs.values()[n * V + transcript.tokens[n]];
    total += d.speaker_log_probs.values()[n * k + transcript.speakers[n] - 1];
  }
  return total;
}

std::vector<std::size_t> DecoderInput(const ModelConfig& config,
                                      std::span<const std::size_t> tokens) {
  std::vector<std::size_t> input;
  input.reserve(tokens.size());
  input.push_back(config.sos_id());
  if (!tokens.empty()) input.insert(input.end(), tokens.begin(), tokens.end() - 1);
  return input;
}

Tensor ProfileTensor(std::span<const std::vector<double>> profiles) {
  if (profiles.empty()) throw ArgumentError("empty profile set");
  const std::size_t dim = profiles[0].size();
  std::vector<double> v;
  v.reserve(profiles.size() * dim);
  for (const auto& p : profiles) {
    if (p.size() != dim) throw ArgumentError("profiles differ in dimension");
    v.insert(v.end(), p.begin(), p.end());
  }
  return Tensor({profiles.size(), dim}, std::move(v));
}

}  // namespace saasr
