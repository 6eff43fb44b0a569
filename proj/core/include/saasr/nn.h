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

#ifndef SAASR_NN_H_
#define SAASR_NN_H_

#include <cstddef>
#include <vector>

#include "saasr/ops.h"
#include "saasr/tensor.h"

namespace saasr {

struct AttentionWeights {
  Tensor query_weight, query_bias;    // [dim, dim], [dim]
  Tensor key_weight, key_bias;
  Tensor value_weight, value_bias;
  Tensor output_weight, output_bias;
};

// Scaled dot-product attention over `heads` column groups.
//   query: [len_q, dim], key/value: [len_k, dim]
//   mask (optional): [len_q, len_k], true = visible
// Returns [len_q, dim]. If `head_probs` is non-null it receives one
// [len_q, len_k] weight matrix per head.
Tensor MultiHeadAttention(const Tensor& query, const Tensor& key,
                          const Tensor& value, std::size_t heads,
                          const AttentionWeights& weights,
                          const Mask* mask = nullptr,
                          std::vector<Tensor>* head_probs = nullptr);

// Per-frame linear map over channels. x: [len, in], weight: [in, out].
Tensor Conv1dPointwise(const Tensor& x, const Tensor& weight,
                       const Tensor& bias);

struct SqueezeExciteWeights {
  Tensor reduce_weight, reduce_bias;  // [ch, ch / r], [ch / r]
  Tensor expand_weight, expand_bias;  // [ch / r, ch], [ch]
};

// Rescales each channel of x: [len, ch] by
// sigmoid(W2 relu(W1 mean_t(x) + b1) + b2).
Tensor SqueezeExcite(const Tensor& x, const SqueezeExciteWeights& weights);

// Cosine similarity of every query row against every candidate row.
// query: [n, dim], candidates: [k, dim] -> [n, k]. Zero-norm rows give 0.
Tensor CosineSimilarity(const Tensor& query, const Tensor& candidates);

// Absolute sinusoidal position table, [len, dim].
Tensor SinusoidalPositions(std::size_t len, std::size_t dim);

}  // namespace saasr

#endif  // SAASR_NN_H_
