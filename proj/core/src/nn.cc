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

#include "saasr/nn.h"

#include <cmath>
#include <string>

#include "saasr/errors.h"

namespace saasr {

Tensor MultiHeadAttention(const Tensor& query, const Tensor& key,
                          const Tensor& value, std::size_t heads,
                          const AttentionWeights& weights, const Mask* mask,
                          std::vector<Tensor>* head_probs) {
  const std::size_t dim = query.cols();
  if (heads == 0 || dim % heads != 0) {
    throw ArgumentError("MultiHeadAttention: model dim " + std::to_string(dim) +
                        " not divisible by " + std::to_string(heads) +
                        " heads");
  }
  if (key.cols() != dim || value.cols() != dim) {
    throw ArgumentError("MultiHeadAttention: query/key/value dims differ");
  }
  if (key.rows() != value.rows()) {
    throw ArgumentError("MultiHeadAttention: key and value lengths differ");
  }
  if (mask != nullptr &&
      (mask->rows() != query.rows() || mask->cols() != key.rows())) {
    throw ArgumentError("MultiHeadAttention: mask shape mismatch");
  }
  const std::size_t head_dim = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Mask full = mask ? Mask() : Mask(query.rows(), key.rows(), true);
  const Mask& visible = mask ? *mask : full;

  Tensor q = Linear(query, weights.query_weight, weights.query_bias);
  Tensor k = Linear(key, weights.key_weight, weights.key_bias);
  Tensor v = Linear(value, weights.value_weight, weights.value_bias);

  std::vector<Tensor> contexts;
  contexts.reserve(heads);
  if (head_probs) head_probs->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = SliceCols(q, h * head_dim, head_dim);
    Tensor kh = SliceCols(k, h * head_dim, head_dim);
    Tensor vh = SliceCols(v, h * head_dim, head_dim);
    Tensor probs = MaskedSoftmax(Scale(MatMulTransposed(qh, kh), scale), visible);
    if (head_probs) head_probs->push_back(probs);
    contexts.push_back(MatMul(probs, vh));
  }
  Tensor context = heads == 1 ? contexts[0] : ConcatCols(contexts);
  return Linear(context, weights.output_weight, weights.output_bias);
}

Tensor Conv1dPointwise(const Tensor& x, const Tensor& weight,
                       const Tensor& bias) {
  return Linear(x, weight, bias);
}

Tensor SqueezeExcite(const Tensor& x, const SqueezeExciteWeights& weights) {
  const std::size_t ch = x.cols();
  if (weights.reduce_weight.rank() != 2 || weights.reduce_weight.rows() != ch ||
      weights.expand_weight.rank() != 2 || weights.expand_weight.cols() != ch ||
      weights.expand_weight.rows() != weights.reduce_weight.cols()) {
    throw ArgumentError("SqueezeExcite: weights do not match " +
                        std::to_string(ch) + " channels");
  }
  Tensor pooled = Reshape(MeanRows(x), {1, ch});
  Tensor hidden = Relu(Linear(pooled, weights.reduce_weight, weights.reduce_bias));
  Tensor gate = Sigmoid(Linear(hidden, weights.expand_weight, weights.expand_bias));
  return MulRowVector(x, Reshape(gate, {ch}));
}

Tensor CosineSimilarity(const Tensor& query, const Tensor& candidates) {
  if (query.rank() != 2 || candidates.rank() != 2 ||
      query.cols() != candidates.cols()) {
    throw ArgumentError("CosineSimilarity: " + ShapeString(query.shape()) +
                        " vs " + ShapeString(candidates.shape()));
  }
  return MatMulTransposed(NormalizeRows(query), NormalizeRows(candidates));
}

Tensor SinusoidalPositions(std::size_t len, std::size_t dim) {
  std::vector<double> table(len * dim);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      table[t * dim + i] = std::sin(static_cast<double>(t) * freq);
      if (i + 1 < dim) table[t * dim + i + 1] = std::cos(static_cast<double>(t) * freq);
    }
  }
  return Tensor({len, dim}, std::move(table));
}

}  // namespace saasr
