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

// Differentiable primitives. Every op checks shapes and throws ArgumentError
// on mismatch; results are recorded on the current Tape when at least one
// input requires a gradient.

#ifndef SAASR_OPS_H_
#define SAASR_OPS_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "saasr/tensor.h"

namespace saasr {

// Row-major boolean matrix; true marks a visible (query, key) pair.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill = true);
  // Lower-triangular: query i sees keys 0..i.
  static Mask Causal(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const {
    return keep_[r * cols_ + c] != 0;
  }
  void Set(std::size_t r, std::size_t c, bool visible) {
    keep_[r * cols_ + c] = visible ? 1 : 0;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> keep_;
};

// Elementwise, identical shapes.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& x, double factor);

// x: [rows, cols], v: [cols]. Broadcast along rows.
Tensor AddRowVector(const Tensor& x, const Tensor& v);
Tensor MulRowVector(const Tensor& x, const Tensor& v);

Tensor Relu(const Tensor& x);
Tensor Sigmoid(const Tensor& x);
Tensor Swish(const Tensor& x);
Tensor Log(const Tensor& x);
Tensor Exp(const Tensor& x);
// x: [rows, 2c] -> first half * sigmoid(second half), [rows, c].
Tensor Glu(const Tensor& x);

// a: [m, k], b: [k, n] -> [m, n].
Tensor MatMul(const Tensor& a, const Tensor& b);
// a: [m, k], b: [n, k] -> a * b^T, [m, n].
Tensor MatMulTransposed(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& x);
// x: [rows, in], weight: [in, out], bias: [out] or undefined.
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Max-subtracted softmax along `axis` of a tensor of any rank.
Tensor Softmax(const Tensor& x, std::size_t axis);
Tensor LogSoftmax(const Tensor& x, std::size_t axis);
// Row softmax over the visible entries only; hidden entries get exactly 0.
// Every row needs at least one visible entry.
Tensor MaskedSoftmax(const Tensor& x, const Mask& mask);

// Per-row normalization with learned gain and shift, both [cols].
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& shift,
                 double eps = 1e-5);
// Rows scaled to unit L2 norm; rows with norm < 1e-12 map to zero.
Tensor NormalizeRows(const Tensor& x);

Tensor SliceRows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor ConcatRows(std::span<const Tensor> parts);
Tensor ConcatCols(std::span<const Tensor> parts);
Tensor Reshape(const Tensor& x, Shape shape);

// table: [vocab, dim], ids -> [ids.size(), dim].
Tensor Embedding(const Tensor& table, std::span<const std::size_t> ids);
// x: [rows, cols] -> [rows], element (r, index[r]).
Tensor PickColumns(const Tensor& x, std::span<const std::size_t> index);

Tensor Sum(const Tensor& x);
Tensor Mean(const Tensor& x);
// x: [rows, cols] -> [cols], average over rows.
Tensor MeanRows(const Tensor& x);

// x: [len, ch] -> [out_len, kernel * ch] patches, zero padded, where
// out_len = (len + 2 * pad - kernel) / stride + 1.
Tensor Im2Col1d(const Tensor& x, std::size_t kernel, std::size_t stride,
                std::size_t pad);
// Per-channel convolution along time with same padding. x: [len, ch],
// kernel: [kernel_size, ch], bias: [ch] or undefined. kernel_size is odd.
Tensor DepthwiseConv1d(const Tensor& x, const Tensor& kernel,
                       const Tensor& bias);

// Inverted dropout. rate 0 returns x unchanged.
Tensor Dropout(const Tensor& x, double rate, std::mt19937_64& rng);

// True if every value is finite.
bool AllFinite(const Tensor& x);

}  // namespace saasr

#endif  // SAASR_OPS_H_
