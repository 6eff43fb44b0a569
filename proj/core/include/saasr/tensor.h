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

#ifndef SAASR_TENSOR_H_
#define SAASR_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace saasr {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

namespace internal {

struct Node {
  Shape shape;
  std::vector<double> value;
  // Empty until something is accumulated into it.
  std::vector<double> grad;
  bool requires_grad = false;
  // Reads this node's grad and accumulates into the inputs captured by the
  // closure. Set only for recorded (non-leaf) nodes.
  std::function<void(const Node&)> backward;

  std::vector<double>& EnsureGrad();
};

}  // namespace internal

// Dense row-major float64 tensor. Copies are shallow: two Tensor objects
// constructed from one another share storage and gradient. Sequences are
// laid out as [length, features], one frame per row.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value);
  // Wraps an existing node; used by the op implementations.
  static Tensor FromNode(std::shared_ptr<internal::Node> node);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  // 2-D accessors; rank must be 2.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Direct write access; intended for leaves (parameters, inputs).
  std::span<double> mutable_values();
  // Returns an all-zero view if nothing has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;
  bool requires_grad() const;
  void set_requires_grad(bool requires_grad);
  void ZeroGrad();

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  // Copy of the values with no gradient history.
  Tensor Detach() const;
  // Deep copy, preserving requires_grad but not grad.
  Tensor Clone() const;

  const std::shared_ptr<internal::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<internal::Node> node);
  std::shared_ptr<internal::Node> node_;
};

// Computation record for reverse-mode differentiation. Constructing a Tape
// makes it the current recording target of the calling thread until it is
// destroyed; ops executed while no tape is current are not recorded, which
// is how inference runs. Ops are appended in execution order, so the record
// is topologically sorted by construction.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* Current();

  void Record(std::shared_ptr<internal::Node> node);
  // Seeds d(loss)/d(loss) = 1 and visits every recorded op once in reverse.
  // Leaf gradients accumulate across calls. The record is consumed.
  void Backward(const Tensor& loss);
  std::size_t size() const { return ops_.size(); }
  void Clear();

 private:
  std::vector<std::shared_ptr<internal::Node>> ops_;
  Tape* previous_;
};

// Runs Backward on the current tape. Throws ArgumentError when no tape is
// active or the loss is not a scalar.
void Backward(const Tensor& loss);

}  // namespace saasr

#endif  // SAASR_TENSOR_H_
