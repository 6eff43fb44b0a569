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

#include "saasr/tensor.h"

#include <algorithm>
#include <sstream>
#include <utility>

#include "saasr/errors.h"

namespace saasr {

namespace {

thread_local Tape* current_tape = nullptr;

const std::vector<double>& ZeroBuffer(std::size_t n) {
  thread_local std::vector<double> zeros;
  if (zeros.size() < n) zeros.assign(n, 0.0);
  return zeros;
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace internal {

std::vector<double>& Node::EnsureGrad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace internal

Tensor::Tensor(std::shared_ptr<internal::Node> node) : node_(std::move(node)) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<internal::Node>()) {
  if (NumElements(shape) != values.size()) {
    throw ArgumentError("tensor shape " + ShapeString(shape) + " needs " +
                        std::to_string(NumElements(shape)) + " values, got " +
                        std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  std::size_t n = NumElements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::Scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::FromNode(std::shared_ptr<internal::Node> node) {
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ArgumentError("axis " + std::to_string(axis) + " out of range for " +
                        ShapeString(shape()));
  }
  return shape()[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ArgumentError("rows() on " + ShapeString(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ArgumentError("cols() on " + ShapeString(shape()));
  return shape()[1];
}

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() { return node_->value; }

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) {
    return std::span<const double>(ZeroBuffer(size()).data(), size());
  }
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() { return node_->EnsureGrad(); }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool requires_grad) {
  node_->requires_grad = requires_grad;
}

void Tensor::ZeroGrad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ArgumentError("item() on tensor of shape " + ShapeString(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::size_t i) const { return node_->value.at(i); }

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->value.at(row * cols() + col);
}

Tensor Tensor::Detach() const { return Tensor(shape(), node_->value, false); }

Tensor Tensor::Clone() const {
  return Tensor(shape(), node_->value, node_->requires_grad);
}

Tape::Tape() : previous_(current_tape) { current_tape = this; }

Tape::~Tape() {
  Clear();
  current_tape = previous_;
}

Tape* Tape::Current() { return current_tape; }

void Tape::Record(std::shared_ptr<internal::Node> node) {
  ops_.push_back(std::move(node));
}

void Tape::Backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ArgumentError("backward needs a scalar loss, got shape " +
                        (loss.defined() ? ShapeString(loss.shape())
                                        : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    Clear();
    return;
  }
  loss.node()->EnsureGrad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    internal::Node& node = **it;
    if (node.backward && !node.grad.empty()) node.backward(node);
  }
  Clear();
}

void Tape::Clear() {
  // Dropping the closures releases every intermediate held by the record.
  for (auto& node : ops_) node->backward = nullptr;
  ops_.clear();
}

void Backward(const Tensor& loss) {
  Tape* tape = Tape::Current();
  if (tape == nullptr) {
    if (loss.defined() && loss.size() == 1 && !loss.requires_grad()) return;
    throw ArgumentError("backward called with no active tape");
  }
  tape->Backward(loss);
}

}  // namespace saasr
