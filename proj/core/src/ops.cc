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

#include "saasr/ops.h"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "saasr/errors.h"

namespace saasr {

namespace {

using internal::Node;
using NodePtr = std::shared_ptr<Node>;

bool ShouldRecord(std::initializer_list<const Tensor*> inputs) {
  if (Tape::Current() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor NewResult(Shape shape, std::vector<double> value) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  return Tensor::FromNode(std::move(node));
}

void Attach(const Tensor& out, std::function<void(const Node&)> backward) {
  out.node()->requires_grad = true;
  out.node()->backward = std::move(backward);
  Tape::Current()->Record(out.node());
}

bool Wants(const NodePtr& n) { return n && n->requires_grad; }

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ArgumentError(std::string(op) + ": shape mismatch " +
                        ShapeString(a.shape()) + " vs " +
                        ShapeString(b.shape()));
  }
}

void RequireRank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw ArgumentError(std::string(op) + ": expected rank " +
                        std::to_string(rank) + ", got " +
                        ShapeString(x.shape()));
  }
}

void RequireRowVector(const Tensor& x, const Tensor& v, const char* op) {
  RequireRank(x, 2, op);
  if (v.rank() != 1 || v.dim(0) != x.cols()) {
    throw ArgumentError(std::string(op) + ": vector " + ShapeString(v.shape()) +
                        " does not match columns of " + ShapeString(x.shape()));
  }
}

// c[m, n] += a[m, k] * b[k, n]
void GemmNN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c[m, n] += a[m, k] * b[n, k]^T
void GemmNT(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// c[k, n] += a[m, k]^T * b[m, n]
void GemmTN(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

template <typename Fn, typename Deriv>
Tensor Unary(const Tensor& x, Fn fn, Deriv deriv) {
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(xv[i]);
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), deriv](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += o.grad[i] * deriv(xn->value[i], o.value[i]);
      }
    });
  }
  return result;
}

struct AxisLayout {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisLayout LayoutFor(const Tensor& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw ArgumentError(std::string(op) + ": axis " + std::to_string(axis) +
                        " invalid for shape " + ShapeString(x.shape()));
  }
  AxisLayout l{1, x.shape()[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= x.shape()[i];
  for (std::size_t i = axis + 1; i < x.rank(); ++i) l.inner *= x.shape()[i];
  return l;
}

}  // namespace

Mask::Mask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), keep_(rows * cols, fill ? 1 : 0) {}

Mask Mask::Causal(std::size_t n) {
  Mask m(n, n, false);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c <= r; ++c) m.Set(r, c, true);
  }
  return m;
}

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "Add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  Tensor result = NewResult(a.shape(), std::move(out));
  if (ShouldRecord({&a, &b})) {
    Attach(result, [an = a.node(), bn = b.node()](const Node& o) {
      for (const NodePtr& n : {an, bn}) {
        if (!Wants(n)) continue;
        auto& g = n->EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
    });
  }
  return result;
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "Sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  Tensor result = NewResult(a.shape(), std::move(out));
  if (ShouldRecord({&a, &b})) {
    Attach(result, [an = a.node(), bn = b.node()](const Node& o) {
      if (Wants(an)) {
        auto& g = an->EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
      if (Wants(bn)) {
        auto& g = bn->EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
      }
    });
  }
  return result;
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "Mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  Tensor result = NewResult(a.shape(), std::move(out));
  if (ShouldRecord({&a, &b})) {
    Attach(result, [an = a.node(), bn = b.node()](const Node& o) {
      if (Wants(an)) {
        auto& g = an->EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += o.grad[i] * bn->value[i];
        }
      }
      if (Wants(bn)) {
        auto& g = bn->EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += o.grad[i] * an->value[i];
        }
      }
    });
  }
  return result;
}

Tensor Scale(const Tensor& x, double factor) {
  return Unary(
      x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor AddRowVector(const Tensor& x, const Tensor& v) {
  RequireRowVector(x, v, "AddRowVector");
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.values().begin(), x.values().end());
  auto vv = v.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += vv[c];
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x, &v})) {
    Attach(result, [xn = x.node(), vn = v.node(), rows, cols](const Node& o) {
      if (Wants(xn)) {
        auto& g = xn->EnsureGrad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
      if (Wants(vn)) {
        auto& g = vn->EnsureGrad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) g[c] += o.grad[r * cols + c];
        }
      }
    });
  }
  return result;
}

Tensor MulRowVector(const Tensor& x, const Tensor& v) {
  RequireRowVector(x, v, "MulRowVector");
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size());
  auto xv = x.values();
  auto vv = v.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = xv[r * cols + c] * vv[c];
    }
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x, &v})) {
    Attach(result, [xn = x.node(), vn = v.node(), rows, cols](const Node& o) {
      if (Wants(xn)) {
        auto& g = xn->EnsureGrad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            g[r * cols + c] += o.grad[r * cols + c] * vn->value[c];
          }
        }
      }
      if (Wants(vn)) {
        auto& g = vn->EnsureGrad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            g[c] += o.grad[r * cols + c] * xn->value[r * cols + c];
          }
        }
      }
    });
  }
  return result;
}

Tensor Relu(const Tensor& x) {
  return Unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Sigmoid(const Tensor& x) {
  return Unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Swish(const Tensor& x) {
  return Unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor Log(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor Exp(const Tensor& x) {
  return Unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Glu(const Tensor& x) {
  RequireRank(x, 2, "Glu");
  if (x.cols() % 2 != 0) {
    throw ArgumentError("Glu: odd column count " + ShapeString(x.shape()));
  }
  const std::size_t rows = x.rows(), half = x.cols() / 2, cols = x.cols();
  std::vector<double> out(rows * half);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < half; ++c) {
      const double gate = 1.0 / (1.0 + std::exp(-xv[r * cols + half + c]));
      out[r * half + c] = xv[r * cols + c] * gate;
    }
  }
  Tensor result = NewResult({rows, half}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), rows, half, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      const auto& xv = xn->value;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < half; ++c) {
          const double a = xv[r * cols + c];
          const double s = 1.0 / (1.0 + std::exp(-xv[r * cols + half + c]));
          const double go = o.grad[r * half + c];
          g[r * cols + c] += go * s;
          g[r * cols + half + c] += go * a * s * (1.0 - s);
        }
      }
    });
  }
  return result;
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "MatMul");
  RequireRank(b, 2, "MatMul");
  if (a.cols() != b.rows()) {
    throw ArgumentError("MatMul: inner dimensions differ " +
                        ShapeString(a.shape()) + " x " +
                        ShapeString(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  GemmNN(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor result = NewResult({m, n}, std::move(out));
  if (ShouldRecord({&a, &b})) {
    Attach(result, [an = a.node(), bn = b.node(), m, k, n](const Node& o) {
      if (Wants(an)) {
        GemmNT(o.grad.data(), bn->value.data(), an->EnsureGrad().data(), m, n,
               k);
      }
      if (Wants(bn)) {
        GemmTN(an->value.data(), o.grad.data(), bn->EnsureGrad().data(), m, k,
               n);
      }
    });
  }
  return result;
}

Tensor MatMulTransposed(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "MatMulTransposed");
  RequireRank(b, 2, "MatMulTransposed");
  if (a.cols() != b.cols()) {
    throw ArgumentError("MatMulTransposed: inner dimensions differ " +
                        ShapeString(a.shape()) + " x " +
                        ShapeString(b.shape()) + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  std::vector<double> out(m * n, 0.0);
  GemmNT(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor result = NewResult({m, n}, std::move(out));
  if (ShouldRecord({&a, &b})) {
    Attach(result, [an = a.node(), bn = b.node(), m, k, n](const Node& o) {
      // dA = dC * B, dB = dC^T * A
      if (Wants(an)) {
        GemmNN(o.grad.data(), bn->value.data(), an->EnsureGrad().data(), m, n,
               k);
      }
      if (Wants(bn)) {
        GemmTN(o.grad.data(), an->value.data(), bn->EnsureGrad().data(), m, n,
               k);
      }
    });
  }
  return result;
}

Tensor Transpose(const Tensor& x) {
  RequireRank(x, 2, "Transpose");
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = xv[r * cols + c];
  }
  Tensor result = NewResult({cols, rows}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), rows, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          g[r * cols + c] += o.grad[c * rows + r];
        }
      }
    });
  }
  return result;
}

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  RequireRank(x, 2, "Linear");
  RequireRank(weight, 2, "Linear");
  if (x.cols() != weight.rows()) {
    throw ArgumentError("Linear: input " + ShapeString(x.shape()) +
                        " does not match weight " +
                        ShapeString(weight.shape()));
  }
  const std::size_t m = x.rows(), k = x.cols(), n = weight.cols();
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != n)) {
    throw ArgumentError("Linear: bias " + ShapeString(bias.shape()) +
                        " does not match weight " +
                        ShapeString(weight.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy(bv.begin(), bv.end(), out.begin() + i * n);
    }
  }
  GemmNN(x.values().data(), weight.values().data(), out.data(), m, k, n);
  Tensor result = NewResult({m, n}, std::move(out));
  if (ShouldRecord({&x, &weight, &bias})) {
    Attach(result, [xn = x.node(), wn = weight.node(), bn = bias.node(), m, k,
                    n](const Node& o) {
      if (Wants(xn)) {
        GemmNT(o.grad.data(), wn->value.data(), xn->EnsureGrad().data(), m, n,
               k);
      }
      if (Wants(wn)) {
        GemmTN(xn->value.data(), o.grad.data(), wn->EnsureGrad().data(), m, k,
               n);
      }
      if (Wants(bn)) {
        auto& g = bn->EnsureGrad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
        }
      }
    });
  }
  return result;
}

Tensor Softmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = LayoutFor(x, axis, "Softmax");
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < l.extent; ++e) {
        mx = std::max(mx, xv[base + e * l.inner]);
      }
      double total = 0.0;
      for (std::size_t e = 0; e < l.extent; ++e) {
        const double v = std::exp(xv[base + e * l.inner] - mx);
        out[base + e * l.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < l.extent; ++e) out[base + e * l.inner] /= total;
    }
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), l](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t ou = 0; ou < l.outer; ++ou) {
        for (std::size_t in = 0; in < l.inner; ++in) {
          const std::size_t base = ou * l.extent * l.inner + in;
          double dot = 0.0;
          for (std::size_t e = 0; e < l.extent; ++e) {
            dot += o.grad[base + e * l.inner] * o.value[base + e * l.inner];
          }
          for (std::size_t e = 0; e < l.extent; ++e) {
            const std::size_t i = base + e * l.inner;
            g[i] += o.value[i] * (o.grad[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

Tensor LogSoftmax(const Tensor& x, std::size_t axis) {
  const AxisLayout l = LayoutFor(x, axis, "LogSoftmax");
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.extent * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < l.extent; ++e) {
        mx = std::max(mx, xv[base + e * l.inner]);
      }
      double total = 0.0;
      for (std::size_t e = 0; e < l.extent; ++e) {
        total += std::exp(xv[base + e * l.inner] - mx);
      }
      const double lse = mx + std::log(total);
      for (std::size_t e = 0; e < l.extent; ++e) {
        out[base + e * l.inner] = xv[base + e * l.inner] - lse;
      }
    }
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), l](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t ou = 0; ou < l.outer; ++ou) {
        for (std::size_t in = 0; in < l.inner; ++in) {
          const std::size_t base = ou * l.extent * l.inner + in;
          double total = 0.0;
          for (std::size_t e = 0; e < l.extent; ++e) {
            total += o.grad[base + e * l.inner];
          }
          for (std::size_t e = 0; e < l.extent; ++e) {
            const std::size_t i = base + e * l.inner;
            g[i] += o.grad[i] - std::exp(o.value[i]) * total;
          }
        }
      }
    });
  }
  return result;
}

Tensor MaskedSoftmax(const Tensor& x, const Mask& mask) {
  RequireRank(x, 2, "MaskedSoftmax");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (mask.rows() != rows || mask.cols() != cols) {
    throw ArgumentError("MaskedSoftmax: mask " +
                        ShapeString({mask.rows(), mask.cols()}) +
                        " does not match scores " + ShapeString(x.shape()));
  }
  std::vector<double> out(x.size(), 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask(r, c)) mx = std::max(mx, xv[r * cols + c]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw ArgumentError("MaskedSoftmax: row " + std::to_string(r) +
                          " has no visible entry");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!mask(r, c)) continue;
      out[r * cols + c] = std::exp(xv[r * cols + c] - mx);
      total += out[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= total;
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    // Hidden entries have y = 0, so the generic softmax rule gives them
    // exactly zero gradient.
    Attach(result, [xn = x.node(), rows, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dot += o.grad[r * cols + c] * o.value[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          g[i] += o.value[i] * (o.grad[i] - dot);
        }
      }
    });
  }
  return result;
}

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& shift,
                 double eps) {
  RequireRowVector(x, gain, "LayerNorm");
  RequireRowVector(x, shift, "LayerNorm");
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size());
  // Normalized activations and inverse std per row, kept for backward.
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  auto xv = x.values();
  auto gv = gain.values();
  auto sv = shift.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xv[r * cols + c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xv[r * cols + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (xv[r * cols + c] - mean) * is;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + sv[c];
    }
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x, &gain, &shift})) {
    Attach(result, [xn = x.node(), gn = gain.node(), sn = shift.node(), xhat,
                    inv_std, rows, cols](const Node& o) {
      if (Wants(gn)) {
        auto& g = gn->EnsureGrad();
        for (std::size_t i = 0; i < rows * cols; ++i) {
          g[i % cols] += o.grad[i] * (*xhat)[i];
        }
      }
      if (Wants(sn)) {
        auto& g = sn->EnsureGrad();
        for (std::size_t i = 0; i < rows * cols; ++i) g[i % cols] += o.grad[i];
      }
      if (Wants(xn)) {
        auto& g = xn->EnsureGrad();
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double dh = o.grad[r * cols + c] * gn->value[c];
            sum_dh += dh;
            sum_dh_h += dh * (*xhat)[r * cols + c];
          }
          for (std::size_t c = 0; c < cols; ++c) {
            const double dh = o.grad[r * cols + c] * gn->value[c];
            g[r * cols + c] += (*inv_std)[r] *
                               (dh - sum_dh / n -
                                (*xhat)[r * cols + c] * sum_dh_h / n);
          }
        }
      }
    });
  }
  return result;
}

Tensor NormalizeRows(const Tensor& x) {
  RequireRank(x, 2, "NormalizeRows");
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size(), 0.0);
  auto norms = std::make_shared<std::vector<double>>(rows, 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += xv[r * cols + c] * xv[r * cols + c];
    const double norm = std::sqrt(s);
    (*norms)[r] = norm;
    if (norm < 1e-12) continue;
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] / norm;
  }
  Tensor result = NewResult(x.shape(), std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), norms, rows, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double norm = (*norms)[r];
        if (norm < 1e-12) continue;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          dot += o.grad[r * cols + c] * o.value[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          g[i] += (o.grad[i] - o.value[i] * dot) / norm;
        }
      }
    });
  }
  return result;
}

Tensor SliceRows(const Tensor& x, std::size_t begin, std::size_t count) {
  RequireRank(x, 2, "SliceRows");
  if (begin + count > x.rows()) {
    throw ArgumentError("SliceRows: [" + std::to_string(begin) + ", " +
                        std::to_string(begin + count) + ") out of range for " +
                        ShapeString(x.shape()));
  }
  const std::size_t cols = x.cols();
  auto xv = x.values();
  std::vector<double> out(xv.begin() + begin * cols,
                          xv.begin() + (begin + count) * cols);
  Tensor result = NewResult({count, cols}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), begin, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        g[begin * cols + i] += o.grad[i];
      }
    });
  }
  return result;
}

Tensor SliceCols(const Tensor& x, std::size_t begin, std::size_t count) {
  RequireRank(x, 2, "SliceCols");
  if (begin + count > x.cols()) {
    throw ArgumentError("SliceCols: [" + std::to_string(begin) + ", " +
                        std::to_string(begin + count) + ") out of range for " +
                        ShapeString(x.shape()));
  }
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(rows * count);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(xv.begin() + r * cols + begin,
              xv.begin() + r * cols + begin + count, out.begin() + r * count);
  }
  Tensor result = NewResult({rows, count}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), begin, count, rows, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
          g[r * cols + begin + c] += o.grad[r * count + c];
        }
      }
    });
  }
  return result;
}

Tensor ConcatRows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("ConcatRows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool record = false;
  for (const Tensor& p : parts) {
    RequireRank(p, 2, "ConcatRows");
    if (p.cols() != cols) {
      throw ArgumentError("ConcatRows: column mismatch " +
                          ShapeString(p.shape()));
    }
    rows += p.rows();
    record = record || ShouldRecord({&p});
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  std::vector<NodePtr> nodes;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    nodes.push_back(p.node());
  }
  Tensor result = NewResult({rows, cols}, std::move(out));
  if (record) {
    Attach(result, [nodes](const Node& o) {
      std::size_t offset = 0;
      for (const NodePtr& n : nodes) {
        if (Wants(n)) {
          auto& g = n->EnsureGrad();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[offset + i];
        }
        offset += n->value.size();
      }
    });
  }
  return result;
}

Tensor ConcatCols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("ConcatCols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool record = false;
  for (const Tensor& p : parts) {
    RequireRank(p, 2, "ConcatCols");
    if (p.rows() != rows) {
      throw ArgumentError("ConcatCols: row mismatch " + ShapeString(p.shape()));
    }
    cols += p.cols();
    record = record || ShouldRecord({&p});
  }
  std::vector<double> out(rows * cols);
  std::vector<NodePtr> nodes;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t pc = p.cols();
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(pv.begin() + r * pc, pv.begin() + (r + 1) * pc,
                out.begin() + r * cols + offset);
    }
    offset += pc;
    nodes.push_back(p.node());
  }
  Tensor result = NewResult({rows, cols}, std::move(out));
  if (record) {
    Attach(result, [nodes, rows, cols](const Node& o) {
      std::size_t off = 0;
      for (const NodePtr& n : nodes) {
        const std::size_t pc = n->shape[1];
        if (Wants(n)) {
          auto& g = n->EnsureGrad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < pc; ++c) {
              g[r * pc + c] += o.grad[r * cols + off + c];
            }
          }
        }
        off += pc;
      }
    });
  }
  return result;
}

Tensor Reshape(const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw ArgumentError("Reshape: cannot view " + ShapeString(x.shape()) +
                        " as " + ShapeString(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor result = NewResult(std::move(shape), std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node()](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
  }
  return result;
}

Tensor Embedding(const Tensor& table, std::span<const std::size_t> ids) {
  RequireRank(table, 2, "Embedding");
  const std::size_t vocab = table.rows(), dim = table.cols();
  std::vector<double> out(ids.size() * dim);
  auto tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw ArgumentError("Embedding: id " + std::to_string(ids[i]) +
                          " outside table of " + std::to_string(vocab));
    }
    std::copy(tv.begin() + ids[i] * dim, tv.begin() + (ids[i] + 1) * dim,
              out.begin() + i * dim);
  }
  Tensor result = NewResult({ids.size(), dim}, std::move(out));
  if (ShouldRecord({&table})) {
    Attach(result, [tn = table.node(),
                    idv = std::vector<std::size_t>(ids.begin(), ids.end()),
                    dim](const Node& o) {
      auto& g = tn->EnsureGrad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
          g[idv[i] * dim + c] += o.grad[i * dim + c];
        }
      }
    });
  }
  return result;
}

Tensor PickColumns(const Tensor& x, std::span<const std::size_t> index) {
  RequireRank(x, 2, "PickColumns");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (index.size() != rows) {
    throw ArgumentError("PickColumns: " + std::to_string(index.size()) +
                        " indices for " + std::to_string(rows) + " rows");
  }
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= cols) {
      throw ArgumentError("PickColumns: index " + std::to_string(index[r]) +
                          " outside " + std::to_string(cols) + " columns");
    }
    out[r] = x.values()[r * cols + index[r]];
  }
  Tensor result = NewResult({rows}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(),
                    idx = std::vector<std::size_t>(index.begin(), index.end()),
                    cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        g[r * cols + idx[r]] += o.grad[r];
      }
    });
  }
  return result;
}

Tensor Sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor result = NewResult({1}, {total});
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node()](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (double& v : g) v += o.grad[0];
    });
  }
  return result;
}

Tensor Mean(const Tensor& x) {
  if (x.size() == 0) throw ArgumentError("Mean of empty tensor");
  return Scale(Sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor MeanRows(const Tensor& x) {
  RequireRank(x, 2, "MeanRows");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (rows == 0) throw ArgumentError("MeanRows of empty tensor");
  std::vector<double> out(cols, 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += xv[r * cols + c];
  }
  for (double& v : out) v /= static_cast<double>(rows);
  Tensor result = NewResult({cols}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), rows, cols](const Node& o) {
      auto& g = xn->EnsureGrad();
      const double inv = 1.0 / static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += o.grad[c] * inv;
      }
    });
  }
  return result;
}

Tensor Im2Col1d(const Tensor& x, std::size_t kernel, std::size_t stride,
                std::size_t pad) {
  RequireRank(x, 2, "Im2Col1d");
  if (kernel == 0 || stride == 0) {
    throw ArgumentError("Im2Col1d: kernel and stride must be positive");
  }
  const std::size_t len = x.rows(), ch = x.cols();
  if (len + 2 * pad < kernel) {
    throw ArgumentError("Im2Col1d: input length " + std::to_string(len) +
                        " shorter than kernel " + std::to_string(kernel));
  }
  const std::size_t out_len = (len + 2 * pad - kernel) / stride + 1;
  const std::size_t width = kernel * ch;
  std::vector<double> out(out_len * width, 0.0);
  auto xv = x.values();
  for (std::size_t t = 0; t < out_len; ++t) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                 static_cast<std::ptrdiff_t>(pad);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      std::copy(xv.begin() + src * ch, xv.begin() + (src + 1) * ch,
                out.begin() + t * width + k * ch);
    }
  }
  Tensor result = NewResult({out_len, width}, std::move(out));
  if (ShouldRecord({&x})) {
    Attach(result, [xn = x.node(), kernel, stride, pad, len, ch, out_len,
                    width](const Node& o) {
      auto& g = xn->EnsureGrad();
      for (std::size_t t = 0; t < out_len; ++t) {
        for (std::size_t k = 0; k < kernel; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          for (std::size_t c = 0; c < ch; ++c) {
            g[src * ch + c] += o.grad[t * width + k * ch + c];
          }
        }
      }
    });
  }
  return result;
}

Tensor DepthwiseConv1d(const Tensor& x, const Tensor& kernel,
                       const Tensor& bias) {
  RequireRank(x, 2, "DepthwiseConv1d");
  RequireRank(kernel, 2, "DepthwiseConv1d");
  const std::size_t len = x.rows(), ch = x.cols(), ksize = kernel.rows();
  if (kernel.cols() != ch) {
    throw ArgumentError("DepthwiseConv1d: kernel " +
                        ShapeString(kernel.shape()) + " does not match " +
                        std::to_string(ch) + " channels");
  }
  if (ksize % 2 == 0) {
    throw ArgumentError("DepthwiseConv1d: kernel size must be odd");
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != ch)) {
    throw ArgumentError("DepthwiseConv1d: bias " + ShapeString(bias.shape()) +
                        " does not match " + std::to_string(ch) + " channels");
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(ksize / 2);
  std::vector<double> out(len * ch, 0.0);
  auto xv = x.values();
  auto kv = kernel.values();
  for (std::size_t t = 0; t < len; ++t) {
    double* row = out.data() + t * ch;
    if (bias.defined()) {
      std::copy(bias.values().begin(), bias.values().end(), row);
    }
    for (std::size_t k = 0; k < ksize; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      for (std::size_t c = 0; c < ch; ++c) row[c] += kv[k * ch + c] * xv[src * ch + c];
    }
  }
  Tensor result = NewResult({len, ch}, std::move(out));
  if (ShouldRecord({&x, &kernel, &bias})) {
    Attach(result, [xn = x.node(), kn = kernel.node(), bn = bias.node(), len,
                    ch, ksize, half](const Node& o) {
      const bool want_x = Wants(xn), want_k = Wants(kn);
      std::vector<double>* gx = want_x ? &xn->EnsureGrad() : nullptr;
      std::vector<double>* gk = want_k ? &kn->EnsureGrad() : nullptr;
      for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t k = 0; k < ksize; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) - half;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          for (std::size_t c = 0; c < ch; ++c) {
            const double go = o.grad[t * ch + c];
            if (gx) (*gx)[src * ch + c] += go * kn->value[k * ch + c];
            if (gk) (*gk)[k * ch + c] += go * xn->value[src * ch + c];
          }
        }
      }
      if (Wants(bn)) {
        auto& g = bn->EnsureGrad();
        for (std::size_t t = 0; t < len; ++t) {
          for (std::size_t c = 0; c < ch; ++c) g[c] += o.grad[t * ch + c];
        }
      }
    });
  }
  return result;
}

Tensor Dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ArgumentError("Dropout: rate must lie in [0, 1)");
  }
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> factors(x.size());
  for (double& f : factors) f = keep(rng) ? scale : 0.0;
  return Mul(x, Tensor(x.shape(), std::move(factors)));
}

bool AllFinite(const Tensor& x) {
  for (double v : x.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace saasr
