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

#ifndef SAASR_TESTS_TEST_UTIL_H_
#define SAASR_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "saasr/ops.h"
#include "saasr/tensor.h"

namespace saasr::test {

inline Tensor RandomTensor(Shape shape, std::mt19937_64& rng, double scale = 1.0,
                           bool requires_grad = false) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(NumElements(shape));
  for (double& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Worst relative error between the tape gradient of sum(w * f(inputs)) and
// central differences, over every input entry. w is a fixed random weight
// so that all output entries contribute unevenly.
inline double MaxGradError(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, std::mt19937_64& rng,
                           double step = 1e-5, double floor = 1e-6) {
  Tensor probe;
  {
    Tape tape;
    Tensor out = f(inputs);
    probe = RandomTensor(out.shape(), rng);
    Backward(Sum(Mul(out, probe)));
  }
  auto objective = [&] {
    Tensor out = f(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.at(i) * probe.at(i);
    return s;
  };
  double worst = 0.0;
  for (Tensor& in : inputs) {
    const std::vector<double> analytic(in.grad().begin(), in.grad().end());
    for (std::size_t i = 0; i < in.size(); ++i) {
      double& x = in.mutable_values()[i];
      const double keep = x;
      x = keep + step;
      const double up = objective();
      x = keep - step;
      const double down = objective();
      x = keep;
      const double numeric = (up - down) / (2 * step);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
  }
  return worst;
}

}  // namespace saasr::test

#endif  // SAASR_TESTS_TEST_UTIL_H_
