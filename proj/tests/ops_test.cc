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

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "saasr/errors.h"
#include "saasr/nn.h"
#include "saasr/ops.h"
#include "test_util.h"

namespace saasr {
namespace {

using test::MaxGradError;
using test::RandomTensor;
using Inputs = std::vector<Tensor>;

constexpr int kSeeds = 20;
constexpr double kTolerance = 1e-4;

struct OpCase {
  std::string name;
  std::function<Inputs(std::mt19937_64&)> make;
  std::function<Tensor(const Inputs&)> apply;
};

Tensor Param(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  return RandomTensor(std::move(s), rng, scale, true);
}

// Values in [0.5, 2.5) for ops with a restricted domain.
Tensor Positive(Shape s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.5);
  std::vector<double> v(NumElements(s));
  for (double& x : v) x = u(rng);
  return Tensor(std::move(s), std::move(v), true);
}

AttentionWeights RandomAttention(std::size_t dim, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  return {Param({dim, dim}, rng, s), Param({dim}, rng, 0.1),
          Param({dim, dim}, rng, s), Param({dim}, rng, 0.1),
          Param({dim, dim}, rng, s), Param({dim}, rng, 0.1),
          Param({dim, dim}, rng, s), Param({dim}, rng, 0.1)};
}

Inputs AttentionInputs(std::mt19937_64& rng) {
  Inputs in{Param({3, 8}, rng), Param({5, 8}, rng)};
  const AttentionWeights w = RandomAttention(8, rng);
  for (const Tensor* t : {&w.query_weight, &w.query_bias, &w.key_weight, &w.key_bias,
                          &w.value_weight, &w.value_bias, &w.output_weight,
                          &w.output_bias}) {
    in.push_back(*t);
  }
  return in;
}

AttentionWeights AttentionFrom(const Inputs& in, std::size_t first) {
  return {in[first], in[first + 1], in[first + 2], in[first + 3],
          in[first + 4], in[first + 5], in[first + 6], in[first + 7]};
}

std::vector<OpCase> Cases() {
  auto two = [](Shape a, Shape b) {
    return [a, b](std::mt19937_64& rng) { return Inputs{Param(a, rng), Param(b, rng)}; };
  };
  auto one = [](Shape a) {
    return [a](std::mt19937_64& rng) { return Inputs{Param(a, rng)}; };
  };
  const std::vector<std::size_t> ids{2, 0, 2, 1};
  return {
      {"Add", two({3, 4}, {3, 4}), [](const Inputs& x) { return Add(x[0], x[1]); }},
      {"Sub", two({3, 4}, {3, 4}), [](const Inputs& x) { return Sub(x[0], x[1]); }},
      {"Mul", two({3, 4}, {3, 4}), [](const Inputs& x) { return Mul(x[0], x[1]); }},
      {"Scale", one({3, 4}), [](const Inputs& x) { return Scale(x[0], -1.7); }},
      {"AddRowVector", two({3, 4}, {4}),
       [](const Inputs& x) { return AddRowVector(x[0], x[1]); }},
      {"MulRowVector", two({3, 4}, {4}),
       [](const Inputs& x) { return MulRowVector(x[0], x[1]); }},
      {"Relu", one({4, 5}), [](const Inputs& x) { return Relu(x[0]); }},
      {"Sigmoid", one({4, 5}), [](const Inputs& x) { return Sigmoid(x[0]); }},
      {"Swish", one({4, 5}), [](const Inputs& x) { return Swish(x[0]); }},
      {"Log", [](std::mt19937_64& rng) { return Inputs{Positive({3, 4}, rng)}; },
       [](const Inputs& x) { return Log(x[0]); }},
      {"Exp", one({3, 4}), [](const Inputs& x) { return Exp(x[0]); }},
      {"Glu", one({3, 6}), [](const Inputs& x) { return Glu(x[0]); }},
      {"MatMul", two({3, 4}, {4, 5}), [](const Inputs& x) { return MatMul(x[0], x[1]); }},
      {"MatMulTransposed", two({3, 4}, {5, 4}),
       [](const Inputs& x) { return MatMulTransposed(x[0], x[1]); }},
      {"Transpose", one({3, 4}), [](const Inputs& x) { return Transpose(x[0]); }},
      {"Linear",
       [](std::mt19937_64& rng) {
         return Inputs{Param({3, 4}, rng), Param({4, 5}, rng), Param({5}, rng)};
       },
       [](const Inputs& x) { return Linear(x[0], x[1], x[2]); }},
      {"SoftmaxRows", one({3, 5}), [](const Inputs& x) { return Softmax(x[0], 1); }},
      {"SoftmaxCols", one({3, 5}), [](const Inputs& x) { return Softmax(x[0], 0); }},
      {"LogSoftmax", one({3, 5}), [](const Inputs& x) { return LogSoftmax(x[0], 1); }},
      {"MaskedSoftmax", one({4, 4}),
       [](const Inputs& x) { return MaskedSoftmax(x[0], Mask::Causal(4)); }},
      {"LayerNorm",
       [](std::mt19937_64& rng) {
         return Inputs{Param({3, 6}, rng), Param({6}, rng), Param({6}, rng)};
       },
       [](const Inputs& x) { return LayerNorm(x[0], x[1], x[2]); }},
      {"NormalizeRows", one({3, 4}), [](const Inputs& x) { return NormalizeRows(x[0]); }},
      {"SliceRows", one({5, 3}), [](const Inputs& x) { return SliceRows(x[0], 1, 3); }},
      {"SliceCols", one({3, 5}), [](const Inputs& x) { return SliceCols(x[0], 2, 2); }},
      {"ConcatRows", two({2, 3}, {4, 3}),
       [](const Inputs& x) { return ConcatRows(std::span<const Tensor>(x)); }},
      {"ConcatCols", two({3, 2}, {3, 4}),
       [](const Inputs& x) { return ConcatCols(std::span<const Tensor>(x)); }},
      {"Reshape", one({3, 4}), [](const Inputs& x) { return Reshape(x[0], {2, 6}); }},
      {"Embedding", one({3, 4}),
       [ids](const Inputs& x) { return Embedding(x[0], ids); }},
      {"PickColumns", one({4, 3}),
       [ids](const Inputs& x) { return PickColumns(x[0], ids); }},
      {"Sum", one({3, 4}), [](const Inputs& x) { return Sum(x[0]); }},
      {"Mean", one({3, 4}), [](const Inputs& x) { return Mean(x[0]); }},
      {"MeanRows", one({3, 4}), [](const Inputs& x) { return MeanRows(x[0]); }},
      {"Im2Col1d", one({7, 3}), [](const Inputs& x) { return Im2Col1d(x[0], 3, 2, 1); }},
      {"DepthwiseConv1d",
       [](std::mt19937_64& rng) {
         return Inputs{Param({6, 4}, rng), Param({3, 4}, rng), Param({4}, rng)};
       },
       [](const Inputs& x) { return DepthwiseConv1d(x[0], x[1], x[2]); }},
      {"Conv1dPointwise",
       [](std::mt19937_64& rng) {
         return Inputs{Param({5, 3}, rng), Param({3, 4}, rng), Param({4}, rng)};
       },
       [](const Inputs& x) { return Conv1dPointwise(x[0], x[1], x[2]); }},
      {"CosineSimilarity", two({3, 4}, {5, 4}),
       [](const Inputs& x) { return CosineSimilarity(x[0], x[1]); }},
      {"SqueezeExcite",
       [](std::mt19937_64& rng) {
         return Inputs{Param({5, 8}, rng), Param({8, 2}, rng), Param({2}, rng),
                       Param({2, 8}, rng), Param({8}, rng)};
       },
       [](const Inputs& x) {
         return SqueezeExcite(x[0], {x[1], x[2], x[3], x[4]});
       }},
      {"MultiHeadAttention", AttentionInputs,
       [](const Inputs& x) {
         return MultiHeadAttention(x[0], x[1], x[1], 2, AttentionFrom(x, 2));
       }},
      {"CausalSelfAttention", AttentionInputs,
       [](const Inputs& x) {
         const Mask causal = Mask::Causal(3);
         return MultiHeadAttention(x[0], x[0], x[0], 4, AttentionFrom(x, 2), &causal);
       }},
  };
}

class OpGradientTest : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradientTest, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const double err = MaxGradError(c.apply, c.make(rng), rng);
    EXPECT_LT(err, kTolerance) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradientTest, ::testing::ValuesIn(Cases()),
                         [](const auto& info) { return info.param.name; });

TEST(SoftmaxTest, RowsAreSimplexPoints) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor p = Softmax(RandomTensor({4, 9}, rng, 20.0), 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        EXPECT_GE(p.at(r, c), 0.0);
        s += p.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(SoftmaxTest, LogSoftmaxAgreesWithLogOfSoftmax) {
  std::mt19937_64 rng(8);
  Tensor x = RandomTensor({3, 6}, rng, 3.0);
  Tensor a = LogSoftmax(x, 1), b = Softmax(x, 1);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a.at(i), std::log(b.at(i)), 1e-12);
}

TEST(AttentionTest, EqualKeysGiveUniformWeights) {
  std::mt19937_64 rng(9);
  const AttentionWeights w = RandomAttention(8, rng);
  Tensor query = RandomTensor({3, 8}, rng);
  Tensor row = RandomTensor({1, 8}, rng);
  std::vector<Tensor> rows(5, row);
  Tensor keys = ConcatRows(rows);
  std::vector<Tensor> probs;
  MultiHeadAttention(query, keys, RandomTensor({5, 8}, rng), 2, w, nullptr, &probs);
  ASSERT_EQ(probs.size(), 2u);
  for (const Tensor& p : probs) {
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p.at(i), 0.2, 1e-15);
  }
}

// Straight loops over heads and positions.
std::vector<double> NaiveAttention(const Tensor& q_in, const Tensor& kv_in,
                                   std::size_t heads, const AttentionWeights& w) {
  auto linear = [](const Tensor& x, const Tensor& W, const Tensor& b) {
    std::vector<std::vector<double>> y(x.rows(), std::vector<double>(W.cols()));
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t o = 0; o < W.cols(); ++o) {
        double s = b.at(o);
        for (std::size_t i = 0; i < x.cols(); ++i) s += x.at(r, i) * W.at(i, o);
        y[r][o] = s;
      }
    }
    return y;
  };
  const auto q = linear(q_in, w.query_weight, w.query_bias);
  const auto k = linear(kv_in, w.key_weight, w.key_bias);
  const auto v = linear(kv_in, w.value_weight, w.value_bias);
  const std::size_t dim = q_in.cols(), hd = dim / heads;
  std::vector<std::vector<double>> ctx(q.size(), std::vector<double>(dim, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> score(k.size());
      double mx = -1e300;
      for (std::size_t j = 0; j < k.size(); ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < hd; ++d) s += q[i][h * hd + d] * k[j][h * hd + d];
        score[j] = s / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, score[j]);
      }
      double z = 0.0;
      for (double& s : score) z += (s = std::exp(s - mx));
      for (std::size_t j = 0; j < k.size(); ++j) {
        for (std::size_t d = 0; d < hd; ++d) ctx[i][h * hd + d] += score[j] / z * v[j][h * hd + d];
      }
    }
  }
  std::vector<double> out;
  for (std::size_t r = 0; r < ctx.size(); ++r) {
    for (std::size_t o = 0; o < dim; ++o) {
      double s = w.output_bias.at(o);
      for (std::size_t i = 0; i < dim; ++i) s += ctx[r][i] * w.output_weight.at(i, o);
      out.push_back(s);
    }
  }
  return out;
}

TEST(AttentionTest, MatchesNaiveLoops) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const AttentionWeights w = RandomAttention(8, rng);
    Tensor q = RandomTensor({3, 8}, rng), kv = RandomTensor({6, 8}, rng);
    const Tensor got = MultiHeadAttention(q, kv, kv, 4, w);
    const std::vector<double> want = NaiveAttention(q, kv, 4, w);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.at(i), want[i], 1e-12);
  }
}

TEST(AttentionTest, RejectsIndivisibleHeads) {
  std::mt19937_64 rng(1);
  Tensor x = RandomTensor({2, 8}, rng);
  EXPECT_THROW(MultiHeadAttention(x, x, x, 3, RandomAttention(8, rng)), ArgumentError);
}

TEST(ConvTest, DepthwiseMatchesDirectSum) {
  std::mt19937_64 rng(3);
  Tensor x = RandomTensor({7, 3}, rng), k = RandomTensor({5, 3}, rng),
         b = RandomTensor({3}, rng);
  Tensor y = DepthwiseConv1d(x, k, b);
  for (int t = 0; t < 7; ++t) {
    for (int c = 0; c < 3; ++c) {
      double s = b.at(c);
      for (int j = 0; j < 5; ++j) {
        const int src = t + j - 2;
        if (src >= 0 && src < 7) s += k.at(j, c) * x.at(src, c);
      }
      EXPECT_NEAR(y.at(t, c), s, 1e-12);
    }
  }
}

TEST(ConvTest, Im2ColTimesWeightIsStridedConvolution) {
  std::mt19937_64 rng(4);
  Tensor x = RandomTensor({9, 2}, rng), w = RandomTensor({3 * 2, 4}, rng);
  Tensor y = MatMul(Im2Col1d(x, 3, 2, 1), w);
  ASSERT_EQ(y.rows(), 5u);
  for (int t = 0; t < 5; ++t) {
    for (int o = 0; o < 4; ++o) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) {
        const int src = 2 * t + j - 1;
        if (src < 0 || src >= 9) continue;
        for (int c = 0; c < 2; ++c) s += x.at(src, c) * w.at(j * 2 + c, o);
      }
      EXPECT_NEAR(y.at(t, o), s, 1e-12);
    }
  }
}

TEST(TapeTest, ReplayedGraphGivesBitIdenticalGradients) {
  std::mt19937_64 rng(5);
  Tensor a = RandomTensor({4, 6}, rng, 1.0, true), b = RandomTensor({6, 3}, rng, 1.0, true);
  auto run = [&] {
    a.ZeroGrad();
    b.ZeroGrad();
    Tape tape;
    Backward(Sum(LogSoftmax(Swish(MatMul(a, b)), 1)));
    std::vector<double> g(a.grad().begin(), a.grad().end());
    g.insert(g.end(), b.grad().begin(), b.grad().end());
    return g;
  };
  EXPECT_EQ(run(), run());
}

TEST(TapeTest, GradientsAccumulateAcrossBackwardCalls) {
  Tensor a({2}, {1.0, 2.0}, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    Backward(Sum(Scale(a, 3.0)));
  }
  EXPECT_EQ(a.grad()[0], 6.0);
  EXPECT_EQ(a.grad()[1], 6.0);
}

TEST(TapeTest, BackwardWithoutTapeThrows) {
  Tensor a({1}, {1.0}, true);
  EXPECT_THROW(Backward(a), ArgumentError);
}

TEST(OpsTest, ShapeMismatchThrows) {
  std::mt19937_64 rng(6);
  EXPECT_THROW(MatMul(RandomTensor({2, 3}, rng), RandomTensor({4, 2}, rng)), ArgumentError);
  EXPECT_THROW(Add(RandomTensor({2, 3}, rng), RandomTensor({3, 2}, rng)), ArgumentError);
}

TEST(OpsTest, AllFiniteDetectsNan) {
  EXPECT_TRUE(AllFinite(Tensor({2}, {1.0, 2.0})));
  EXPECT_FALSE(AllFinite(Tensor({2}, {1.0, std::nan("")})));
}

TEST(OpsTest, DropoutKeepsExpectationAndZeroRateIsIdentity) {
  std::mt19937_64 rng(11);
  Tensor x = Tensor::Full({200, 50}, 1.0);
  Tensor y = Dropout(x, 0.3, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.at(i);
  EXPECT_NEAR(s / y.size(), 1.0, 0.03);
  Tensor z = Dropout(x, 0.0, rng);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(z.at(i), 1.0);
}

}  // namespace
}  // namespace saasr
