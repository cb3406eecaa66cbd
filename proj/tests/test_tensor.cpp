// Copyright 2026 The eqseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "eqseg/error.hpp"
#include "eqseg/ops.hpp"
#include "eqseg/tensor.hpp"
#include "test_util.hpp"

namespace eqseg {
namespace {

using testing::CheckGradients;
using testing::MaxAbsDiff;
using testing::Project;
using testing::RandomAwayFromZero;
using testing::RandomTensor;

// Direct seven-loop cross-correlation.
std::vector<double> NaiveConv(const Tensor64& x, const Tensor64& w,
                              const Tensor64* bias, int stride, int pad) {
  const auto b = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto co = w.dim(0), k = w.dim(2);
  const auto ho = (h + 2 * pad - k) / stride + 1;
  const auto wo = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(b * co * ho * wo));
  auto xd = x.data();
  auto wdt = w.data();
  for (std::int64_t n = 0; n < b; ++n)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t xx = 0; xx < wo; ++xx) {
          double acc = bias ? bias->data()[o] : 0.0;
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t i = 0; i < k; ++i)
              for (std::int64_t j = 0; j < k; ++j) {
                const auto yy = y * stride + i - pad, xs = xx * stride + j - pad;
                if (yy < 0 || yy >= h || xs < 0 || xs >= wd) continue;
                acc += xd[((n * ci + c) * h + yy) * wd + xs] *
                       wdt[((o * ci + c) * k + i) * k + j];
              }
          out[((n * co + o) * ho + y) * wo + xx] = acc;
        }
  return out;
}

TEST(TensorTest, ConstructionAndSharing) {
  Tensor a = Tensor::Full({2, 3}, 1.5f);
  EXPECT_EQ(a.numel(), 6);
  EXPECT_EQ(a.rank(), 2u);
  Tensor b = a;
  b.data()[0] = 7.0f;
  EXPECT_EQ(a.data()[0], 7.0f);
  Tensor c = a.Detach();
  c.data()[1] = -1.0f;
  EXPECT_EQ(a.data()[1], 1.5f);
  EXPECT_EQ(Tensor::Scalar(3.0f).item(), 3.0f);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), ValidationError);
  EXPECT_THROW(Tensor(Shape{0, 2}), ValidationError);
  EXPECT_THROW(a.item(), ValidationError);
  EXPECT_THROW(a.dim(5), IndexError);
}

TEST(TensorTest, GradientAccumulatesOverReuse) {
  Tensor64 x({3}, {1.0, 2.0, 3.0});
  x.set_requires_grad(true);
  // sum(x * x + x) -> 2x + 1
  Backward(ops::Sum(ops::Add(ops::Mul(x, x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 7.0);
  Backward(ops::Sum(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  x.ZeroGrad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(TensorTest, NoGradGuardRecordsNothing) {
  Tensor64 x({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tensor64 y;
  {
    NoGradGuard guard;
    y = ops::Scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(GradEnabled());
}

TEST(TensorTest, BackwardNeedsScalar) {
  Tensor64 x({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  EXPECT_THROW(Backward(ops::Scale(x, 1.0)), ValidationError);
}

TEST(TensorTest, CastRoundTrip) {
  Rng rng(1);
  auto x = RandomTensor<double>({4, 5}, rng);
  auto y = Cast<double>(Cast<float>(x));
  EXPECT_LT(MaxAbsDiff<double>(x.data(), y.data()), 1e-7);
}

struct ConvCase {
  int b, ci, co, h, k, stride, pad;
  bool bias;
};

class ConvOracleTest : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvOracleTest, MatchesNaiveLoop) {
  const ConvCase p = GetParam();
  Rng rng(11, static_cast<std::uint64_t>(p.k * 100 + p.stride * 10 + p.pad));
  auto x = RandomTensor<double>({p.b, p.ci, p.h, p.h}, rng);
  auto w = RandomTensor<double>({p.co, p.ci, p.k, p.k}, rng);
  auto bias = RandomTensor<double>({p.co}, rng);
  auto y = ops::Conv2d(x, w, p.bias ? bias : Tensor64(), p.stride, p.pad);
  const auto ref = NaiveConv(x, w, p.bias ? &bias : nullptr, p.stride, p.pad);
  ASSERT_EQ(static_cast<std::size_t>(y.numel()), ref.size());
  EXPECT_LT(MaxAbsDiff<double>(y.data(), ref), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(
    Shapes, ConvOracleTest,
    ::testing::Values(ConvCase{2, 3, 4, 6, 3, 1, 1, true},
                      ConvCase{1, 2, 3, 7, 3, 2, 1, false},
                      ConvCase{2, 1, 2, 5, 1, 1, 0, true},
                      ConvCase{1, 3, 2, 8, 5, 1, 2, true},
                      ConvCase{3, 2, 2, 6, 3, 1, 0, false}));

TEST(ConvTest, GeometryErrors) {
  Tensor x = Tensor::Zeros({1, 1, 2, 2});
  EXPECT_THROW(ops::Conv2d(x, Tensor::Zeros({1, 1, 5, 5}), Tensor(), 1, 0),
               GeometryError);
  EXPECT_THROW(ops::Conv2d(x, Tensor::Zeros({1, 2, 1, 1}), Tensor(), 1, 0),
               ValidationError);
}

TEST(ConvTest, Gradients) {
  Rng rng(3);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
    auto r = CheckGradients(
        [&](const std::vector<Tensor64>& in) {
          return Project(ops::Conv2d(in[0], in[1], in[2], stride, pad));
        },
        {RandomTensor<double>({2, 2, 5, 5}, rng),
         RandomTensor<double>({3, 2, 3, 3}, rng), RandomTensor<double>({3}, rng)});
    EXPECT_LE(r.max_rel_error, 1e-4) << "stride " << stride << " pad " << pad;
    EXPECT_GT(r.checked, 0);
  }
}

TEST(MaxPoolTest, MatchesWindowScanAndTieRule) {
  Rng rng(5);
  auto x = RandomTensor<double>({2, 3, 6, 4}, rng);
  auto y = ops::MaxPool2(x);
  ASSERT_EQ(y.shape(), (Shape{2, 3, 3, 2}));
  auto xd = x.data();
  for (std::int64_t p = 0; p < 6; ++p)
    for (std::int64_t i = 0; i < 3; ++i)
      for (std::int64_t j = 0; j < 2; ++j) {
        double m = -1e300;
        for (int di = 0; di < 2; ++di)
          for (int dj = 0; dj < 2; ++dj)
            m = std::max(m, xd[(p * 6 + 2 * i + di) * 4 + 2 * j + dj]);
        EXPECT_EQ(y.data()[(p * 3 + i) * 2 + j], m);
      }

  // All four equal: the gradient goes to the top-left element only.
  Tensor64 t({1, 1, 2, 2}, {1.0, 1.0, 1.0, 1.0});
  t.set_requires_grad(true);
  Backward(ops::Sum(ops::MaxPool2(t)));
  EXPECT_EQ(std::vector<double>(t.grad().begin(), t.grad().end()),
            (std::vector<double>{1, 0, 0, 0}));
  EXPECT_THROW(ops::MaxPool2(Tensor::Zeros({1, 1, 3, 4})), GeometryError);
}

TEST(MaxPoolTest, Gradients) {
  Rng rng(6);
  // Distinct values: a random permutation of a spread-out grid.
  std::vector<double> v(2 * 2 * 4 * 4);
  std::iota(v.begin(), v.end(), 0.0);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.Below(i)]);
  for (auto& e : v) e *= 0.1;
  auto r = CheckGradients(
      [](const std::vector<Tensor64>& in) { return Project(ops::MaxPool2(in[0])); },
      {Tensor64({2, 2, 4, 4}, v)});
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(UpsampleTest, NearestCopiesAndSumsGradients) {
  Tensor64 x({1, 1, 2, 2}, {1, 2, 3, 4});
  x.set_requires_grad(true);
  auto y = ops::UpsampleNearest2(x);
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
            (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
  Backward(ops::Sum(y));
  for (double g : x.grad()) EXPECT_EQ(g, 4.0);
}

TEST(MatMulTest, MatchesTripleLoopAndGradients) {
  Rng rng(8);
  auto x = RandomTensor<double>({3, 5}, rng);
  auto w = RandomTensor<double>({4, 5}, rng);
  auto b = RandomTensor<double>({4}, rng);
  auto y = ops::MatMulBias(x, w, b);
  for (int i = 0; i < 3; ++i)
    for (int o = 0; o < 4; ++o) {
      double acc = b.data()[o];
      for (int k = 0; k < 5; ++k) acc += x.data()[i * 5 + k] * w.data()[o * 5 + k];
      EXPECT_NEAR(y.data()[i * 4 + o], acc, 1e-13);
    }
  auto r = CheckGradients(
      [](const std::vector<Tensor64>& in) {
        return Project(ops::MatMulBias(in[0], in[1], in[2]));
      },
      {x, w, b});
  EXPECT_LE(r.max_rel_error, 1e-4);
  EXPECT_THROW(ops::MatMulBias(x, RandomTensor<double>({4, 6}, rng), b),
               ValidationError);
}

TEST(ElementwiseTest, Gradients) {
  Rng rng(9);
  auto r = CheckGradients(
      [](const std::vector<Tensor64>& in) {
        auto y = ops::Add(ops::Relu(in[0]), ops::Mul(ops::Sigmoid(in[0]), in[1]));
        return Project(ops::Scale(y, 1.7));
      },
      {RandomAwayFromZero<double>({2, 3, 4}, rng),
       RandomTensor<double>({2, 3, 4}, rng)});
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(ShapeOpsTest, Gradients) {
  Rng rng(10);
  const std::vector<std::int64_t> offsets{0, 2, 3, 6};
  auto r = CheckGradients(
      [&](const std::vector<Tensor64>& in) {
        auto cat = ops::ConcatChannels<double>({in[0], in[1]});
        auto gm = ops::GroupMean(cat, offsets);
        auto gap = ops::GlobalAvgPool(cat);
        auto rep = ops::RepeatGroups(in[2], offsets);
        auto scaled = ops::Mul(gap, gap);
        return ops::Add(ops::Add(Project(ops::Flatten(gm), 1), Project(scaled, 2)),
                        Project(rep, 3));
      },
      {RandomTensor<double>({2, 4, 3, 3}, rng), RandomTensor<double>({2, 2, 3, 3}, rng),
       RandomTensor<double>({3}, rng)});
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(ShapeOpsTest, GroupMeanAndRepeatValues) {
  Tensor64 x({1, 3, 1, 1}, {1.0, 3.0, 10.0});
  const std::vector<std::int64_t> offsets{0, 2, 3};
  auto m = ops::GroupMean(x, offsets);
  EXPECT_EQ(m.shape(), (Shape{1, 2, 1, 1}));
  EXPECT_DOUBLE_EQ(m.data()[0], 2.0);
  EXPECT_DOUBLE_EQ(m.data()[1], 10.0);
  auto rep = ops::RepeatGroups(Tensor64({2}, {5.0, 6.0}), offsets);
  EXPECT_EQ(std::vector<double>(rep.data().begin(), rep.data().end()),
            (std::vector<double>{5, 5, 6}));
}

TEST(BatchNormTest, TrainStatisticsAndRunningUpdate) {
  Tensor64 x({2, 1, 1, 2}, {1.0, 2.0, 3.0, 6.0});
  auto stats = BatchNormStats<double>::Init(1);
  const std::vector<std::int64_t> offsets{0, 1};
  auto y = ops::BatchNormGrouped(x, Tensor64::Full({1}, 1.0), Tensor64::Full({1}, 0.0),
                                 offsets, stats, Mode::kTrain);
  // mean 3, biased var 3.5, unbiased 14/3.
  const double sd = std::sqrt(3.5 + 1e-5);
  EXPECT_NEAR(y.data()[0], -2.0 / sd, 1e-12);
  EXPECT_NEAR(y.data()[3], 3.0 / sd, 1e-12);
  EXPECT_NEAR(stats.mean[0], 0.3, 1e-12);
  EXPECT_NEAR(stats.var[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);

  auto e = ops::BatchNormGrouped(x, Tensor64::Full({1}, 2.0), Tensor64::Full({1}, 1.0),
                                 offsets, stats, Mode::kEval);
  EXPECT_NEAR(e.data()[0], 2.0 * (1.0 - 0.3) / std::sqrt(stats.var[0] + 1e-5) + 1.0,
              1e-12);

  auto one = BatchNormStats<double>::Init(1);
  EXPECT_THROW(ops::BatchNormGrouped(Tensor64({1, 1, 1, 1}, {1.0}),
                                     Tensor64::Full({1}, 1.0), Tensor64::Full({1}, 0.0),
                                     offsets, one, Mode::kTrain),
               ValidationError);
}

TEST(BatchNormTest, Gradients) {
  Rng rng(12);
  const std::vector<std::int64_t> offsets{0, 2, 5};
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    auto stats = BatchNormStats<double>::Init(2);
    stats.mean = {0.1, -0.2};
    stats.var = {0.7, 1.3};
    auto r = CheckGradients(
        [&](const std::vector<Tensor64>& in) {
          auto s = stats;  // keep running statistics fixed across evaluations
          return Project(ops::BatchNormGrouped(in[0], in[1], in[2], offsets, s, mode));
        },
        {RandomTensor<double>({3, 5, 2, 2}, rng), RandomTensor<double>({2}, rng, 0.5, 1.5),
         RandomTensor<double>({2}, rng)});
    EXPECT_LE(r.max_rel_error, 1e-4) << (mode == Mode::kTrain ? "train" : "eval");
  }
}

TEST(LossTest, KnownValues) {
  const std::vector<int> labels{0, 3};
  auto ce = ops::SoftmaxCrossEntropy(Tensor64::Zeros({2, 4}), labels);
  EXPECT_NEAR(ce.item(), std::log(4.0), 1e-14);
  auto bce = ops::BceWithLogits(Tensor64::Zeros({1, 1, 1, 2}),
                                Tensor64({1, 1, 1, 2}, {0.0, 1.0}));
  EXPECT_NEAR(bce.item(), std::log(2.0), 1e-14);
  // Large logits stay finite.
  auto big = ops::BceWithLogits(Tensor64({1, 2}, {800.0, -800.0}),
                                Tensor64({1, 2}, {0.0, 1.0}));
  EXPECT_NEAR(big.item(), 800.0, 1e-9);
  const std::vector<int> bad{0, 4};
  EXPECT_THROW(ops::SoftmaxCrossEntropy(Tensor64::Zeros({2, 4}), bad), IndexError);
  EXPECT_THROW(ops::BceWithLogits(Tensor64::Zeros({1, 2}), Tensor64({1, 2}, {0.5, 1.0})),
               ValidationError);
}

TEST(LossTest, Gradients) {
  Rng rng(13);
  const std::vector<int> labels{2, 0, 1};
  std::vector<double> targets(12);
  for (auto& t : targets) t = rng.Bernoulli(0.4) ? 1.0 : 0.0;
  auto r = CheckGradients(
      [&](const std::vector<Tensor64>& in) {
        return ops::Add(ops::SoftmaxCrossEntropy(in[0], labels),
                        ops::BceWithLogits(in[1], Tensor64({3, 1, 2, 2}, targets)));
      },
      {RandomTensor<double>({3, 4}, rng, -2, 2), RandomTensor<double>({3, 1, 2, 2}, rng, -2, 2)});
  EXPECT_LE(r.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace eqseg
