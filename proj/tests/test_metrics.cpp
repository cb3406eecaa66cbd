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

#include "eqseg/error.hpp"
#include "eqseg/metrics.hpp"
#include "eqseg/rng.hpp"
#include "test_util.hpp"

namespace eqseg {
namespace {

// Literal definition: mean of the per-class recalls, computed in double from
// explicit counts.
double OracleBalanced(const std::vector<std::uint8_t>& pred,
                      const std::vector<std::uint8_t>& truth) {
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i]) {
      (pred[i] ? tp : fn) += 1;
    } else {
      (pred[i] ? fp : tn) += 1;
    }
  }
  if (tn + fp == 0) return tp / (tp + fn);
  return 0.5 * (tp / (tp + fn) + tn / (tn + fp));
}

TEST(MetricsTest, WorkedExamples) {
  const std::vector<std::uint8_t> truth{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(BalancedSegAccuracy(std::vector<std::uint8_t>{1, 0, 0, 0}, truth), 0.75);
  EXPECT_DOUBLE_EQ(BalancedSegAccuracy(std::vector<std::uint8_t>{1, 1, 1, 1}, truth), 0.5);
  EXPECT_DOUBLE_EQ(BalancedSegAccuracy(std::vector<std::uint8_t>{0, 0, 0, 0}, truth), 0.5);
  EXPECT_DOUBLE_EQ(BalancedSegAccuracy(truth, truth), 1.0);
  EXPECT_DOUBLE_EQ(BalancedSegAccuracy(std::vector<std::uint8_t>{1, 0}, std::vector<std::uint8_t>{1, 1}), 0.5);
  EXPECT_THROW(BalancedSegAccuracy(std::vector<std::uint8_t>{1, 0}, std::vector<std::uint8_t>{0, 0}),
               ValidationError);
  EXPECT_THROW(BalancedSegAccuracy(std::vector<std::uint8_t>{1}, truth), ValidationError);

  const std::vector<int> preds{0, 1, 2, 3, 3}, labels{0, 1, 2, 2, 1};
  EXPECT_DOUBLE_EQ(ClassificationAccuracy(preds, labels), 0.6);
}

TEST(MetricsTest, MatchesOracleOnRandomCases) {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.Below(300));
    const double p_pos = rng.Uniform(0.0, 1.0);
    std::vector<std::uint8_t> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = rng.Bernoulli(p_pos);
      pred[i] = rng.Bernoulli(0.5);
    }
    truth[rng.Below(n)] = 1;
    const double got = BalancedSegAccuracy(pred, truth);
    const double want = OracleBalanced(pred, truth);
    ASSERT_NEAR(got, want, 1e-12) << "trial " << trial;
    ASSERT_GE(got, 0.0);
    ASSERT_LE(got, 1.0);
    ++checked;

    std::vector<int> cp(n), cl(n);
    int same = 0;
    for (int i = 0; i < n; ++i) {
      cp[i] = static_cast<int>(rng.Below(4));
      cl[i] = static_cast<int>(rng.Below(4));
      same += cp[i] == cl[i];
    }
    ASSERT_DOUBLE_EQ(ClassificationAccuracy(cp, cl), static_cast<double>(same) / n);
  }
  EXPECT_EQ(checked, 1000);
}

TEST(MetricsTest, InvariantUnderJointRotation) {
  Rng rng(5);
  const int n = 9;
  std::vector<std::uint8_t> pred(n * n), truth(n * n);
  for (int i = 0; i < n * n; ++i) {
    pred[i] = rng.Bernoulli(0.4);
    truth[i] = rng.Bernoulli(0.3);
  }
  truth[0] = 1;
  truth[1] = 0;
  auto rot = [n](const std::vector<std::uint8_t>& v) {
    std::vector<std::uint8_t> out(v.size());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[i * n + j] = v[j * n + (n - 1 - i)];
    return out;
  };
  const double base = BalancedSegAccuracy(pred, truth);
  auto p = pred, t = truth;
  for (int q = 1; q < 4; ++q) {
    p = rot(p);
    t = rot(t);
    EXPECT_EQ(BalancedSegAccuracy(p, t), base);
  }
}

TEST(MetricsTest, Aggregation) {
  const std::vector<SegCounts> counts{{1, 1, 8, 0}, {9, 1, 0, 0}};
  // Per-sample: mean(0.5*(0.5+1), 0.9) = 0.825.
  EXPECT_DOUBLE_EQ(DatasetBalancedSegAccuracy(counts, SegAggregation::kPerSample), 0.825);
  // Pooled: tp 10 fn 2 tn 8 fp 0 -> 0.5*(10/12 + 1).
  EXPECT_DOUBLE_EQ(DatasetBalancedSegAccuracy(counts, SegAggregation::kPooled),
                   0.5 * (10.0 / 12.0 + 1.0));
  EXPECT_EQ(ParseSegAggregation("pooled"), SegAggregation::kPooled);
  EXPECT_EQ(SegAggregationName(SegAggregation::kPerSample), "per_sample");
  EXPECT_THROW(ParseSegAggregation("macro"), LookupError);
}

TEST(MetricsTest, ThresholdAndArgMax) {
  const std::vector<float> logits{-1.0f, 0.0f, 1e-7f, 3.0f};
  EXPECT_EQ(ThresholdLogits<float>(logits), (std::vector<std::uint8_t>{0, 0, 1, 1}));
  const std::vector<double> v{0.1, 0.7, 0.7, -2};
  EXPECT_EQ(ArgMax<double>(v), 1);
}

TEST(MetricsTest, EvaluateEquivariantModel) {
  ModelConfig cfg;
  cfg.image_size = 32;
  cfg.group_n = 4;
  cfg.widths = {4, 4, 8, 8, 8};
  cfg.mlp_hidden = {8, 8};
  auto model = UNetModel<float>::Build(cfg, 3);
  std::vector<Sample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(SynthesizeSample(i, 32, 2));
  const EvalReport plain = Evaluate(model, samples, SegAggregation::kPerSample, 4);
  EXPECT_EQ(plain.n_samples, 6);
  EXPECT_EQ(plain.per_class_count[0] + plain.per_class_count[1] +
                plain.per_class_count[2] + plain.per_class_count[3],
            6);

  // An exactly equivariant model scores the same on the quarter-rotated set.
  const auto rotated = RotatedTestSet(samples, RotationMode::kQuarter, 17);
  const EvalReport rot = Evaluate(model, rotated, SegAggregation::kPerSample, 4);
  EXPECT_DOUBLE_EQ(rot.classification_accuracy, plain.classification_accuracy);
  EXPECT_NEAR(rot.balanced_seg_accuracy, plain.balanced_seg_accuracy, 1e-3);

  EXPECT_NE(plain.FormatTable().find("balanced seg accuracy"), std::string::npos);
  EXPECT_NE(plain.FormatKeyValues().find("n_samples = 6"), std::string::npos);
}

}  // namespace
}  // namespace eqseg
