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

#ifndef EQSEG_METRICS_HPP_
#define EQSEG_METRICS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "eqseg/data.hpp"
#include "eqseg/model.hpp"

namespace eqseg {

// Fraction of exact matches. Throws ValidationError on empty or unequal input.
double ClassificationAccuracy(std::span<const int> preds,
                              std::span<const int> labels);

struct SegCounts {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;

  SegCounts& operator+=(const SegCounts& o);
};

// Masks are 0/1 bytes of equal length.
SegCounts CountSegmentation(std::span<const std::uint8_t> pred,
                            std::span<const std::uint8_t> truth);

// (TPR + TNR) / 2, or TPR alone when there are no true negatives. Throws
// ValidationError when there are no true positives.
double BalancedAccuracy(const SegCounts& c);
double BalancedSegAccuracy(std::span<const std::uint8_t> pred,
                           std::span<const std::uint8_t> truth);

enum class SegAggregation { kPerSample, kPooled };
SegAggregation ParseSegAggregation(std::string_view text);
std::string SegAggregationName(SegAggregation a);

// Per-sample scores averaged without weights, or one score over pooled
// pixel counts.
double DatasetBalancedSegAccuracy(std::span<const SegCounts> per_sample,
                                  SegAggregation aggregation);

// Foreground wherever logit > 0, i.e. sigmoid > 0.5.
template <typename T>
std::vector<std::uint8_t> ThresholdLogits(std::span<const T> logits);

template <typename T>
int ArgMax(std::span<const T> values);

// For each angle: max |rotate(seg(x)) - seg(rotate(x))| over batch and
// pixels, in eval mode.
template <typename T>
std::map<double, double> EquivarianceError(UNetModel<T>& model,
                                           const BasicTensor<T>& images,
                                           std::span<const double> angles);

// For each angle: max |class(x) - class(rotate(x))|, in eval mode.
template <typename T>
std::map<double, double> InvarianceError(UNetModel<T>& model,
                                         const BasicTensor<T>& images,
                                         std::span<const double> angles);

struct EvalReport {
  std::int64_t n_samples = 0;
  double classification_accuracy = 0;
  double balanced_seg_accuracy = 0;
  std::array<double, kNumDriverGroups> per_class_accuracy{};
  std::array<std::int64_t, kNumDriverGroups> per_class_count{};
  std::map<double, double> equivariance_errors;
  std::string split;
  std::string rotation = "none";
  std::string aggregation = "per_sample";

  std::string FormatTable() const;
  std::string FormatKeyValues() const;
};

EvalReport Evaluate(UNetModel<float>& model, std::span<const Sample> samples,
                    SegAggregation aggregation, int batch_size = 32);

}  // namespace eqseg

#endif  // EQSEG_METRICS_HPP_
