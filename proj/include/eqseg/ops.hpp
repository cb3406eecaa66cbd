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

#ifndef EQSEG_OPS_HPP_
#define EQSEG_OPS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "eqseg/tensor.hpp"

namespace eqseg {

enum class Mode { kTrain, kEval };

template <typename T>
struct BatchNormStats {
  std::vector<T> mean;
  std::vector<T> var;

  static BatchNormStats Init(std::size_t n) {
    return {std::vector<T>(n, T(0)), std::vector<T>(n, T(1))};
  }
};

namespace ops {

// Cross-correlation with zero padding. `bias` may be an undefined tensor.
// input [B,Cin,H,W], kernel [Cout,Cin,k,k] -> [B,Cout,H',W'].
template <typename T>
BasicTensor<T> Conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, int stride = 1,
                      int padding = 0);

// 2x2 / stride 2 max pooling; ties go to the first element in row-major order.
template <typename T>
BasicTensor<T> MaxPool2(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> UpsampleNearest2(const BasicTensor<T>& input);

// input [B,N] . weight[M,N]^T + bias[M] -> [B,M].
template <typename T>
BasicTensor<T> MatMulBias(const BasicTensor<T>& input,
                          const BasicTensor<T>& weight,
                          const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> Relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> Sigmoid(const BasicTensor<T>& input);

// Batch normalisation with statistics shared inside each channel group
// [offsets[f], offsets[f+1]). `offsets` has F+1 entries, gamma/beta have F.
template <typename T>
BasicTensor<T> BatchNormGrouped(const BasicTensor<T>& input,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta,
                                std::span<const std::int64_t> offsets,
                                BatchNormStats<T>& stats, Mode mode,
                                double momentum = 0.1, double eps = 1e-5);

// Per-channel batch normalisation (one group per channel).
template <typename T>
BasicTensor<T> BatchNormChannel(const BasicTensor<T>& input,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta,
                                BatchNormStats<T>& stats, Mode mode,
                                double momentum = 0.1, double eps = 1e-5);

// Mean negative log-softmax of the labelled class. logits [B,K].
template <typename T>
BasicTensor<T> SoftmaxCrossEntropy(const BasicTensor<T>& logits,
                                   std::span<const int> labels);

// Mean binary cross-entropy on logits; targets must be exactly 0 or 1.
template <typename T>
BasicTensor<T> BceWithLogits(const BasicTensor<T>& logits,
                             const BasicTensor<T>& targets);

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> Mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& a, T factor);

template <typename T>
BasicTensor<T> Sum(const BasicTensor<T>& a);

// Elementwise product with a constant (non-differentiable) mask.
template <typename T>
BasicTensor<T> MulConstant(const BasicTensor<T>& a, std::vector<T> mask);

// Concatenation along the channel axis of 4-D tensors.
template <typename T>
BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>& parts);

// [B,C,H,W] -> [B,C].
template <typename T>
BasicTensor<T> GlobalAvgPool(const BasicTensor<T>& input);

// Mean over each channel group: [B,C,H,W] -> [B,F,H,W].
template <typename T>
BasicTensor<T> GroupMean(const BasicTensor<T>& input,
                         std::span<const std::int64_t> offsets);

// Broadcasts one value per group to all channels of the group: [F] -> [C].
template <typename T>
BasicTensor<T> RepeatGroups(const BasicTensor<T>& values,
                            std::span<const std::int64_t> offsets);

// [B, ...] -> [B, prod(...)].
template <typename T>
BasicTensor<T> Flatten(const BasicTensor<T>& input);

}  // namespace ops
}  // namespace eqseg

#endif  // EQSEG_OPS_HPP_
