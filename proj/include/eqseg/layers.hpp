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

#ifndef EQSEG_LAYERS_HPP_
#define EQSEG_LAYERS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "eqseg/group.hpp"
#include "eqseg/kernels.hpp"
#include "eqseg/ops.hpp"
#include "eqseg/rng.hpp"
#include "eqseg/tensor.hpp"

namespace eqseg {

template <typename T>
struct ParamRef {
  std::string name;
  BasicTensor<T> tensor;
};

template <typename T>
struct BufferRef {
  std::string name;
  std::vector<T>* values;
};

// Convolution whose kernel is constrained to the equivariant subspace for
// (in_type, out_type). Learnable state: one coefficient vector over all
// field-pair bases and one bias scalar per output field.
template <typename T>
class EquivariantConv {
 public:
  // padding < 0 selects (k-1)/2.
  EquivariantConv(FieldType in_type, FieldType out_type, int kernel_size,
                  int stride = 1, int padding = -1);

  // He-style initialisation of the expanded kernel; biases start at zero.
  void Init(Rng& rng);

  GeometricTensor<T> Forward(const GeometricTensor<T>& x) const;

  BasicTensor<T> Kernel() const;
  BasicTensor<T> ExpandedBias() const;

  const FieldType& in_type() const { return in_type_; }
  const FieldType& out_type() const { return out_type_; }
  int kernel_size() const { return kernel_size_; }
  BasicTensor<T>& coeffs() { return coeffs_; }
  BasicTensor<T>& bias() { return bias_; }
  const BasicTensor<T>& coeffs() const { return coeffs_; }
  const BasicTensor<T>& bias() const { return bias_; }
  const std::vector<KernelBlock>& blocks() const { return blocks_; }
  std::int64_t ParamCount() const { return coeffs_.numel() + bias_.numel(); }

  void CollectParams(const std::string& prefix,
                     std::vector<ParamRef<T>>& out) const;

 private:
  FieldType in_type_;
  FieldType out_type_;
  int kernel_size_;
  int stride_;
  int padding_;
  std::vector<KernelBlock> blocks_;
  BasicTensor<T> coeffs_;
  BasicTensor<T> bias_;
};

// Mean over the |G| channels of every regular field.
template <typename T>
GeometricTensor<T> GroupPool(const GeometricTensor<T>& x);

// Batch normalisation with one (gamma, beta, mean, var) per field.
template <typename T>
class FieldBatchNorm {
 public:
  explicit FieldBatchNorm(FieldType type, double momentum = 0.1,
                          double eps = 1e-5);

  GeometricTensor<T> Forward(const GeometricTensor<T>& x, Mode mode);

  const FieldType& type() const { return type_; }
  BasicTensor<T>& gamma() { return gamma_; }
  BasicTensor<T>& beta() { return beta_; }
  BatchNormStats<T>& stats() { return stats_; }
  std::int64_t ParamCount() const { return gamma_.numel() + beta_.numel(); }

  void CollectParams(const std::string& prefix,
                     std::vector<ParamRef<T>>& out) const;
  void CollectBuffers(const std::string& prefix,
                      std::vector<BufferRef<T>>& out);

 private:
  FieldType type_;
  double momentum_;
  double eps_;
  BasicTensor<T> gamma_;
  BasicTensor<T> beta_;
  BatchNormStats<T> stats_;
};

// Dropout with one Bernoulli draw per (sample, field, pixel), shared by all
// channels of the field. Survivors are scaled by 1/(1-p).
template <typename T>
class FieldDropout {
 public:
  FieldDropout(FieldType type, double p);

  GeometricTensor<T> Forward(const GeometricTensor<T>& x, Mode mode,
                             Rng& rng) const;

  // Mask for a given tensor shape, exposed so tests can transport it.
  std::vector<T> SampleMask(const Shape& shape, Rng& rng) const;

  double p() const { return p_; }

 private:
  FieldType type_;
  double p_;
};

// conv -> bn -> relu -> dropout, twice.
template <typename T>
class ConvBlock {
 public:
  ConvBlock(const FieldType& in_type, const FieldType& out_type,
            int kernel_size, double dropout_p);

  void Init(Rng& rng);
  GeometricTensor<T> Forward(const GeometricTensor<T>& x, Mode mode, Rng& rng);

  const FieldType& in_type() const { return conv1_.in_type(); }
  const FieldType& out_type() const { return conv2_.out_type(); }
  std::int64_t ParamCount() const;

  void CollectParams(const std::string& prefix,
                     std::vector<ParamRef<T>>& out) const;
  void CollectBuffers(const std::string& prefix,
                      std::vector<BufferRef<T>>& out);

  EquivariantConv<T>& conv1() { return conv1_; }
  EquivariantConv<T>& conv2() { return conv2_; }

 private:
  EquivariantConv<T> conv1_;
  FieldBatchNorm<T> bn1_;
  FieldDropout<T> drop1_;
  EquivariantConv<T> conv2_;
  FieldBatchNorm<T> bn2_;
  FieldDropout<T> drop2_;
};

// Pointwise helpers on geometric tensors; valid for permutation
// representations, which is all this library constructs.
template <typename T>
GeometricTensor<T> ReluField(const GeometricTensor<T>& x);
template <typename T>
GeometricTensor<T> MaxPoolField(const GeometricTensor<T>& x);
template <typename T>
GeometricTensor<T> UpsampleField(const GeometricTensor<T>& x);
template <typename T>
GeometricTensor<T> ConcatFields(const GeometricTensor<T>& a,
                                const GeometricTensor<T>& b);

}  // namespace eqseg

#endif  // EQSEG_LAYERS_HPP_
