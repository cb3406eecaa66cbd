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

#include "eqseg/layers.hpp"

#include <cmath>

#include "eqseg/error.hpp"

namespace eqseg {
namespace {

void RequireType(const FieldType& expected, const FieldType& got,
                 const char* layer) {
  if (!(expected == got)) {
    throw ValidationError(std::string(layer) + ": expected field type " +
                          expected.Name() + ", got " + got.Name());
  }
}

}  // namespace

template <typename T>
EquivariantConv<T>::EquivariantConv(FieldType in_type, FieldType out_type,
                                    int kernel_size, int stride, int padding)
    : in_type_(std::move(in_type)),
      out_type_(std::move(out_type)),
      kernel_size_(kernel_size),
      stride_(stride),
      padding_(padding < 0 ? (kernel_size - 1) / 2 : padding) {
  if (!(in_type_.group() == out_type_.group())) {
    throw ValidationError("equivariant conv: input over " +
                          in_type_.group().Name() + ", output over " +
                          out_type_.group().Name());
  }
  for (const auto& f : out_type_.fields()) {
    if (!f.IsPermutation()) {
      throw ValidationError(
          "equivariant conv: field bias requires permutation representations");
    }
  }
  std::int64_t coeff = 0;
  for (int o = 0; o < out_type_.size(); ++o) {
    for (int i = 0; i < in_type_.size(); ++i) {
      auto basis = CachedPairBasis(in_type_.fields()[i], out_type_.fields()[o],
                                   kernel_size_);
      if (basis->count == 0) continue;
      blocks_.push_back(
          {basis, coeff, out_type_.offsets()[o], in_type_.offsets()[i]});
      coeff += basis->count;
    }
  }
  coeffs_ = coeff > 0 ? BasicTensor<T>::Zeros({coeff}) : BasicTensor<T>();
  if (coeffs_.defined()) coeffs_.set_requires_grad(true);
  bias_ = BasicTensor<T>::Zeros({out_type_.size()});
  bias_.set_requires_grad(true);
}

template <typename T>
void EquivariantConv<T>::Init(Rng& rng) {
  const double fan_in =
      static_cast<double>(in_type_.total_dim()) * kernel_size_ * kernel_size_;
  auto c = coeffs_.data();
  for (const auto& blk : blocks_) {
    const double block_size = static_cast<double>(blk.basis->element_size());
    // The basis is orthonormal, so this gives the block an expected squared
    // norm of block_size * 2 / fan_in.
    const double sd = std::sqrt(2.0 * block_size / (fan_in * blk.basis->count));
    for (int i = 0; i < blk.basis->count; ++i) {
      c[blk.coeff_offset + i] = static_cast<T>(sd * rng.Normal());
    }
  }
  for (auto& b : bias_.data()) b = T(0);
}

template <typename T>
BasicTensor<T> EquivariantConv<T>::Kernel() const {
  const std::int64_t cout = out_type_.total_dim(), cin = in_type_.total_dim();
  if (!coeffs_.defined()) {
    return BasicTensor<T>::Zeros({cout, cin, kernel_size_, kernel_size_});
  }
  return AssembleKernel<T>(coeffs_, blocks_, cout, cin, kernel_size_);
}

template <typename T>
BasicTensor<T> EquivariantConv<T>::ExpandedBias() const {
  return ops::RepeatGroups(bias_, out_type_.offsets());
}

template <typename T>
GeometricTensor<T> EquivariantConv<T>::Forward(
    const GeometricTensor<T>& x) const {
  RequireType(in_type_, x.type, "equivariant conv");
  auto y = ops::Conv2d(x.tensor, Kernel(), ExpandedBias(), stride_, padding_);
  return GeometricTensor<T>(std::move(y), out_type_);
}

template <typename T>
void EquivariantConv<T>::CollectParams(const std::string& prefix,
                                       std::vector<ParamRef<T>>& out) const {
  if (coeffs_.defined()) out.push_back({prefix + ".coeffs", coeffs_});
  out.push_back({prefix + ".bias", bias_});
}

template <typename T>
GeometricTensor<T> GroupPool(const GeometricTensor<T>& x) {
  if (!x.type.AllOfKind(RepKind::kRegular)) {
    throw ValidationError("group_pool: every field must be regular, got " +
                          x.type.Name());
  }
  auto y = ops::GroupMean(x.tensor, x.type.offsets());
  return GeometricTensor<T>(std::move(y),
                            FieldType::Trivial(x.type.group(), x.type.size()));
}

template <typename T>
FieldBatchNorm<T>::FieldBatchNorm(FieldType type, double momentum, double eps)
    : type_(std::move(type)),
      momentum_(momentum),
      eps_(eps),
      gamma_(BasicTensor<T>::Full({type_.size()}, T(1))),
      beta_(BasicTensor<T>::Zeros({type_.size()})),
      stats_(BatchNormStats<T>::Init(static_cast<std::size_t>(type_.size()))) {
  gamma_.set_requires_grad(true);
  beta_.set_requires_grad(true);
}

template <typename T>
GeometricTensor<T> FieldBatchNorm<T>::Forward(const GeometricTensor<T>& x,
                                              Mode mode) {
  RequireType(type_, x.type, "field batchnorm");
  auto y = ops::BatchNormGrouped(x.tensor, gamma_, beta_, type_.offsets(),
                                 stats_, mode, momentum_, eps_);
  return GeometricTensor<T>(std::move(y), type_);
}

template <typename T>
void FieldBatchNorm<T>::CollectParams(const std::string& prefix,
                                      std::vector<ParamRef<T>>& out) const {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

template <typename T>
void FieldBatchNorm<T>::CollectBuffers(const std::string& prefix,
                                       std::vector<BufferRef<T>>& out) {
  out.push_back({prefix + ".running_mean", &stats_.mean});
  out.push_back({prefix + ".running_var", &stats_.var});
}

template <typename T>
FieldDropout<T>::FieldDropout(FieldType type, double p)
    : type_(std::move(type)), p_(p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("dropout probability must lie in [0,1], got " +
                          std::to_string(p));
  }
}

template <typename T>
std::vector<T> FieldDropout<T>::SampleMask(const Shape& shape, Rng& rng) const {
  const std::int64_t batch = shape[0], c = shape[1];
  const std::int64_t hw = shape[2] * shape[3];
  std::vector<T> mask(static_cast<std::size_t>(batch * c * hw));
  const T keep = p_ >= 1.0 ? T(0) : static_cast<T>(1.0 / (1.0 - p_));
  const auto& offs = type_.offsets();
  for (std::int64_t b = 0; b < batch; ++b) {
    for (int f = 0; f < type_.size(); ++f) {
      for (std::int64_t p = 0; p < hw; ++p) {
        const T v = rng.Bernoulli(p_) ? T(0) : keep;
        for (auto ch = offs[f]; ch < offs[f + 1]; ++ch) {
          mask[(b * c + ch) * hw + p] = v;
        }
      }
    }
  }
  return mask;
}

template <typename T>
GeometricTensor<T> FieldDropout<T>::Forward(const GeometricTensor<T>& x,
                                            Mode mode, Rng& rng) const {
  RequireType(type_, x.type, "field dropout");
  if (mode == Mode::kEval || p_ == 0.0) return x;
  auto y = ops::MulConstant(x.tensor, SampleMask(x.tensor.shape(), rng));
  return GeometricTensor<T>(std::move(y), type_);
}

template <typename T>
ConvBlock<T>::ConvBlock(const FieldType& in_type, const FieldType& out_type,
                        int kernel_size, double dropout_p)
    : conv1_(in_type, out_type, kernel_size),
      bn1_(out_type),
      drop1_(out_type, dropout_p),
      conv2_(out_type, out_type, kernel_size),
      bn2_(out_type),
      drop2_(out_type, dropout_p) {}

template <typename T>
void ConvBlock<T>::Init(Rng& rng) {
  conv1_.Init(rng);
  conv2_.Init(rng);
}

template <typename T>
GeometricTensor<T> ConvBlock<T>::Forward(const GeometricTensor<T>& x, Mode mode,
                                         Rng& rng) {
  auto h = drop1_.Forward(ReluField(bn1_.Forward(conv1_.Forward(x), mode)),
                          mode, rng);
  return drop2_.Forward(ReluField(bn2_.Forward(conv2_.Forward(h), mode)), mode,
                        rng);
}

template <typename T>
std::int64_t ConvBlock<T>::ParamCount() const {
  return conv1_.ParamCount() + bn1_.ParamCount() + conv2_.ParamCount() +
         bn2_.ParamCount();
}

template <typename T>
void ConvBlock<T>::CollectParams(const std::string& prefix,
                                 std::vector<ParamRef<T>>& out) const {
  conv1_.CollectParams(prefix + ".conv1", out);
  bn1_.CollectParams(prefix + ".bn1", out);
  conv2_.CollectParams(prefix + ".conv2", out);
  bn2_.CollectParams(prefix + ".bn2", out);
}

template <typename T>
void ConvBlock<T>::CollectBuffers(const std::string& prefix,
                                  std::vector<BufferRef<T>>& out) {
  bn1_.CollectBuffers(prefix + ".bn1", out);
  bn2_.CollectBuffers(prefix + ".bn2", out);
}

template <typename T>
GeometricTensor<T> ReluField(const GeometricTensor<T>& x) {
  return GeometricTensor<T>(ops::Relu(x.tensor), x.type);
}

template <typename T>
GeometricTensor<T> MaxPoolField(const GeometricTensor<T>& x) {
  return GeometricTensor<T>(ops::MaxPool2(x.tensor), x.type);
}

template <typename T>
GeometricTensor<T> UpsampleField(const GeometricTensor<T>& x) {
  return GeometricTensor<T>(ops::UpsampleNearest2(x.tensor), x.type);
}

template <typename T>
GeometricTensor<T> ConcatFields(const GeometricTensor<T>& a,
                                const GeometricTensor<T>& b) {
  return GeometricTensor<T>(ops::ConcatChannels<T>({a.tensor, b.tensor}),
                            a.type.Concat(b.type));
}

#define EQSEG_INSTANTIATE(T)                                                 \
  template class EquivariantConv<T>;                                         \
  template class FieldBatchNorm<T>;                                          \
  template class FieldDropout<T>;                                            \
  template class ConvBlock<T>;                                               \
  template GeometricTensor<T> GroupPool(const GeometricTensor<T>&);          \
  template GeometricTensor<T> ReluField(const GeometricTensor<T>&);          \
  template GeometricTensor<T> MaxPoolField(const GeometricTensor<T>&);       \
  template GeometricTensor<T> UpsampleField(const GeometricTensor<T>&);      \
  template GeometricTensor<T> ConcatFields(const GeometricTensor<T>&,        \
                                           const GeometricTensor<T>&);

EQSEG_INSTANTIATE(float)
EQSEG_INSTANTIATE(double)
#undef EQSEG_INSTANTIATE

}  // namespace eqseg
