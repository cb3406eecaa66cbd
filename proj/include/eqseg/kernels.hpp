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

#ifndef EQSEG_KERNELS_HPP_
#define EQSEG_KERNELS_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "eqseg/group.hpp"
#include "eqseg/tensor.hpp"

namespace eqseg {

// Linear action of a group element on a k x k kernel grid,
// (T_g kappa)(p) = kappa(g^-1 p). Angles that are multiples of 45 degrees act
// by permuting concentric square rings of the grid (exact for 90 degrees,
// and a genuine representation of C8/D8); other angles use bilinear
// sampling and are only approximately a group action.
struct GridAction {
  int kernel_size = 0;
  bool is_permutation = false;
  // taps[dst] lists (src, weight) pairs.
  std::vector<std::vector<std::pair<int, double>>> taps;
};

GridAction KernelGridAction(const GroupSpec& group, const GroupElement& g,
                            int kernel_size);

// Orthonormal basis of the kernels kappa with
// kappa(g x) = rho_out(g) kappa(x) rho_in(g)^-1 for every g.
struct EquivariantBasis {
  FieldType in_type;
  FieldType out_type;
  int kernel_size = 0;
  int count = 0;
  // count rows of [out_dim, in_dim, k, k] kernels, flattened row-major.
  std::vector<double> elements;

  std::int64_t out_dim() const { return out_type.total_dim(); }
  std::int64_t in_dim() const { return in_type.total_dim(); }
  std::int64_t element_size() const {
    return out_dim() * in_dim() * kernel_size * kernel_size;
  }
  std::span<const double> Element(int i) const {
    return std::span<const double>(elements).subspan(
        static_cast<std::size_t>(i * element_size()),
        static_cast<std::size_t>(element_size()));
  }
};

// Group average (1/|G|) sum_g rho_out(g)^-1 kappa(g x) rho_in(g).
// `kernel` is a flattened [out_dim, in_dim, k, k] array.
std::vector<double> ReynoldsProject(std::span<const double> kernel,
                                    const FieldType& in_type,
                                    const FieldType& out_type, int kernel_size);

// Projects every canonical kernel, then orthonormalises with modified
// Gram-Schmidt, dropping residuals below 1e-6 of the largest projected norm.
EquivariantBasis BuildBasis(const FieldType& in_type, const FieldType& out_type,
                            int kernel_size);

// Memoised BuildBasis for a single (in, out) representation pair.
std::shared_ptr<const EquivariantBasis> CachedPairBasis(
    const Representation& in_rep, const Representation& out_rep,
    int kernel_size);

// sum_i coeffs[i] * basis_i, differentiable in coeffs.
template <typename T>
BasicTensor<T> ExpandKernel(const EquivariantBasis& basis,
                            const BasicTensor<T>& coeffs);

// One field-pair block of a layer kernel.
struct KernelBlock {
  std::shared_ptr<const EquivariantBasis> basis;
  std::int64_t coeff_offset = 0;
  std::int64_t out_offset = 0;
  std::int64_t in_offset = 0;
};

// Assembles a [cout, cin, k, k] kernel from per-block expansions of a single
// coefficient vector.
template <typename T>
BasicTensor<T> AssembleKernel(const BasicTensor<T>& coeffs,
                              std::span<const KernelBlock> blocks,
                              std::int64_t cout, std::int64_t cin,
                              int kernel_size);

}  // namespace eqseg

#endif  // EQSEG_KERNELS_HPP_
