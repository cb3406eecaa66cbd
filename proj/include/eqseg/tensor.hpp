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

#ifndef EQSEG_TENSOR_HPP_
#define EQSEG_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace eqseg {

using Shape = std::vector<std::int64_t>;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
constexpr DType DTypeOf();
template <>
constexpr DType DTypeOf<float>() { return DType::kFloat32; }
template <>
constexpr DType DTypeOf<double>() { return DType::kFloat64; }

std::string ShapeString(const Shape& shape);
std::int64_t NumElements(const Shape& shape);

namespace detail {

template <typename T>
struct Node;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;
};

// One recorded operation. `seq` is the global execution counter, so sorting
// by it descending replays the tape in reverse.
template <typename T>
struct Node {
  std::uint64_t seq = 0;
  const char* name = "";
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::function<void(std::span<const T> grad_out)> backward;
};

std::uint64_t NextNodeSeq();

}  // namespace detail

// Gradient recording is on by default; NoGradGuard disables it for the
// current thread (evaluation, parameter updates).
bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major array with optional reverse-mode gradient tracking.
// Copies are shallow: two handles to the same tensor share data and grad.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape);
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor Zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor Full(Shape shape, T value);
  static BasicTensor Scalar(T value) { return Full(Shape{}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t numel() const;
  static constexpr DType dtype() { return DTypeOf<T>(); }

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;

  bool requires_grad() const;
  BasicTensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  // Zero-filled view when no gradient has been accumulated yet.
  std::span<const T> grad() const;
  void ZeroGrad();

  // New tensor holding a copy of the data, outside any graph.
  BasicTensor Detach() const;

  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Accumulates d(loss)/d(leaf) into every requires_grad tensor reachable from
// the scalar `loss`.
template <typename T>
void Backward(const BasicTensor<T>& loss);

// Adds `g` into the gradient buffer of `impl` (allocating on first use).
template <typename T>
void AccumulateGrad(detail::TensorImpl<T>& impl, std::span<const T> g);

// Wraps a freshly computed buffer as an op output. The node is recorded only
// when gradients are enabled and some input requires them.
template <typename T>
BasicTensor<T> MakeOpResult(
    const char* name, Shape shape, std::vector<T> data,
    std::initializer_list<const BasicTensor<T>*> inputs,
    std::function<void(std::span<const T>)> backward);

template <typename T>
BasicTensor<T> MakeOpResult(
    const char* name, Shape shape, std::vector<T> data,
    const std::vector<BasicTensor<T>>& inputs,
    std::function<void(std::span<const T>)> backward);

template <typename To, typename From>
BasicTensor<To> Cast(const BasicTensor<From>& x);

}  // namespace eqseg

#endif  // EQSEG_TENSOR_HPP_
