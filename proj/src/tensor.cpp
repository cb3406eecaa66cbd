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

#include "eqseg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "eqseg/error.hpp"

namespace eqseg {

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace detail {

std::uint64_t NextNodeSeq() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace detail

namespace {
thread_local bool g_grad_enabled = true;

void CheckShape(const Shape& shape) {
  for (auto e : shape) {
    if (e <= 0) {
      throw ValidationError("tensor extents must be positive, got " +
                            ShapeString(shape));
    }
  }
}
}  // namespace

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  CheckShape(shape);
  impl_->data.assign(static_cast<std::size_t>(NumElements(shape)), T(0));
  impl_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  CheckShape(shape);
  if (static_cast<std::int64_t>(data.size()) != NumElements(shape)) {
    throw ValidationError("data length " + std::to_string(data.size()) +
                          " does not match shape " + ShapeString(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Full(Shape shape, T value) {
  BasicTensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  static const Shape kEmpty;
  return impl_ ? impl_->shape : kEmpty;
}

template <typename T>
std::int64_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw IndexError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeString(shape()));
  }
  return impl_->shape[axis];
}

template <typename T>
std::int64_t BasicTensor<T>::numel() const {
  return impl_ ? static_cast<std::int64_t>(impl_->data.size()) : 0;
}

template <typename T>
std::span<T> BasicTensor<T>::data() {
  return impl_ ? std::span<T>(impl_->data) : std::span<T>();
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  return impl_ ? std::span<const T>(impl_->data) : std::span<const T>();
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw ValidationError("item() requires a single-element tensor, got " +
                          ShapeString(shape()));
  }
  return impl_->data[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!impl_) throw ValidationError("set_requires_grad on undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
bool BasicTensor<T>::is_leaf() const {
  return impl_ && impl_->grad_fn == nullptr;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!impl_) return {};
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad;
}

template <typename T>
void BasicTensor<T>::ZeroGrad() {
  if (impl_) impl_->grad.clear();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::Detach() const {
  if (!impl_) return {};
  return BasicTensor(impl_->shape, impl_->data);
}

template <typename T>
void AccumulateGrad(detail::TensorImpl<T>& impl, std::span<const T> g) {
  if (impl.grad.empty()) {
    impl.grad.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) impl.grad[i] += g[i];
}

namespace {

template <typename T>
BasicTensor<T> MakeOpResultImpl(
    const char* name, Shape shape, std::vector<T> data,
    std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs,
    std::function<void(std::span<const T>)> backward) {
  BasicTensor<T> out(std::move(shape), std::move(data));
  if (!GradEnabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const auto& p) { return p->requires_grad; });
  if (!any) return out;
  auto node = std::make_shared<detail::Node<T>>();
  node->seq = detail::NextNodeSeq();
  node->name = name;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl()->grad_fn = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

}  // namespace

template <typename T>
BasicTensor<T> MakeOpResult(
    const char* name, Shape shape, std::vector<T> data,
    std::initializer_list<const BasicTensor<T>*> inputs,
    std::function<void(std::span<const T>)> backward) {
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
  for (const auto* t : inputs) {
    if (t && t->defined()) impls.push_back(t->impl());
  }
  return MakeOpResultImpl<T>(name, std::move(shape), std::move(data),
                             std::move(impls), std::move(backward));
}

template <typename T>
BasicTensor<T> MakeOpResult(
    const char* name, Shape shape, std::vector<T> data,
    const std::vector<BasicTensor<T>>& inputs,
    std::function<void(std::span<const T>)> backward) {
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
  for (const auto& t : inputs) {
    if (t.defined()) impls.push_back(t.impl());
  }
  return MakeOpResultImpl<T>(name, std::move(shape), std::move(data),
                             std::move(impls), std::move(backward));
}

template <typename T>
void Backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ValidationError("backward requires a scalar loss, got " +
                          ShapeString(loss.shape()));
  }
  using Impl = detail::TensorImpl<T>;
  // Collect every non-leaf reachable from the loss.
  std::vector<Impl*> order;
  std::unordered_set<const Impl*> seen;
  std::vector<Impl*> stack{loss.impl().get()};
  while (!stack.empty()) {
    Impl* cur = stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    if (!cur->grad_fn) continue;
    order.push_back(cur);
    for (const auto& in : cur->grad_fn->inputs) {
      if (in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const Impl* a, const Impl* b) {
    return a->grad_fn->seq > b->grad_fn->seq;
  });
  Impl& root = *loss.impl();
  if (root.grad.empty()) {
    root.grad.assign(1, T(1));
  } else {
    root.grad[0] += T(1);
  }
  for (Impl* node_out : order) {
    if (node_out->grad.empty()) continue;  // no path carried gradient here
    node_out->grad_fn->backward(node_out->grad);
  }
}

template <typename To, typename From>
BasicTensor<To> Cast(const BasicTensor<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return BasicTensor<To>(x.shape(), std::move(out));
}

#define EQSEG_INSTANTIATE(T)                                              \
  template class BasicTensor<T>;                                          \
  template void Backward<T>(const BasicTensor<T>&);                       \
  template void AccumulateGrad<T>(detail::TensorImpl<T>&,                 \
                                  std::span<const T>);                    \
  template BasicTensor<T> MakeOpResult<T>(                                \
      const char*, Shape, std::vector<T>,                                 \
      std::initializer_list<const BasicTensor<T>*>,                       \
      std::function<void(std::span<const T>)>);                           \
  template BasicTensor<T> MakeOpResult<T>(                                \
      const char*, Shape, std::vector<T>, const std::vector<BasicTensor<T>>&, \
      std::function<void(std::span<const T>)>);

EQSEG_INSTANTIATE(float)
EQSEG_INSTANTIATE(double)
#undef EQSEG_INSTANTIATE

template BasicTensor<float> Cast<float, double>(const BasicTensor<double>&);
template BasicTensor<double> Cast<double, float>(const BasicTensor<float>&);
template BasicTensor<float> Cast<float, float>(const BasicTensor<float>&);
template BasicTensor<double> Cast<double, double>(const BasicTensor<double>&);

}  // namespace eqseg
