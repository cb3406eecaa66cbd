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

// Shared helpers for the unit tests: random tensors, finite differences and
// index-level image transforms written independently of the library.

#ifndef EQSEG_TESTS_TEST_UTIL_HPP_
#define EQSEG_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "eqseg/ops.hpp"
#include "eqseg/rng.hpp"
#include "eqseg/tensor.hpp"

namespace eqseg::testing {

template <typename T>
BasicTensor<T> RandomTensor(Shape shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::vector<T> v(static_cast<std::size_t>(NumElements(shape)));
  for (auto& x : v) x = static_cast<T>(rng.Uniform(lo, hi));
  return BasicTensor<T>(std::move(shape), std::move(v));
}

// Values bounded away from zero, so ReLU kinks are not straddled by the
// finite-difference step.
template <typename T>
BasicTensor<T> RandomAwayFromZero(Shape shape, Rng& rng) {
  std::vector<T> v(static_cast<std::size_t>(NumElements(shape)));
  for (auto& x : v) {
    const double m = rng.Uniform(0.05, 1.0);
    x = static_cast<T>(rng.Bernoulli(0.5) ? m : -m);
  }
  return BasicTensor<T>(std::move(shape), std::move(v));
}

template <typename T>
double MaxAbsDiff(std::span<const T> a, std::span<const T> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

template <typename T>
double MaxAbs(std::span<const T> a) {
  double m = 0;
  for (auto v : a) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

// Reduces an arbitrary output to a scalar with fixed random weights.
inline Tensor64 Project(const Tensor64& y, std::uint64_t seed = 99) {
  Rng rng(seed, 7);
  std::vector<double> w(static_cast<std::size_t>(y.numel()));
  for (auto& x : w) x = rng.Uniform(-1.0, 1.0);
  return ops::Sum(ops::MulConstant(y, std::move(w)));
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::int64_t checked = 0;
};

// Central differences with step h on every element of every input, compared
// with the autodiff gradient. Entries where both magnitudes are at most
// `floor` are skipped.
inline GradCheckResult CheckGradients(
    const std::function<Tensor64(const std::vector<Tensor64>&)>& loss_fn,
    std::vector<Tensor64> inputs, double h = 1e-5, double floor = 1e-6) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.ZeroGrad();
  }
  Backward(loss_fn(inputs));
  GradCheckResult r;
  NoGradGuard no_grad;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double saved = d[i];
      d[i] = saved + h;
      const double up = loss_fn(inputs).item();
      d[i] = saved - h;
      const double down = loss_fn(inputs).item();
      d[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max(std::abs(numeric), std::abs(analytic[i]));
      if (scale <= floor) continue;
      ++r.checked;
      r.max_rel_error =
          std::max(r.max_rel_error, std::abs(numeric - analytic[i]) / scale);
    }
  }
  return r;
}

// numpy.rot90 on the last two axes of a [B,C,H,W] buffer (H == W):
// out[i][j] = in[j][n-1-i].
template <typename T>
std::vector<T> Rot90(std::span<const T> in, std::int64_t planes, std::int64_t n,
                     int times = 1) {
  std::vector<T> cur(in.begin(), in.end());
  for (int t = 0; t < ((times % 4) + 4) % 4; ++t) {
    std::vector<T> out(cur.size());
    for (std::int64_t p = 0; p < planes; ++p) {
      const auto base = p * n * n;
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
          out[base + i * n + j] = cur[base + j * n + (n - 1 - i)];
        }
      }
    }
    cur = std::move(out);
  }
  return cur;
}

// Mirror across the vertical axis: out[i][j] = in[i][n-1-j].
template <typename T>
std::vector<T> FlipLR(std::span<const T> in, std::int64_t planes,
                      std::int64_t n) {
  std::vector<T> out(in.size());
  for (std::int64_t p = 0; p < planes; ++p) {
    const auto base = p * n * n;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        out[base + i * n + j] = in[base + i * n + (n - 1 - j)];
      }
    }
  }
  return out;
}

// Rank by Gaussian elimination with partial pivoting.
inline int MatrixRank(std::vector<std::vector<double>> rows, std::size_t cols,
                      double tol = 1e-9) {
  int rank = 0;
  for (std::size_t c = 0; c < cols && rank < static_cast<int>(rows.size()); ++c) {
    std::size_t best = static_cast<std::size_t>(rank);
    for (std::size_t r = best; r < rows.size(); ++r) {
      if (std::abs(rows[r][c]) > std::abs(rows[best][c])) best = r;
    }
    if (std::abs(rows[best][c]) <= tol) continue;
    std::swap(rows[best], rows[static_cast<std::size_t>(rank)]);
    const auto& piv = rows[static_cast<std::size_t>(rank)];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == static_cast<std::size_t>(rank)) continue;
      const double f = rows[r][c] / piv[c];
      if (f == 0) continue;
      for (std::size_t k = c; k < cols; ++k) rows[r][k] -= f * piv[k];
    }
    ++rank;
  }
  return rank;
}

}  // namespace eqseg::testing

#endif  // EQSEG_TESTS_TEST_UTIL_HPP_
