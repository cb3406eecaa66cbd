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

#include "eqseg/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eqseg/error.hpp"

namespace eqseg::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void RequireRank(const BasicTensor<T>& t, std::size_t rank, const char* op,
                 const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw ValidationError(std::string(op) + ": " + what + " must be rank " +
                          std::to_string(rank) + ", got " +
                          ShapeString(t.shape()));
  }
}

template <typename T>
void RequireSameShape(const BasicTensor<T>& a, const BasicTensor<T>& b,
                      const char* op) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " +
                          ShapeString(a.shape()) + " vs " +
                          ShapeString(b.shape()));
  }
}

struct ConvGeom {
  std::int64_t batch, cin, h, w, cout, k, ho, wo;
  int stride, pad;
  std::int64_t rows() const { return cin * k * k; }
  std::int64_t cols() const { return batch * ho * wo; }
};

// col[(c*k+ki)*k+kj, b*ho*wo + oh*wo + ow] = input[b,c,oh*s-p+ki,ow*s-p+kj]
template <typename T>
void Im2Col(const ConvGeom& g, const T* in, T* col) {
  const std::int64_t plane = g.ho * g.wo;
  const std::int64_t ncols = g.cols();
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        T* row = col + ((c * g.k + ki) * g.k + kj) * ncols;
        for (std::int64_t b = 0; b < g.batch; ++b) {
          const T* src = in + (b * g.cin + c) * g.h * g.w;
          T* dst = row + b * plane;
          for (std::int64_t oh = 0; oh < g.ho; ++oh) {
            const std::int64_t ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= g.h) {
              std::fill(dst + oh * g.wo, dst + (oh + 1) * g.wo, T(0));
              continue;
            }
            for (std::int64_t ow = 0; ow < g.wo; ++ow) {
              const std::int64_t iw = ow * g.stride - g.pad + kj;
              dst[oh * g.wo + ow] =
                  (iw < 0 || iw >= g.w) ? T(0) : src[ih * g.w + iw];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Col2Im(const ConvGeom& g, const T* col, T* in_grad) {
  const std::int64_t plane = g.ho * g.wo;
  const std::int64_t ncols = g.cols();
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ki = 0; ki < g.k; ++ki) {
      for (std::int64_t kj = 0; kj < g.k; ++kj) {
        const T* row = col + ((c * g.k + ki) * g.k + kj) * ncols;
        for (std::int64_t b = 0; b < g.batch; ++b) {
          T* dst = in_grad + (b * g.cin + c) * g.h * g.w;
          const T* src = row + b * plane;
          for (std::int64_t oh = 0; oh < g.ho; ++oh) {
            const std::int64_t ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= g.h) continue;
            for (std::int64_t ow = 0; ow < g.wo; ++ow) {
              const std::int64_t iw = ow * g.stride - g.pad + kj;
              if (iw >= 0 && iw < g.w) dst[ih * g.w + iw] += src[oh * g.wo + ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> Conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, int stride, int padding) {
  RequireRank(input, 4, "conv2d", "input");
  RequireRank(kernel, 4, "conv2d", "kernel");
  if (stride < 1 || padding < 0) {
    throw ValidationError("conv2d: stride must be >= 1 and padding >= 0");
  }
  ConvGeom g{};
  g.batch = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernel.dim(0);
  g.k = kernel.dim(2);
  g.stride = stride;
  g.pad = padding;
  if (kernel.dim(1) != g.cin) {
    throw ValidationError("conv2d: kernel expects " +
                          std::to_string(kernel.dim(1)) +
                          " input channels, input has " + std::to_string(g.cin));
  }
  if (kernel.dim(3) != g.k) {
    throw ValidationError("conv2d: kernel must be square, got " +
                          ShapeString(kernel.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw ValidationError("conv2d: bias must have shape [" +
                          std::to_string(g.cout) + "], got " +
                          ShapeString(bias.shape()));
  }
  const std::int64_t span_h = g.h + 2 * g.pad - g.k;
  const std::int64_t span_w = g.w + 2 * g.pad - g.k;
  if (span_h < 0 || span_w < 0) {
    throw GeometryError("conv2d: kernel " + std::to_string(g.k) +
                        " larger than padded input " + ShapeString(input.shape()));
  }
  g.ho = span_h / stride + 1;
  g.wo = span_w / stride + 1;
  const std::int64_t plane = g.ho * g.wo;

  std::vector<T> col(static_cast<std::size_t>(g.rows() * g.cols()));
  Im2Col(g, input.data().data(), col.data());
  RowMat<T> prod = ConstMapMat<T>(kernel.data().data(), g.cout, g.rows()) *
                   ConstMapMat<T>(col.data(), g.rows(), g.cols());
  col.clear();
  col.shrink_to_fit();

  std::vector<T> out(static_cast<std::size_t>(g.batch * g.cout * plane));
  for (std::int64_t b = 0; b < g.batch; ++b) {
    for (std::int64_t co = 0; co < g.cout; ++co) {
      const T bval = bias.defined() ? bias.data()[co] : T(0);
      const T* src = prod.data() + co * g.cols() + b * plane;
      T* dst = out.data() + (b * g.cout + co) * plane;
      for (std::int64_t p = 0; p < plane; ++p) dst[p] = src[p] + bval;
    }
  }

  auto in_impl = input.impl();
  auto k_impl = kernel.impl();
  auto b_impl = bias.defined() ? bias.impl() : nullptr;
  return MakeOpResult<T>(
      "conv2d", {g.batch, g.cout, g.ho, g.wo}, std::move(out),
      {&input, &kernel, &bias},
      [g, in_impl, k_impl, b_impl, plane](std::span<const T> gout) {
        // Regroup dOut to [Cout, B*plane] to match the im2col layout.
        RowMat<T> dout(g.cout, g.cols());
        for (std::int64_t b = 0; b < g.batch; ++b) {
          for (std::int64_t co = 0; co < g.cout; ++co) {
            std::copy_n(gout.data() + (b * g.cout + co) * plane, plane,
                        dout.data() + co * g.cols() + b * plane);
          }
        }
        if (b_impl && b_impl->requires_grad) {
          std::vector<T> gb(static_cast<std::size_t>(g.cout));
          for (std::int64_t co = 0; co < g.cout; ++co) {
            T s = 0;
            const T* row = dout.data() + co * g.cols();
            for (std::int64_t i = 0; i < g.cols(); ++i) s += row[i];
            gb[co] = s;
          }
          AccumulateGrad<T>(*b_impl, gb);
        }
        const bool need_k = k_impl->requires_grad;
        const bool need_in = in_impl->requires_grad;
        if (!need_k && !need_in) return;
        if (need_k) {
          std::vector<T> col(static_cast<std::size_t>(g.rows() * g.cols()));
          Im2Col(g, in_impl->data.data(), col.data());
          RowMat<T> gk = dout * ConstMapMat<T>(col.data(), g.rows(), g.cols())
                                    .transpose();
          AccumulateGrad<T>(*k_impl, std::span<const T>(gk.data(), gk.size()));
        }
        if (need_in) {
          RowMat<T> dcol =
              ConstMapMat<T>(k_impl->data.data(), g.cout, g.rows()).transpose() *
              dout;
          std::vector<T> gin(in_impl->data.size(), T(0));
          Col2Im(g, dcol.data(), gin.data());
          AccumulateGrad<T>(*in_impl, gin);
        }
      });
}

template <typename T>
BasicTensor<T> MaxPool2(const BasicTensor<T>& input) {
  RequireRank(input, 4, "maxpool2", "input");
  const std::int64_t bc = input.dim(0) * input.dim(1);
  const std::int64_t h = input.dim(2), w = input.dim(3);
  if (h % 2 || w % 2) {
    throw GeometryError("maxpool2: spatial size must be even, got " +
                        ShapeString(input.shape()));
  }
  const std::int64_t ho = h / 2, wo = w / 2;
  std::vector<T> out(static_cast<std::size_t>(bc * ho * wo));
  std::vector<std::int64_t> arg(out.size());
  const T* x = input.data().data();
  for (std::int64_t p = 0; p < bc; ++p) {
    for (std::int64_t i = 0; i < ho; ++i) {
      for (std::int64_t j = 0; j < wo; ++j) {
        const std::int64_t base = p * h * w + 2 * i * w + 2 * j;
        const std::int64_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::int64_t best = cand[0];
        for (int t = 1; t < 4; ++t) {
          if (x[cand[t]] > x[best]) best = cand[t];
        }
        const std::int64_t o = (p * ho + i) * wo + j;
        out[o] = x[best];
        arg[o] = best;
      }
    }
  }
  auto in_impl = input.impl();
  return MakeOpResult<T>(
      "maxpool2", {input.dim(0), input.dim(1), ho, wo}, std::move(out), {&input},
      [in_impl, arg = std::move(arg)](std::span<const T> gout) {
        std::vector<T> gin(in_impl->data.size(), T(0));
        for (std::size_t o = 0; o < arg.size(); ++o) gin[arg[o]] += gout[o];
        AccumulateGrad<T>(*in_impl, gin);
      });
}

template <typename T>
BasicTensor<T> UpsampleNearest2(const BasicTensor<T>& input) {
  RequireRank(input, 4, "upsample_nearest2", "input");
  const std::int64_t bc = input.dim(0) * input.dim(1);
  const std::int64_t h = input.dim(2), w = input.dim(3);
  const std::int64_t wo = 2 * w;
  std::vector<T> out(static_cast<std::size_t>(bc * 4 * h * w));
  const T* x = input.data().data();
  for (std::int64_t p = 0; p < bc; ++p) {
    for (std::int64_t i = 0; i < 2 * h; ++i) {
      for (std::int64_t j = 0; j < wo; ++j) {
        out[(p * 2 * h + i) * wo + j] = x[(p * h + i / 2) * w + j / 2];
      }
    }
  }
  auto in_impl = input.impl();
  return MakeOpResult<T>(
      "upsample_nearest2", {input.dim(0), input.dim(1), 2 * h, wo},
      std::move(out), {&input}, [in_impl, bc, h, w, wo](std::span<const T> gout) {
        std::vector<T> gin(in_impl->data.size(), T(0));
        for (std::int64_t p = 0; p < bc; ++p) {
          for (std::int64_t i = 0; i < 2 * h; ++i) {
            for (std::int64_t j = 0; j < wo; ++j) {
              gin[(p * h + i / 2) * w + j / 2] += gout[(p * 2 * h + i) * wo + j];
            }
          }
        }
        AccumulateGrad<T>(*in_impl, gin);
      });
}

template <typename T>
BasicTensor<T> MatMulBias(const BasicTensor<T>& input,
                          const BasicTensor<T>& weight,
                          const BasicTensor<T>& bias) {
  RequireRank(input, 2, "matmul_bias", "input");
  RequireRank(weight, 2, "matmul_bias", "weight");
  RequireRank(bias, 1, "matmul_bias", "bias");
  const std::int64_t b = input.dim(0), n = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != n || bias.dim(0) != m) {
    throw ValidationError("matmul_bias: dimension mismatch input " +
                          ShapeString(input.shape()) + ", weight " +
                          ShapeString(weight.shape()) + ", bias " +
                          ShapeString(bias.shape()));
  }
  RowMat<T> y = ConstMapMat<T>(input.data().data(), b, n) *
                ConstMapMat<T>(weight.data().data(), m, n).transpose();
  for (std::int64_t i = 0; i < b; ++i) {
    for (std::int64_t j = 0; j < m; ++j) y(i, j) += bias.data()[j];
  }
  std::vector<T> out(y.data(), y.data() + y.size());
  auto x_impl = input.impl(), w_impl = weight.impl(), b_impl = bias.impl();
  return MakeOpResult<T>(
      "matmul_bias", {b, m}, std::move(out), {&input, &weight, &bias},
      [x_impl, w_impl, b_impl, b, n, m](std::span<const T> gout) {
        ConstMapMat<T> dy(gout.data(), b, m);
        if (x_impl->requires_grad) {
          RowMat<T> dx = dy * ConstMapMat<T>(w_impl->data.data(), m, n);
          AccumulateGrad<T>(*x_impl, std::span<const T>(dx.data(), dx.size()));
        }
        if (w_impl->requires_grad) {
          RowMat<T> dw = dy.transpose() * ConstMapMat<T>(x_impl->data.data(), b, n);
          AccumulateGrad<T>(*w_impl, std::span<const T>(dw.data(), dw.size()));
        }
        if (b_impl->requires_grad) {
          std::vector<T> db(static_cast<std::size_t>(m), T(0));
          for (std::int64_t i = 0; i < b; ++i) {
            for (std::int64_t j = 0; j < m; ++j) db[j] += dy(i, j);
          }
          AccumulateGrad<T>(*b_impl, db);
        }
      });
}

template <typename T>
BasicTensor<T> Relu(const BasicTensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  auto in_impl = input.impl();
  return MakeOpResult<T>("relu", input.shape(), std::move(out), {&input},
                         [in_impl](std::span<const T> gout) {
                           std::vector<T> gin(gout.size());
                           for (std::size_t i = 0; i < gin.size(); ++i) {
                             gin[i] = in_impl->data[i] > T(0) ? gout[i] : T(0);
                           }
                           AccumulateGrad<T>(*in_impl, gin);
                         });
}

template <typename T>
BasicTensor<T> Sigmoid(const BasicTensor<T>& input) {
  std::vector<T> out(input.data().begin(), input.data().end());
  for (auto& v : out) {
    v = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                  : std::exp(v) / (T(1) + std::exp(v));
  }
  auto in_impl = input.impl();
  std::vector<T> y = out;
  return MakeOpResult<T>("sigmoid", input.shape(), std::move(out), {&input},
                         [in_impl, y = std::move(y)](std::span<const T> gout) {
                           std::vector<T> gin(gout.size());
                           for (std::size_t i = 0; i < gin.size(); ++i) {
                             gin[i] = gout[i] * y[i] * (T(1) - y[i]);
                           }
                           AccumulateGrad<T>(*in_impl, gin);
                         });
}

template <typename T>
BasicTensor<T> BatchNormGrouped(const BasicTensor<T>& input,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta,
                                std::span<const std::int64_t> offsets,
                                BatchNormStats<T>& stats, Mode mode,
                                double momentum, double eps) {
  RequireRank(input, 4, "batchnorm", "input");
  const std::int64_t batch = input.dim(0), c = input.dim(1);
  const std::int64_t hw = input.dim(2) * input.dim(3);
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != c) {
    throw ValidationError("batchnorm: channel groups do not cover " +
                          std::to_string(c) + " channels");
  }
  const std::size_t groups = offsets.size() - 1;
  if (gamma.numel() != static_cast<std::int64_t>(groups) ||
      beta.numel() != static_cast<std::int64_t>(groups)) {
    throw ValidationError("batchnorm: expected " + std::to_string(groups) +
                          " affine parameters, got gamma " +
                          ShapeString(gamma.shape()) + " beta " +
                          ShapeString(beta.shape()));
  }
  if (stats.mean.size() != groups || stats.var.size() != groups) {
    throw ValidationError("batchnorm: running statistics have wrong size");
  }
  if (mode == Mode::kTrain && batch * hw < 2) {
    throw ValidationError("batchnorm: train mode needs at least 2 values per "
                          "channel, got B*H*W = " +
                          std::to_string(batch * hw));
  }

  const T* x = input.data().data();
  std::vector<T> out(input.data().size());
  std::vector<T> xhat(mode == Mode::kTrain ? out.size() : 0);
  std::vector<T> inv_std(groups);
  std::vector<std::int64_t> counts(groups);
  for (std::size_t f = 0; f < groups; ++f) {
    const std::int64_t c0 = offsets[f], c1 = offsets[f + 1];
    const std::int64_t n = batch * (c1 - c0) * hw;
    counts[f] = n;
    double mean, var;
    if (mode == Mode::kTrain) {
      double s = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* p = x + (b * c + c0) * hw;
        for (std::int64_t i = 0; i < (c1 - c0) * hw; ++i) s += p[i];
      }
      mean = s / static_cast<double>(n);
      double ss = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* p = x + (b * c + c0) * hw;
        for (std::int64_t i = 0; i < (c1 - c0) * hw; ++i) {
          const double d = p[i] - mean;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(n);
      const double unbiased = n > 1 ? ss / static_cast<double>(n - 1) : var;
      stats.mean[f] = static_cast<T>((1.0 - momentum) * stats.mean[f] +
                                     momentum * mean);
      stats.var[f] = static_cast<T>((1.0 - momentum) * stats.var[f] +
                                    momentum * unbiased);
    } else {
      mean = stats.mean[f];
      var = stats.var[f];
    }
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[f] = static_cast<T>(istd);
    const double gm = gamma.data()[f], bt = beta.data()[f];
    for (std::int64_t b = 0; b < batch; ++b) {
      const std::int64_t base = (b * c + c0) * hw;
      for (std::int64_t i = 0; i < (c1 - c0) * hw; ++i) {
        const double xh = (x[base + i] - mean) * istd;
        if (mode == Mode::kTrain) xhat[base + i] = static_cast<T>(xh);
        out[base + i] = static_cast<T>(gm * xh + bt);
      }
    }
  }

  auto x_impl = input.impl(), g_impl = gamma.impl(), b_impl = beta.impl();
  std::vector<std::int64_t> offs(offsets.begin(), offsets.end());
  if (mode == Mode::kEval) {
    std::vector<T> mean(stats.mean);
    return MakeOpResult<T>(
        "batchnorm_eval", input.shape(), std::move(out), {&input, &gamma, &beta},
        [=](std::span<const T> gout) {
          std::vector<T> gx(x_impl->data.size());
          std::vector<T> gg(groups, T(0)), gb(groups, T(0));
          for (std::size_t f = 0; f < groups; ++f) {
            const T gm = g_impl->data[f];
            double sg = 0, sb = 0;
            for (std::int64_t b = 0; b < batch; ++b) {
              const std::int64_t base = (b * c + offs[f]) * hw;
              for (std::int64_t i = 0; i < (offs[f + 1] - offs[f]) * hw; ++i) {
                const T xh = (x_impl->data[base + i] - mean[f]) * inv_std[f];
                gx[base + i] = gout[base + i] * gm * inv_std[f];
                sg += static_cast<double>(gout[base + i]) * xh;
                sb += gout[base + i];
              }
            }
            gg[f] = static_cast<T>(sg);
            gb[f] = static_cast<T>(sb);
          }
          if (x_impl->requires_grad) AccumulateGrad<T>(*x_impl, gx);
          if (g_impl->requires_grad) AccumulateGrad<T>(*g_impl, gg);
          if (b_impl->requires_grad) AccumulateGrad<T>(*b_impl, gb);
        });
  }
  return MakeOpResult<T>(
      "batchnorm_train", input.shape(), std::move(out), {&input, &gamma, &beta},
      [=, xhat = std::move(xhat)](std::span<const T> gout) {
        std::vector<T> gx(x_impl->data.size());
        std::vector<T> gg(groups, T(0)), gb(groups, T(0));
        for (std::size_t f = 0; f < groups; ++f) {
          const std::int64_t len = (offs[f + 1] - offs[f]) * hw;
          double sdy = 0, sdy_xh = 0;
          for (std::int64_t b = 0; b < batch; ++b) {
            const std::int64_t base = (b * c + offs[f]) * hw;
            for (std::int64_t i = 0; i < len; ++i) {
              sdy += gout[base + i];
              sdy_xh += static_cast<double>(gout[base + i]) * xhat[base + i];
            }
          }
          gg[f] = static_cast<T>(sdy_xh);
          gb[f] = static_cast<T>(sdy);
          const double n = static_cast<double>(counts[f]);
          const double scale = g_impl->data[f] * inv_std[f] / n;
          for (std::int64_t b = 0; b < batch; ++b) {
            const std::int64_t base = (b * c + offs[f]) * hw;
            for (std::int64_t i = 0; i < len; ++i) {
              gx[base + i] = static_cast<T>(
                  scale * (n * gout[base + i] - sdy - xhat[base + i] * sdy_xh));
            }
          }
        }
        if (x_impl->requires_grad) AccumulateGrad<T>(*x_impl, gx);
        if (g_impl->requires_grad) AccumulateGrad<T>(*g_impl, gg);
        if (b_impl->requires_grad) AccumulateGrad<T>(*b_impl, gb);
      });
}

template <typename T>
BasicTensor<T> BatchNormChannel(const BasicTensor<T>& input,
                                const BasicTensor<T>& gamma,
                                const BasicTensor<T>& beta,
                                BatchNormStats<T>& stats, Mode mode,
                                double momentum, double eps) {
  RequireRank(input, 4, "batchnorm_channel", "input");
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(input.dim(1)) + 1);
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    offsets[i] = static_cast<std::int64_t>(i);
  }
  return BatchNormGrouped(input, gamma, beta, offsets, stats, mode, momentum,
                          eps);
}

template <typename T>
BasicTensor<T> SoftmaxCrossEntropy(const BasicTensor<T>& logits,
                                   std::span<const int> labels) {
  RequireRank(logits, 2, "softmax_cross_entropy", "logits");
  const std::int64_t b = logits.dim(0), k = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b) {
    throw ValidationError("softmax_cross_entropy: " +
                          std::to_string(labels.size()) + " labels for batch " +
                          std::to_string(b));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw IndexError("softmax_cross_entropy: label " +
                       std::to_string(labels[i]) + " at position " +
                       std::to_string(i) + " outside [0," + std::to_string(k) +
                       ")");
    }
  }
  const T* z = logits.data().data();
  std::vector<T> prob(static_cast<std::size_t>(b * k));
  double loss = 0;
  for (std::int64_t i = 0; i < b; ++i) {
    const T* row = z + i * k;
    const T mx = *std::max_element(row, row + k);
    double se = 0;
    for (std::int64_t j = 0; j < k; ++j) se += std::exp(double(row[j] - mx));
    const double lse = std::log(se) + mx;
    loss += lse - row[labels[i]];
    for (std::int64_t j = 0; j < k; ++j) {
      prob[i * k + j] = static_cast<T>(std::exp(double(row[j]) - lse));
    }
  }
  loss /= static_cast<double>(b);
  std::vector<int> lab(labels.begin(), labels.end());
  auto z_impl = logits.impl();
  return MakeOpResult<T>(
      "softmax_cross_entropy", {}, {static_cast<T>(loss)}, {&logits},
      [z_impl, prob = std::move(prob), lab = std::move(lab), b,
       k](std::span<const T> gout) {
        std::vector<T> g(prob.size());
        const T s = gout[0] / static_cast<T>(b);
        for (std::int64_t i = 0; i < b; ++i) {
          for (std::int64_t j = 0; j < k; ++j) {
            g[i * k + j] = s * (prob[i * k + j] - (j == lab[i] ? T(1) : T(0)));
          }
        }
        AccumulateGrad<T>(*z_impl, g);
      });
}

template <typename T>
BasicTensor<T> BceWithLogits(const BasicTensor<T>& logits,
                             const BasicTensor<T>& targets) {
  RequireSameShape(logits, targets, "bce_with_logits");
  const auto z = logits.data();
  const auto t = targets.data();
  double loss = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (t[i] != T(0) && t[i] != T(1)) {
      throw ValidationError("bce_with_logits: target at flat index " +
                            std::to_string(i) + " is " + std::to_string(t[i]) +
                            ", expected 0 or 1");
    }
    const double zi = z[i];
    loss += std::max(zi, 0.0) - zi * t[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  const double n = static_cast<double>(z.size());
  auto z_impl = logits.impl(), t_impl = targets.impl();
  return MakeOpResult<T>(
      "bce_with_logits", {}, {static_cast<T>(loss / n)}, {&logits},
      [z_impl, t_impl, n](std::span<const T> gout) {
        std::vector<T> g(z_impl->data.size());
        const double s = gout[0] / n;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double zi = z_impl->data[i];
          const double sig = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi))
                                     : std::exp(zi) / (1.0 + std::exp(zi));
          g[i] = static_cast<T>(s * (sig - t_impl->data[i]));
        }
        AccumulateGrad<T>(*z_impl, g);
      });
}

template <typename T>
BasicTensor<T> Add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSameShape(a, b, "add");
  std::vector<T> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return MakeOpResult<T>("add", a.shape(), std::move(out), {&a, &b},
                         [ai, bi](std::span<const T> g) {
                           if (ai->requires_grad) AccumulateGrad<T>(*ai, g);
                           if (bi->requires_grad) AccumulateGrad<T>(*bi, g);
                         });
}

template <typename T>
BasicTensor<T> Mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  RequireSameShape(a, b, "mul");
  std::vector<T> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
  auto ai = a.impl(), bi = b.impl();
  return MakeOpResult<T>("mul", a.shape(), std::move(out), {&a, &b},
                         [ai, bi](std::span<const T> g) {
                           std::vector<T> tmp(g.size());
                           if (ai->requires_grad) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               tmp[i] = g[i] * bi->data[i];
                             AccumulateGrad<T>(*ai, tmp);
                           }
                           if (bi->requires_grad) {
                             for (std::size_t i = 0; i < g.size(); ++i)
                               tmp[i] = g[i] * ai->data[i];
                             AccumulateGrad<T>(*bi, tmp);
                           }
                         });
}

template <typename T>
BasicTensor<T> Scale(const BasicTensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  auto ai = a.impl();
  return MakeOpResult<T>("scale", a.shape(), std::move(out), {&a},
                         [ai, factor](std::span<const T> g) {
                           std::vector<T> tmp(g.begin(), g.end());
                           for (auto& v : tmp) v *= factor;
                           AccumulateGrad<T>(*ai, tmp);
                         });
}

template <typename T>
BasicTensor<T> Sum(const BasicTensor<T>& a) {
  double s = 0;
  for (T v : a.data()) s += v;
  auto ai = a.impl();
  return MakeOpResult<T>("sum", {}, {static_cast<T>(s)}, {&a},
                         [ai](std::span<const T> g) {
                           std::vector<T> tmp(ai->data.size(), g[0]);
                           AccumulateGrad<T>(*ai, tmp);
                         });
}

template <typename T>
BasicTensor<T> MulConstant(const BasicTensor<T>& a, std::vector<T> mask) {
  if (static_cast<std::int64_t>(mask.size()) != a.numel()) {
    throw ValidationError("mul_constant: mask length " +
                          std::to_string(mask.size()) + " for tensor " +
                          ShapeString(a.shape()));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  auto ai = a.impl();
  return MakeOpResult<T>("mul_constant", a.shape(), std::move(out), {&a},
                         [ai, mask = std::move(mask)](std::span<const T> g) {
                           std::vector<T> tmp(g.size());
                           for (std::size_t i = 0; i < g.size(); ++i)
                             tmp[i] = g[i] * mask[i];
                           AccumulateGrad<T>(*ai, tmp);
                         });
}

template <typename T>
BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw ValidationError("concat_channels: no inputs");
  for (const auto& p : parts) RequireRank(p, 4, "concat_channels", "input");
  const std::int64_t batch = parts[0].dim(0);
  const std::int64_t h = parts[0].dim(2), w = parts[0].dim(3);
  std::int64_t ctot = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != batch || p.dim(2) != h || p.dim(3) != w) {
      throw ValidationError("concat_channels: incompatible shapes " +
                            ShapeString(parts[0].shape()) + " and " +
                            ShapeString(p.shape()));
    }
    ctot += p.dim(1);
  }
  const std::int64_t hw = h * w;
  std::vector<T> out(static_cast<std::size_t>(batch * ctot * hw));
  std::vector<std::int64_t> offs{0};
  for (const auto& p : parts) offs.push_back(offs.back() + p.dim(1));
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::int64_t ck = parts[k].dim(1);
    for (std::int64_t b = 0; b < batch; ++b) {
      std::copy_n(parts[k].data().data() + b * ck * hw, ck * hw,
                  out.data() + (b * ctot + offs[k]) * hw);
    }
  }
  std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return MakeOpResult<T>(
      "concat_channels", {batch, ctot, h, w}, std::move(out), parts,
      [impls, offs, batch, ctot, hw](std::span<const T> g) {
        for (std::size_t k = 0; k < impls.size(); ++k) {
          if (!impls[k]->requires_grad) continue;
          const std::int64_t ck = offs[k + 1] - offs[k];
          std::vector<T> tmp(static_cast<std::size_t>(batch * ck * hw));
          for (std::int64_t b = 0; b < batch; ++b) {
            std::copy_n(g.data() + (b * ctot + offs[k]) * hw, ck * hw,
                        tmp.data() + b * ck * hw);
          }
          AccumulateGrad<T>(*impls[k], tmp);
        }
      });
}

template <typename T>
BasicTensor<T> GlobalAvgPool(const BasicTensor<T>& input) {
  RequireRank(input, 4, "global_avg_pool", "input");
  const std::int64_t bc = input.dim(0) * input.dim(1);
  const std::int64_t hw = input.dim(2) * input.dim(3);
  std::vector<T> out(static_cast<std::size_t>(bc));
  for (std::int64_t p = 0; p < bc; ++p) {
    double s = 0;
    for (std::int64_t i = 0; i < hw; ++i) s += input.data()[p * hw + i];
    out[p] = static_cast<T>(s / static_cast<double>(hw));
  }
  auto ai = input.impl();
  return MakeOpResult<T>("global_avg_pool", {input.dim(0), input.dim(1)},
                         std::move(out), {&input},
                         [ai, bc, hw](std::span<const T> g) {
                           std::vector<T> tmp(ai->data.size());
                           const T inv = T(1) / static_cast<T>(hw);
                           for (std::int64_t p = 0; p < bc; ++p) {
                             std::fill_n(tmp.data() + p * hw, hw, g[p] * inv);
                           }
                           AccumulateGrad<T>(*ai, tmp);
                         });
}

template <typename T>
BasicTensor<T> GroupMean(const BasicTensor<T>& input,
                         std::span<const std::int64_t> offsets) {
  RequireRank(input, 4, "group_mean", "input");
  const std::int64_t batch = input.dim(0), c = input.dim(1);
  const std::int64_t hw = input.dim(2) * input.dim(3);
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != c) {
    throw ValidationError("group_mean: groups do not cover the channels");
  }
  const std::int64_t groups = static_cast<std::int64_t>(offsets.size()) - 1;
  std::vector<std::int64_t> offs(offsets.begin(), offsets.end());
  std::vector<T> out(static_cast<std::size_t>(batch * groups * hw), T(0));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t f = 0; f < groups; ++f) {
      T* dst = out.data() + (b * groups + f) * hw;
      const T inv = T(1) / static_cast<T>(offs[f + 1] - offs[f]);
      for (std::int64_t ch = offs[f]; ch < offs[f + 1]; ++ch) {
        const T* src = input.data().data() + (b * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) dst[i] += src[i];
      }
      for (std::int64_t i = 0; i < hw; ++i) dst[i] *= inv;
    }
  }
  auto ai = input.impl();
  return MakeOpResult<T>(
      "group_mean", {batch, groups, input.dim(2), input.dim(3)}, std::move(out),
      {&input}, [ai, offs, batch, c, groups, hw](std::span<const T> g) {
        std::vector<T> tmp(ai->data.size());
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t f = 0; f < groups; ++f) {
            const T inv = T(1) / static_cast<T>(offs[f + 1] - offs[f]);
            const T* src = g.data() + (b * groups + f) * hw;
            for (std::int64_t ch = offs[f]; ch < offs[f + 1]; ++ch) {
              T* dst = tmp.data() + (b * c + ch) * hw;
              for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i] * inv;
            }
          }
        }
        AccumulateGrad<T>(*ai, tmp);
      });
}

template <typename T>
BasicTensor<T> RepeatGroups(const BasicTensor<T>& values,
                            std::span<const std::int64_t> offsets) {
  RequireRank(values, 1, "repeat_groups", "values");
  if (offsets.size() != static_cast<std::size_t>(values.dim(0)) + 1 ||
      offsets.front() != 0) {
    throw ValidationError("repeat_groups: offsets do not match " +
                          ShapeString(values.shape()));
  }
  std::vector<std::int64_t> offs(offsets.begin(), offsets.end());
  std::vector<T> out(static_cast<std::size_t>(offs.back()));
  for (std::size_t f = 0; f + 1 < offs.size(); ++f) {
    std::fill(out.begin() + offs[f], out.begin() + offs[f + 1],
              values.data()[f]);
  }
  auto ai = values.impl();
  return MakeOpResult<T>("repeat_groups", {offs.back()}, std::move(out),
                         {&values}, [ai, offs](std::span<const T> g) {
                           std::vector<T> tmp(offs.size() - 1, T(0));
                           for (std::size_t f = 0; f + 1 < offs.size(); ++f) {
                             for (auto i = offs[f]; i < offs[f + 1]; ++i)
                               tmp[f] += g[i];
                           }
                           AccumulateGrad<T>(*ai, tmp);
                         });
}

template <typename T>
BasicTensor<T> Flatten(const BasicTensor<T>& input) {
  if (input.rank() < 2) {
    throw ValidationError("flatten: input must have a batch axis, got " +
                          ShapeString(input.shape()));
  }
  const std::int64_t b = input.dim(0);
  std::vector<T> out(input.data().begin(), input.data().end());
  auto ai = input.impl();
  return MakeOpResult<T>("flatten", {b, input.numel() / b}, std::move(out),
                         {&input}, [ai](std::span<const T> g) {
                           AccumulateGrad<T>(*ai, g);
                         });
}

#define EQSEG_INSTANTIATE(T)                                                   \
  template BasicTensor<T> Conv2d(const BasicTensor<T>&, const BasicTensor<T>&, \
                                 const BasicTensor<T>&, int, int);            \
  template BasicTensor<T> MaxPool2(const BasicTensor<T>&);                    \
  template BasicTensor<T> UpsampleNearest2(const BasicTensor<T>&);            \
  template BasicTensor<T> MatMulBias(const BasicTensor<T>&,                   \
                                     const BasicTensor<T>&,                   \
                                     const BasicTensor<T>&);                  \
  template BasicTensor<T> Relu(const BasicTensor<T>&);                        \
  template BasicTensor<T> Sigmoid(const BasicTensor<T>&);                     \
  template BasicTensor<T> BatchNormGrouped(                                   \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      std::span<const std::int64_t>, BatchNormStats<T>&, Mode, double,        \
      double);                                                                \
  template BasicTensor<T> BatchNormChannel(                                   \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
      BatchNormStats<T>&, Mode, double, double);                              \
  template BasicTensor<T> SoftmaxCrossEntropy(const BasicTensor<T>&,          \
                                              std::span<const int>);          \
  template BasicTensor<T> BceWithLogits(const BasicTensor<T>&,                \
                                        const BasicTensor<T>&);               \
  template BasicTensor<T> Add(const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> Mul(const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> Scale(const BasicTensor<T>&, T);                    \
  template BasicTensor<T> Sum(const BasicTensor<T>&);                         \
  template BasicTensor<T> MulConstant(const BasicTensor<T>&, std::vector<T>); \
  template BasicTensor<T> ConcatChannels(const std::vector<BasicTensor<T>>&); \
  template BasicTensor<T> GlobalAvgPool(const BasicTensor<T>&);               \
  template BasicTensor<T> GroupMean(const BasicTensor<T>&,                    \
                                    std::span<const std::int64_t>);           \
  template BasicTensor<T> RepeatGroups(const BasicTensor<T>&,                 \
                                       std::span<const std::int64_t>);        \
  template BasicTensor<T> Flatten(const BasicTensor<T>&);

EQSEG_INSTANTIATE(float)
EQSEG_INSTANTIATE(double)
#undef EQSEG_INSTANTIATE

}  // namespace eqseg::ops
