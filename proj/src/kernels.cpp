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

#include "eqseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "eqseg/error.hpp"

namespace eqseg {
namespace {

struct Cell {
  int u, v;  // x to the right, y up, origin at the grid center
};

// Position of (u, v) on its Chebyshev ring, counterclockwise from (m, 0).
int RingPosition(int u, int v, int m) {
  if (u == m && v >= 0) return v;
  if (v == m) return m + (m - u);
  if (u == -m) return 3 * m + (m - v);
  if (v == -m) return 5 * m + (u + m);
  return 7 * m + (v + m);  // right edge, v < 0
}

Cell RingCell(int t, int m) {
  t = ((t % (8 * m)) + 8 * m) % (8 * m);
  if (t <= m) return {m, t};
  if (t <= 3 * m) return {m - (t - m), m};
  if (t <= 5 * m) return {-m, m - (t - 3 * m)};
  if (t <= 7 * m) return {-m + (t - 5 * m), -m};
  return {m, -m + (t - 7 * m)};
}

void CheckKernelSize(int k) {
  if (k < 1 || k % 2 == 0) {
    throw ValidationError("kernel size must be a positive odd number, got " +
                          std::to_string(k));
  }
}

void CheckSameGroup(const FieldType& in, const FieldType& out) {
  if (!(in.group() == out.group())) {
    throw ValidationError("input field type over " + in.group().Name() +
                          " and output over " + out.group().Name());
  }
}

}  // namespace

GridAction KernelGridAction(const GroupSpec& group, const GroupElement& g,
                            int k) {
  CheckKernelSize(k);
  const int c = (k - 1) / 2;
  GridAction act;
  act.kernel_size = k;
  act.taps.resize(static_cast<std::size_t>(k * k));
  const double degrees = group.AngleDegrees(g);
  const double eighths = degrees / 45.0;
  const bool ring = std::abs(eighths - std::round(eighths)) < 1e-9;
  act.is_permutation = ring;
  const int steps = static_cast<int>(std::lround(eighths));
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      const int dst = a * k + b;
      const int u = b - c, v = c - a;
      if (ring) {
        // g^-1 p = F^s R^-r p
        Cell src{u, v};
        const int m = std::max(std::abs(u), std::abs(v));
        if (m > 0) src = RingCell(RingPosition(u, v, m) - steps * m, m);
        if (g.reflect) src.u = -src.u;
        act.taps[dst].push_back({(c - src.v) * k + (c + src.u), 1.0});
        continue;
      }
      double us = u * cs + v * sn;
      const double vs = -u * sn + v * cs;
      if (g.reflect) us = -us;
      const double col = c + us, row = c - vs;
      const double r0 = std::floor(row), c0 = std::floor(col);
      const double fr = row - r0, fc = col - c0;
      for (int da = 0; da < 2; ++da) {
        for (int db = 0; db < 2; ++db) {
          const int rr = static_cast<int>(r0) + da;
          const int cc = static_cast<int>(c0) + db;
          const double w = (da ? fr : 1 - fr) * (db ? fc : 1 - fc);
          if (rr < 0 || rr >= k || cc < 0 || cc >= k || w == 0.0) continue;
          act.taps[dst].push_back({rr * k + cc, w});
        }
      }
    }
  }
  return act;
}

std::vector<double> ReynoldsProject(std::span<const double> kernel,
                                    const FieldType& in_type,
                                    const FieldType& out_type, int k) {
  CheckSameGroup(in_type, out_type);
  CheckKernelSize(k);
  const int od = static_cast<int>(out_type.total_dim());
  const int id = static_cast<int>(in_type.total_dim());
  const int kk = k * k;
  if (kernel.size() != static_cast<std::size_t>(od * id * kk)) {
    throw ValidationError("reynolds_project: kernel has " +
                          std::to_string(kernel.size()) + " entries, expected " +
                          std::to_string(od * id * kk));
  }
  const GroupSpec& group = in_type.group();
  const Representation rin = in_type.AsRepresentation();
  const Representation rout = out_type.AsRepresentation();
  std::vector<double> acc(kernel.size(), 0.0);
  std::vector<double> moved(kernel.size());
  std::vector<double> tmp(static_cast<std::size_t>(od * id));
  for (const auto& g : group.elements()) {
    const GroupElement ginv = group.Inverse(g);
    // moved(x) = kappa(g x) = (T_{g^-1} kappa)(x)
    const GridAction act = KernelGridAction(group, ginv, k);
    std::fill(moved.begin(), moved.end(), 0.0);
    for (int ch = 0; ch < od * id; ++ch) {
      const double* src = kernel.data() + ch * kk;
      double* dst = moved.data() + ch * kk;
      for (int p = 0; p < kk; ++p) {
        double s = 0;
        for (const auto& [q, w] : act.taps[p]) s += w * src[q];
        dst[p] = s;
      }
    }
    const auto& mout_inv = rout.Matrix(ginv);
    const auto& min = rin.Matrix(g);
    for (int p = 0; p < kk; ++p) {
      // tmp = moved(p) * rho_in(g)
      for (int o = 0; o < od; ++o) {
        for (int j = 0; j < id; ++j) {
          double s = 0;
          for (int l = 0; l < id; ++l) {
            const double r = min[l * id + j];
            if (r != 0.0) s += moved[(o * id + l) * kk + p] * r;
          }
          tmp[o * id + j] = s;
        }
      }
      // acc += rho_out(g)^-1 * tmp
      for (int o = 0; o < od; ++o) {
        for (int l = 0; l < od; ++l) {
          const double r = mout_inv[o * od + l];
          if (r == 0.0) continue;
          for (int j = 0; j < id; ++j) {
            acc[(o * id + j) * kk + p] += r * tmp[l * id + j];
          }
        }
      }
    }
  }
  const double inv = 1.0 / group.size();
  for (auto& v : acc) v *= inv;
  return acc;
}

EquivariantBasis BuildBasis(const FieldType& in_type, const FieldType& out_type,
                            int k) {
  CheckSameGroup(in_type, out_type);
  CheckKernelSize(k);
  EquivariantBasis basis{in_type, out_type, k, 0, {}};
  const std::size_t n = static_cast<std::size_t>(basis.element_size());
  std::vector<std::vector<double>> projected;
  projected.reserve(n);
  double max_norm = 0;
  std::vector<double> unit(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    unit[j] = 1.0;
    projected.push_back(ReynoldsProject(unit, in_type, out_type, k));
    unit[j] = 0.0;
    double s = 0;
    for (double v : projected.back()) s += v * v;
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  const double drop = 1e-6 * max_norm;
  std::vector<std::vector<double>> accepted;
  for (auto& vec : projected) {
    // Two passes of modified Gram-Schmidt keep the Gram matrix at round-off.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : accepted) {
        double d = 0;
        for (std::size_t i = 0; i < n; ++i) d += q[i] * vec[i];
        for (std::size_t i = 0; i < n; ++i) vec[i] -= d * q[i];
      }
    }
    double s = 0;
    for (double v : vec) s += v * v;
    const double norm = std::sqrt(s);
    if (norm <= drop || norm == 0.0) continue;
    for (auto& v : vec) v /= norm;
    accepted.push_back(std::move(vec));
  }
  basis.count = static_cast<int>(accepted.size());
  basis.elements.reserve(basis.count * n);
  for (const auto& q : accepted) {
    basis.elements.insert(basis.elements.end(), q.begin(), q.end());
  }
  return basis;
}

std::shared_ptr<const EquivariantBasis> CachedPairBasis(
    const Representation& in_rep, const Representation& out_rep, int k) {
  const bool cacheable = in_rep.kind() != RepKind::kDirectSum &&
                         out_rep.kind() != RepKind::kDirectSum &&
                         in_rep.group() == out_rep.group();
  auto build = [&] {
    return std::make_shared<const EquivariantBasis>(
        BuildBasis(FieldType(in_rep.group(), {in_rep}),
                   FieldType(out_rep.group(), {out_rep}), k));
  };
  if (!cacheable) return build();
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const EquivariantBasis>> cache;
  const std::string key = in_rep.group().Name() + "|" + in_rep.Name() + "|" +
                          out_rep.Name() + "|" + std::to_string(k);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto basis = build();
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(basis)).first->second;
}

template <typename T>
BasicTensor<T> ExpandKernel(const EquivariantBasis& basis,
                            const BasicTensor<T>& coeffs) {
  if (coeffs.numel() != basis.count) {
    throw ValidationError("expand_kernel: " + std::to_string(coeffs.numel()) +
                          " coefficients for a basis of " +
                          std::to_string(basis.count));
  }
  auto shared = std::make_shared<const EquivariantBasis>(basis);
  const KernelBlock block{shared, 0, 0, 0};
  return AssembleKernel<T>(coeffs, std::span<const KernelBlock>(&block, 1),
                           basis.out_dim(), basis.in_dim(), basis.kernel_size);
}

template <typename T>
BasicTensor<T> AssembleKernel(const BasicTensor<T>& coeffs,
                              std::span<const KernelBlock> blocks,
                              std::int64_t cout, std::int64_t cin, int k) {
  const std::int64_t kk = static_cast<std::int64_t>(k) * k;
  std::int64_t needed = 0;
  for (const auto& blk : blocks) {
    if (blk.basis->kernel_size != k ||
        blk.out_offset + blk.basis->out_dim() > cout ||
        blk.in_offset + blk.basis->in_dim() > cin) {
      throw ValidationError("assemble_kernel: block does not fit a [" +
                            std::to_string(cout) + "," + std::to_string(cin) +
                            "," + std::to_string(k) + "," + std::to_string(k) +
                            "] kernel");
    }
    needed = std::max(needed, blk.coeff_offset + blk.basis->count);
  }
  if (coeffs.numel() < needed) {
    throw ValidationError("assemble_kernel: " + std::to_string(coeffs.numel()) +
                          " coefficients, blocks need " +
                          std::to_string(needed));
  }
  std::vector<T> out(static_cast<std::size_t>(cout * cin * kk), T(0));
  const T* c = coeffs.data().data();
  for (const auto& blk : blocks) {
    const auto& bs = *blk.basis;
    const std::int64_t od = bs.out_dim(), id = bs.in_dim();
    for (int i = 0; i < bs.count; ++i) {
      const T ci = c[blk.coeff_offset + i];
      if (ci == T(0)) continue;
      const double* e = bs.elements.data() + i * bs.element_size();
      for (std::int64_t o = 0; o < od; ++o) {
        for (std::int64_t j = 0; j < id; ++j) {
          T* dst = out.data() + ((blk.out_offset + o) * cin + blk.in_offset + j) * kk;
          const double* src = e + (o * id + j) * kk;
          for (std::int64_t p = 0; p < kk; ++p) dst[p] += ci * static_cast<T>(src[p]);
        }
      }
    }
  }
  std::vector<KernelBlock> blks(blocks.begin(), blocks.end());
  auto c_impl = coeffs.impl();
  return MakeOpResult<T>(
      "assemble_kernel", {cout, cin, k, k}, std::move(out), {&coeffs},
      [c_impl, blks = std::move(blks), cin, kk](std::span<const T> g) {
        std::vector<T> gc(c_impl->data.size(), T(0));
        for (const auto& blk : blks) {
          const auto& bs = *blk.basis;
          const std::int64_t od = bs.out_dim(), id = bs.in_dim();
          for (int i = 0; i < bs.count; ++i) {
            const double* e = bs.elements.data() + i * bs.element_size();
            double s = 0;
            for (std::int64_t o = 0; o < od; ++o) {
              for (std::int64_t j = 0; j < id; ++j) {
                const T* src =
                    g.data() + ((blk.out_offset + o) * cin + blk.in_offset + j) * kk;
                const double* be = e + (o * id + j) * kk;
                for (std::int64_t p = 0; p < kk; ++p) s += be[p] * src[p];
              }
            }
            gc[blk.coeff_offset + i] += static_cast<T>(s);
          }
        }
        AccumulateGrad<T>(*c_impl, gc);
      });
}

template BasicTensor<float> ExpandKernel(const EquivariantBasis&,
                                         const BasicTensor<float>&);
template BasicTensor<double> ExpandKernel(const EquivariantBasis&,
                                          const BasicTensor<double>&);
template BasicTensor<float> AssembleKernel(const BasicTensor<float>&,
                                           std::span<const KernelBlock>,
                                           std::int64_t, std::int64_t, int);
template BasicTensor<double> AssembleKernel(const BasicTensor<double>&,
                                            std::span<const KernelBlock>,
                                            std::int64_t, std::int64_t, int);

}  // namespace eqseg
