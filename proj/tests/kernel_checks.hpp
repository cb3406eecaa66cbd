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

// Constraint helpers shared by the kernel tests and the acceptance run.

#ifndef EQSEG_TESTS_KERNEL_CHECKS_HPP_
#define EQSEG_TESTS_KERNEL_CHECKS_HPP_

#include <span>
#include <vector>

#include "eqseg/group.hpp"
#include "eqseg/kernels.hpp"
#include "kernel_oracle.hpp"

namespace eqseg::testing {

inline FieldType MakeType(const GroupSpec& g, const std::vector<OracleField>& fields) {
  std::vector<Representation> reps;
  for (const auto& f : fields) {
    reps.push_back(f.regular ? Representation::Regular(g) : Representation::Trivial(g));
  }
  return FieldType(g, reps);
}

// rho_out(g) (T_g kappa) rho_in(g)^-1 with the library's grid action.
inline std::vector<double> ConstraintMap(std::span<const double> kappa, const FieldType& in,
                                  const FieldType& out, const GroupElement& g,
                                  int k) {
  const auto& G = in.group();
  const auto act = KernelGridAction(G, g, k);
  const auto ro = out.AsRepresentation().Matrix(g);
  const auto ri_inv = in.AsRepresentation().Matrix(G.Inverse(g));
  const auto dout = out.total_dim(), din = in.total_dim();
  const int kk = k * k;
  std::vector<double> moved(kappa.size(), 0.0);
  for (std::int64_t oc = 0; oc < dout * din; ++oc)
    for (int p = 0; p < kk; ++p)
      for (auto [src, w] : act.taps[p]) moved[oc * kk + p] += w * kappa[oc * kk + src];
  std::vector<double> res(kappa.size(), 0.0);
  for (std::int64_t o = 0; o < dout; ++o)
    for (std::int64_t c = 0; c < din; ++c)
      for (int p = 0; p < kk; ++p) {
        double acc = 0;
        for (std::int64_t o2 = 0; o2 < dout; ++o2) {
          const double a = ro[o * dout + o2];
          if (a == 0) continue;
          for (std::int64_t c2 = 0; c2 < din; ++c2) {
            const double b = ri_inv[c2 * din + c];
            if (b == 0) continue;
            acc += a * moved[(o2 * din + c2) * kk + p] * b;
          }
        }
        res[(o * din + c) * kk + p] = acc;
      }
  return res;
}

}  // namespace eqseg::testing

#endif  // EQSEG_TESTS_KERNEL_CHECKS_HPP_
