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

#include "eqseg/group.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "eqseg/error.hpp"

namespace eqseg {
namespace {

int Mod(int a, int n) { return ((a % n) + n) % n; }

std::vector<std::int64_t> OffsetsOf(const std::vector<Representation>& fields) {
  std::vector<std::int64_t> offs{0};
  for (const auto& f : fields) offs.push_back(offs.back() + f.dim());
  return offs;
}

// Reduces an angle to [0, 360) and reports whether it is a multiple of 90.
bool QuarterTurns(double degrees, int* quarters) {
  const double q = degrees / 90.0;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9) return false;
  *quarters = Mod(static_cast<int>(r), 4);
  return true;
}

template <typename T>
void RequireImage(const BasicTensor<T>& x, const char* op) {
  if (!x.defined() || x.rank() != 4) {
    throw ValidationError(std::string(op) + ": expected [B,C,H,W], got " +
                          ShapeString(x.shape()));
  }
}

// out(p) = in(F^reflect R^-quarters p) on doubled integer coordinates.
template <typename T>
BasicTensor<T> ExactResample(const BasicTensor<T>& x, int quarters,
                             bool reflect) {
  const std::int64_t bc = x.dim(0) * x.dim(1);
  const std::int64_t h = x.dim(2), w = x.dim(3);
  const std::int64_t ho = quarters % 2 ? w : h;
  const std::int64_t wo = quarters % 2 ? h : w;
  std::vector<std::int64_t> src(static_cast<std::size_t>(ho * wo));
  for (std::int64_t i = 0; i < ho; ++i) {
    for (std::int64_t j = 0; j < wo; ++j) {
      std::int64_t u = 2 * j - (wo - 1);
      std::int64_t v = (ho - 1) - 2 * i;
      for (int q = 0; q < quarters; ++q) {  // rotate clockwise by 90
        const std::int64_t t = u;
        u = v;
        v = -t;
      }
      if (reflect) u = -u;
      const std::int64_t col = (u + w - 1) / 2;
      const std::int64_t row = (h - 1 - v) / 2;
      src[i * wo + j] = row * w + col;
    }
  }
  std::vector<T> out(static_cast<std::size_t>(bc * ho * wo));
  const T* in = x.data().data();
  for (std::int64_t p = 0; p < bc; ++p) {
    const T* plane = in + p * h * w;
    T* dst = out.data() + p * ho * wo;
    for (std::int64_t k = 0; k < ho * wo; ++k) dst[k] = plane[src[k]];
  }
  return BasicTensor<T>({x.dim(0), x.dim(1), ho, wo}, std::move(out));
}

template <typename T>
BasicTensor<T> InterpolatedResample(const BasicTensor<T>& x, double degrees,
                                    bool reflect, bool nearest) {
  const std::int64_t bc = x.dim(0) * x.dim(1);
  const std::int64_t h = x.dim(2), w = x.dim(3);
  const double th = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const double ch = (h - 1) / 2.0, cw = (w - 1) / 2.0;
  struct Tap {
    std::int64_t idx[4];
    double wt[4];
  };
  std::vector<Tap> taps(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < h; ++i) {
    for (std::int64_t j = 0; j < w; ++j) {
      const double u = j - cw, v = ch - i;
      double us = u * c + v * s;
      const double vs = -u * s + v * c;
      if (reflect) us = -us;
      const double col = cw + us, row = ch - vs;
      Tap& tap = taps[i * w + j];
      for (int t = 0; t < 4; ++t) {
        tap.idx[t] = -1;
        tap.wt[t] = 0;
      }
      if (nearest) {
        const auto r = static_cast<std::int64_t>(std::lround(row));
        const auto q = static_cast<std::int64_t>(std::lround(col));
        if (r >= 0 && r < h && q >= 0 && q < w) {
          tap.idx[0] = r * w + q;
          tap.wt[0] = 1;
        }
        continue;
      }
      const double r0 = std::floor(row), c0 = std::floor(col);
      const double fr = row - r0, fc = col - c0;
      const std::int64_t rr[2] = {static_cast<std::int64_t>(r0),
                                  static_cast<std::int64_t>(r0) + 1};
      const std::int64_t cc[2] = {static_cast<std::int64_t>(c0),
                                  static_cast<std::int64_t>(c0) + 1};
      const double wr[2] = {1 - fr, fr}, wc[2] = {1 - fc, fc};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          if (rr[a] < 0 || rr[a] >= h || cc[b] < 0 || cc[b] >= w) continue;
          tap.idx[a * 2 + b] = rr[a] * w + cc[b];
          tap.wt[a * 2 + b] = wr[a] * wc[b];
        }
      }
    }
  }
  std::vector<T> out(static_cast<std::size_t>(bc * h * w));
  const T* in = x.data().data();
  for (std::int64_t p = 0; p < bc; ++p) {
    const T* plane = in + p * h * w;
    T* dst = out.data() + p * h * w;
    for (std::int64_t k = 0; k < h * w; ++k) {
      double acc = 0;
      for (int t = 0; t < 4; ++t) {
        if (taps[k].idx[t] >= 0) acc += taps[k].wt[t] * plane[taps[k].idx[t]];
      }
      dst[k] = static_cast<T>(acc);
    }
  }
  return BasicTensor<T>(x.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> Resample(const BasicTensor<T>& x, double degrees, bool reflect,
                        bool nearest) {
  int quarters = 0;
  if (QuarterTurns(degrees, &quarters)) {
    return ExactResample(x, quarters, reflect);
  }
  return InterpolatedResample(x, degrees, reflect, nearest);
}

}  // namespace

GroupSpec GroupSpec::Make(GroupKind kind, int n) {
  if (n < 1) {
    throw ValidationError("group order must be >= 1, got " + std::to_string(n));
  }
  std::vector<GroupElement> elements;
  const int flips = kind == GroupKind::kDihedral ? 2 : 1;
  for (int s = 0; s < flips; ++s) {
    for (int r = 0; r < n; ++r) elements.push_back({r, s == 1});
  }
  return GroupSpec(kind, n, std::move(elements));
}

bool GroupSpec::Contains(const GroupElement& g) const {
  return g.rotation >= 0 && g.rotation < n_ &&
         (!g.reflect || kind_ == GroupKind::kDihedral);
}

int GroupSpec::IndexOf(const GroupElement& g) const {
  if (!Contains(g)) {
    throw ValidationError("element (r=" + std::to_string(g.rotation) +
                          ", reflect=" + std::to_string(g.reflect) +
                          ") not in " + Name());
  }
  return g.rotation + (g.reflect ? n_ : 0);
}

GroupElement GroupSpec::Compose(const GroupElement& a,
                                const GroupElement& b) const {
  // R^a F^s R^b F^t = R^(a + (-1)^s b) F^(s xor t)
  const int r = a.reflect ? a.rotation - b.rotation : a.rotation + b.rotation;
  return {Mod(r, n_), a.reflect != b.reflect};
}

GroupElement GroupSpec::Inverse(const GroupElement& g) const {
  if (g.reflect) return g;  // reflections are involutions
  return {Mod(-g.rotation, n_), false};
}

GroupElement GroupSpec::Rotation(double degrees) const {
  const double steps = degrees * n_ / 360.0;
  const double r = std::round(steps);
  if (std::abs(steps - r) > 1e-9) {
    throw ValidationError("angle " + std::to_string(degrees) +
                          " is not an element of " + Name());
  }
  return {Mod(static_cast<int>(r), n_), false};
}

double GroupSpec::AngleDegrees(const GroupElement& g) const {
  return 360.0 * g.rotation / n_;
}

bool GroupSpec::IsQuarterTurn(const GroupElement& g) const {
  return (4 * g.rotation) % n_ == 0;
}

std::string GroupSpec::Name() const {
  return (kind_ == GroupKind::kCyclic ? "C" : "D") + std::to_string(n_);
}

Representation Representation::Trivial(const GroupSpec& group) {
  std::vector<std::vector<double>> mats(group.size(), std::vector<double>{1.0});
  return Representation(group, 1, RepKind::kTrivial, std::move(mats));
}

Representation Representation::Regular(const GroupSpec& group) {
  const int n = group.size();
  std::vector<std::vector<double>> mats;
  mats.reserve(n);
  for (const auto& g : group.elements()) {
    std::vector<double> m(static_cast<std::size_t>(n * n), 0.0);
    for (const auto& h : group.elements()) {
      m[group.IndexOf(group.Compose(g, h)) * n + group.IndexOf(h)] = 1.0;
    }
    mats.push_back(std::move(m));
  }
  return Representation(group, n, RepKind::kRegular, std::move(mats));
}

Representation Representation::DirectSum(std::span<const Representation> reps) {
  if (reps.empty()) throw ValidationError("direct_sum of zero representations");
  if (reps.size() == 1) return reps[0];
  const GroupSpec& group = reps[0].group();
  int dim = 0;
  for (const auto& r : reps) {
    if (!(r.group() == group)) {
      throw ValidationError("direct_sum mixes groups " + group.Name() + " and " +
                            r.group().Name());
    }
    dim += r.dim();
  }
  std::vector<std::vector<double>> mats;
  for (int e = 0; e < group.size(); ++e) {
    std::vector<double> m(static_cast<std::size_t>(dim * dim), 0.0);
    int off = 0;
    for (const auto& r : reps) {
      const auto& block = r.Matrix(e);
      for (int i = 0; i < r.dim(); ++i) {
        for (int j = 0; j < r.dim(); ++j) {
          m[(off + i) * dim + off + j] = block[i * r.dim() + j];
        }
      }
      off += r.dim();
    }
    mats.push_back(std::move(m));
  }
  return Representation(group, dim, RepKind::kDirectSum, std::move(mats));
}

bool Representation::IsPermutation() const {
  for (const auto& m : matrices_) {
    for (int i = 0; i < dim_; ++i) {
      int row_ones = 0, col_ones = 0;
      for (int j = 0; j < dim_; ++j) {
        const double a = m[i * dim_ + j], b = m[j * dim_ + i];
        if (a != 0.0 && a != 1.0) return false;
        row_ones += a == 1.0;
        col_ones += b == 1.0;
      }
      if (row_ones != 1 || col_ones != 1) return false;
    }
  }
  return true;
}

std::string Representation::Name() const {
  switch (kind_) {
    case RepKind::kTrivial:
      return "trivial";
    case RepKind::kRegular:
      return "regular";
    case RepKind::kDirectSum:
      return "sum" + std::to_string(dim_);
  }
  return "?";
}

FieldType::FieldType(GroupSpec group, std::vector<Representation> fields)
    : group_(std::move(group)), fields_(std::move(fields)) {
  for (const auto& f : fields_) {
    if (!(f.group() == group_)) {
      throw ValidationError("field type over " + group_.Name() +
                            " contains a representation of " +
                            f.group().Name());
    }
  }
  offsets_ = OffsetsOf(fields_);
}

FieldType FieldType::Trivial(const GroupSpec& group, int count) {
  return FieldType(group, std::vector<Representation>(
                              count, Representation::Trivial(group)));
}

FieldType FieldType::Regular(const GroupSpec& group, int count) {
  return FieldType(group, std::vector<Representation>(
                              count, Representation::Regular(group)));
}

bool FieldType::AllOfKind(RepKind kind) const {
  for (const auto& f : fields_) {
    if (f.kind() != kind) return false;
  }
  return true;
}

Representation FieldType::AsRepresentation() const {
  return Representation::DirectSum(fields_);
}

FieldType FieldType::Concat(const FieldType& other) const {
  if (!(other.group_ == group_)) {
    throw ValidationError("cannot concatenate field types over " +
                          group_.Name() + " and " + other.group_.Name());
  }
  std::vector<Representation> all = fields_;
  all.insert(all.end(), other.fields_.begin(), other.fields_.end());
  return FieldType(group_, std::move(all));
}

std::string FieldType::Name() const {
  std::ostringstream os;
  os << group_.Name() << '[';
  for (std::size_t i = 0; i < fields_.size();) {
    std::size_t j = i;
    while (j < fields_.size() && fields_[j] == fields_[i]) ++j;
    if (i) os << ',';
    os << (j - i) << 'x' << fields_[i].Name();
    i = j;
  }
  os << ']';
  return os.str();
}

template <typename T>
GeometricTensor<T>::GeometricTensor(BasicTensor<T> t, FieldType ft)
    : tensor(std::move(t)), type(std::move(ft)) {
  if (tensor.rank() != 4 || tensor.dim(1) != type.total_dim()) {
    throw ValidationError("geometric tensor " + ShapeString(tensor.shape()) +
                          " does not carry " + std::to_string(type.total_dim()) +
                          " channels of " + type.Name());
  }
}

template <typename T>
BasicTensor<T> TransformSpatial(const BasicTensor<T>& x, const GroupSpec& group,
                                const GroupElement& g) {
  RequireImage(x, "transform_spatial");
  if (!group.Contains(g)) {
    throw ValidationError("element not in " + group.Name());
  }
  return Resample(x, group.AngleDegrees(g), g.reflect, false);
}

template <typename T>
BasicTensor<T> RotateImage(const BasicTensor<T>& x, double degrees,
                           bool nearest) {
  RequireImage(x, "rotate_image");
  return Resample(x, degrees, false, nearest);
}

template <typename T>
GeometricTensor<T> TransformField(const GeometricTensor<T>& x,
                                  const GroupElement& g) {
  const FieldType& ft = x.type;
  BasicTensor<T> moved = TransformSpatial(x.tensor, ft.group(), g);
  const std::int64_t batch = moved.dim(0), c = moved.dim(1);
  const std::int64_t hw = moved.dim(2) * moved.dim(3);
  std::vector<T> out(moved.data().size(), T(0));
  const T* in = moved.data().data();
  const int gi = ft.group().IndexOf(g);
  for (int f = 0; f < ft.size(); ++f) {
    const auto& rep = ft.fields()[f];
    const auto& m = rep.Matrix(gi);
    const int d = rep.dim();
    const std::int64_t c0 = ft.offsets()[f];
    for (std::int64_t b = 0; b < batch; ++b) {
      for (int a = 0; a < d; ++a) {
        T* dst = out.data() + (b * c + c0 + a) * hw;
        for (int k = 0; k < d; ++k) {
          const double coef = m[a * d + k];
          if (coef == 0.0) continue;
          const T* src = in + (b * c + c0 + k) * hw;
          if (coef == 1.0) {
            for (std::int64_t p = 0; p < hw; ++p) dst[p] += src[p];
          } else {
            const T tc = static_cast<T>(coef);
            for (std::int64_t p = 0; p < hw; ++p) dst[p] += tc * src[p];
          }
        }
      }
    }
  }
  return GeometricTensor<T>(BasicTensor<T>(moved.shape(), std::move(out)), ft);
}

template struct GeometricTensor<float>;
template struct GeometricTensor<double>;
template BasicTensor<float> TransformSpatial(const BasicTensor<float>&,
                                             const GroupSpec&,
                                             const GroupElement&);
template BasicTensor<double> TransformSpatial(const BasicTensor<double>&,
                                              const GroupSpec&,
                                              const GroupElement&);
template BasicTensor<float> RotateImage(const BasicTensor<float>&, double, bool);
template BasicTensor<double> RotateImage(const BasicTensor<double>&, double,
                                         bool);
template GeometricTensor<float> TransformField(const GeometricTensor<float>&,
                                               const GroupElement&);
template GeometricTensor<double> TransformField(const GeometricTensor<double>&,
                                                const GroupElement&);

}  // namespace eqseg
