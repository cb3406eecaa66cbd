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

#ifndef EQSEG_GROUP_HPP_
#define EQSEG_GROUP_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eqseg/tensor.hpp"

namespace eqseg {

enum class GroupKind { kCyclic, kDihedral };

// g = R^rotation * F^reflect, with R the counterclockwise rotation by 2*pi/N
// and F the mirror across the vertical image axis.
struct GroupElement {
  int rotation = 0;
  bool reflect = false;

  friend bool operator==(const GroupElement&, const GroupElement&) = default;
};

// Finite rotation (C_N) or rotation-reflection (D_N) group.
class GroupSpec {
 public:
  // Throws ValidationError for n < 1.
  static GroupSpec Make(GroupKind kind, int n);
  static GroupSpec Cyclic(int n) { return Make(GroupKind::kCyclic, n); }
  static GroupSpec Dihedral(int n) { return Make(GroupKind::kDihedral, n); }

  GroupKind kind() const { return kind_; }
  int order_n() const { return n_; }
  int size() const { return static_cast<int>(elements_.size()); }
  const std::vector<GroupElement>& elements() const { return elements_; }

  // Element index: rotation + N * reflect.
  int IndexOf(const GroupElement& g) const;
  const GroupElement& At(int index) const { return elements_.at(index); }
  GroupElement Identity() const { return {}; }
  GroupElement Compose(const GroupElement& a, const GroupElement& b) const;
  GroupElement Inverse(const GroupElement& g) const;
  // Rotation element of the given angle in degrees; it must be a multiple of
  // 360/N.
  GroupElement Rotation(double degrees) const;

  double AngleDegrees(const GroupElement& g) const;
  bool IsQuarterTurn(const GroupElement& g) const;
  bool Contains(const GroupElement& g) const;

  std::string Name() const;

  friend bool operator==(const GroupSpec& a, const GroupSpec& b) {
    return a.kind_ == b.kind_ && a.n_ == b.n_;
  }

 private:
  GroupSpec(GroupKind kind, int n, std::vector<GroupElement> elements)
      : kind_(kind), n_(n), elements_(std::move(elements)) {}

  GroupKind kind_;
  int n_;
  std::vector<GroupElement> elements_;
};

enum class RepKind { kTrivial, kRegular, kDirectSum };

// Real matrix representation; matrices are stored row-major per element.
class Representation {
 public:
  static Representation Trivial(const GroupSpec& group);
  // Left-regular representation: rho(g) e_h = e_{gh}.
  static Representation Regular(const GroupSpec& group);
  // Block-diagonal sum; throws ValidationError when groups differ.
  static Representation DirectSum(std::span<const Representation> reps);

  const GroupSpec& group() const { return group_; }
  int dim() const { return dim_; }
  RepKind kind() const { return kind_; }
  const std::vector<double>& Matrix(int element_index) const {
    return matrices_.at(element_index);
  }
  const std::vector<double>& Matrix(const GroupElement& g) const {
    return matrices_.at(group_.IndexOf(g));
  }
  bool IsPermutation() const;
  std::string Name() const;

  friend bool operator==(const Representation& a, const Representation& b) {
    return a.group_ == b.group_ && a.kind_ == b.kind_ && a.dim_ == b.dim_ &&
           a.matrices_ == b.matrices_;
  }

 private:
  Representation(GroupSpec group, int dim, RepKind kind,
                 std::vector<std::vector<double>> matrices)
      : group_(std::move(group)),
        dim_(dim),
        kind_(kind),
        matrices_(std::move(matrices)) {}

  GroupSpec group_;
  int dim_;
  RepKind kind_;
  std::vector<std::vector<double>> matrices_;
};

// Ordered list of representations attached to the channels of a feature map.
class FieldType {
 public:
  FieldType(GroupSpec group, std::vector<Representation> fields);
  static FieldType Trivial(const GroupSpec& group, int count);
  static FieldType Regular(const GroupSpec& group, int count);

  const GroupSpec& group() const { return group_; }
  const std::vector<Representation>& fields() const { return fields_; }
  int size() const { return static_cast<int>(fields_.size()); }
  std::int64_t total_dim() const { return offsets_.back(); }
  // F+1 channel offsets; field f owns channels [offsets[f], offsets[f+1]).
  const std::vector<std::int64_t>& offsets() const { return offsets_; }
  bool AllOfKind(RepKind kind) const;
  Representation AsRepresentation() const;
  FieldType Concat(const FieldType& other) const;
  std::string Name() const;

  friend bool operator==(const FieldType& a, const FieldType& b) {
    return a.group_ == b.group_ && a.fields_ == b.fields_;
  }

 private:
  GroupSpec group_;
  std::vector<Representation> fields_;
  std::vector<std::int64_t> offsets_;
};

template <typename T>
struct GeometricTensor {
  GeometricTensor(BasicTensor<T> t, FieldType ft);

  BasicTensor<T> tensor;
  FieldType type;
};

// Spatial part of the group action on [B,C,H,W] maps: out(p) = in(g^-1 p),
// about the grid center. Quarter turns (with or without reflection) are exact
// index permutations; other angles use bilinear sampling with zero fill.
template <typename T>
BasicTensor<T> TransformSpatial(const BasicTensor<T>& x, const GroupSpec& group,
                                const GroupElement& g);

// Counterclockwise rotation by an arbitrary angle. Multiples of 90 degrees
// are exact; anything else is bilinear (or nearest-neighbour when
// `nearest` is set) with zero fill.
template <typename T>
BasicTensor<T> RotateImage(const BasicTensor<T>& x, double degrees,
                           bool nearest = false);

// Full transformation law: spatial action composed with rho(g) on every
// field's fiber.
template <typename T>
GeometricTensor<T> TransformField(const GeometricTensor<T>& x,
                                  const GroupElement& g);

}  // namespace eqseg

#endif  // EQSEG_GROUP_HPP_
