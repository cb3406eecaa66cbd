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

#ifndef EQSEG_CHECKPOINT_HPP_
#define EQSEG_CHECKPOINT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eqseg/model.hpp"
#include "eqseg/tensor.hpp"

namespace eqseg {

inline constexpr char kCheckpointMagic[4] = {'E', 'Q', 'S', 'G'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  DType dtype = DType::kFloat32;
  Shape shape;
  std::vector<std::uint8_t> payload;  // little-endian elements
};

// Binary layout, all integers little-endian:
//   "EQSG" | u32 version | u32 len, config text |
//   u32 count, { u32 len, name | u8 dtype | u32 rank | u64 extents[rank] |
//                payload } | u32 len, metrics text
struct Checkpoint {
  std::string config_text;
  std::vector<NamedArray> arrays;
  std::string metrics_text;

  std::vector<std::uint8_t> Serialize() const;
  // Throws FormatError on bad magic, version mismatch or truncation.
  static Checkpoint Parse(std::span<const std::uint8_t> bytes);

  void Save(const std::string& path) const;
  static Checkpoint Load(const std::string& path);

  const NamedArray* Find(const std::string& name) const;
};

// Parameters and batchnorm running statistics of a model.
Checkpoint CaptureModel(UNetModel<float>& model, std::string config_text,
                        std::string metrics_text);

// Rebuilds the model described by config_text and overwrites every parameter
// and buffer. Missing or mis-shaped arrays are a FormatError.
UNetModel<float> RestoreModel(const Checkpoint& ckpt);

}  // namespace eqseg

#endif  // EQSEG_CHECKPOINT_HPP_
