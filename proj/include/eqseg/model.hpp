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

#ifndef EQSEG_MODEL_HPP_
#define EQSEG_MODEL_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "eqseg/config.hpp"
#include "eqseg/layers.hpp"

namespace eqseg {

enum class Variant { kCnn, kEquivariant };

// invariant_pool: group mean, then global spatial average.
// flatten: flatten the bottleneck as is.
// pooled_flatten: group mean, then flatten.
enum class Head { kInvariantPool, kFlatten, kPooledFlatten };

std::string VariantName(Variant v);
std::string HeadName(Head h);

struct ModelConfig {
  Variant variant = Variant::kEquivariant;
  int group_n = 8;
  int image_size = 64;
  std::array<int, 5> widths{8, 16, 32, 64, 64};
  int num_classes = 4;
  double dropout_p = 0.1;
  Head head = Head::kInvariantPool;
  std::array<int, 2> mlp_hidden{64, 32};
  int kernel_size = 3;

  // Throws ConfigError on any violated constraint.
  void Validate() const;
  // The symmetry group: C_N for the equivariant variant, C1 otherwise.
  GroupSpec Group() const;
  // Number of regular fields per encoder stage.
  std::array<int, 5> Multiplicities() const;

  static ModelConfig FromKeyValues(const KeyValues& kv);
  void ToKeyValues(KeyValues& kv) const;
};

template <typename T>
struct ModelOutput {
  BasicTensor<T> seg_logits;    // [B,1,H,W]
  BasicTensor<T> class_logits;  // [B,num_classes]
};

// U-Net with five encoder and five decoder blocks and an MLP classification
// head on the bottleneck.
template <typename T>
class UNetModel {
 public:
  static UNetModel Build(const ModelConfig& cfg, std::uint64_t seed);

  ModelOutput<T> Forward(const BasicTensor<T>& images, Mode mode);

  const ModelConfig& config() const { return cfg_; }
  std::int64_t ParamCount() const;
  std::vector<ParamRef<T>> Params() const;
  std::vector<BufferRef<T>> Buffers();

  const FieldType& input_type() const { return input_type_; }

 private:
  struct Linear {
    BasicTensor<T> weight;
    BasicTensor<T> bias;
  };

  UNetModel(const ModelConfig& cfg, std::uint64_t seed);

  ModelConfig cfg_;
  FieldType input_type_;
  std::vector<ConvBlock<T>> encoder_;
  std::vector<ConvBlock<T>> decoder_;
  std::unique_ptr<EquivariantConv<T>> seg_head_;
  std::vector<Linear> mlp_;
  Rng dropout_rng_;
};

}  // namespace eqseg

#endif  // EQSEG_MODEL_HPP_
