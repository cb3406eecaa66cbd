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

#ifndef EQSEG_DATA_HPP_
#define EQSEG_DATA_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eqseg/tensor.hpp"

namespace eqseg {

// Driver groups used as classification targets.
inline constexpr int kNumDriverGroups = 4;

std::string_view DriverGroupName(int id);

// The 11 expert-labelled categories, in table order.
const std::vector<std::string>& ExpertCategories();
// Expert categories that aggregate into driver group `id`.
std::vector<std::string> ExpertCategoriesOf(int id);

// Expert category -> driver group id. Throws LookupError listing the valid
// strings for anything else.
int MapExpertCategory(std::string_view category);

// Accepts an expert category or a driver-group name.
int ParseDriverLabel(std::string_view text);

// 8-bit interleaved image.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

Image8 ReadPng(const std::string& path, int channels);
void WritePng(const std::string& path, const Image8& image);

// [C,H,W] floats in [0,1] <-> 8-bit interleaved pixels.
Tensor ImageToTensor(const Image8& image);
Image8 TensorToImage(const Tensor& chw);

struct Sample {
  std::string id;
  Tensor image;  // [3,H,W], values in [0,1]
  Tensor mask;   // [1,H,W], values in {0,1}
  int label = 0;

  // Throws ValidationError naming the sample on a broken invariant.
  void Validate() const;
  std::int64_t PositivePixels() const;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetSplit split;

  // Samples of the named split ("train", "val", "test", or "all").
  std::vector<Sample> Subset(const std::string& name) const;
};

// Writes n synthetic scenes to dir (images/, masks/, labels.csv, splits/).
void GenerateSynthetic(const std::string& dir, int n, int size,
                       std::uint64_t seed);

// In-memory version of the generator, one sample at index i.
Sample SynthesizeSample(int index, int size, std::uint64_t seed,
                        std::string* category = nullptr);

Dataset LoadDataset(const std::string& dir);

enum class RotationMode { kNone, kQuarter, kArbitrary };
RotationMode ParseRotationMode(std::string_view text);

// Rotates image and mask together (counterclockwise, about the center).
// Quarter turns are exact; other angles resample the image bilinearly and
// the mask by nearest neighbour.
Sample RotateSample(const Sample& s, double degrees);

// quarter: independent random multiple of 90 degrees per sample.
// arbitrary: uniform angle in [0,360); a sample whose mask would lose every
// positive pixel keeps its original orientation.
std::vector<Sample> RotatedTestSet(std::span<const Sample> samples,
                                   RotationMode mode, std::uint64_t seed);

// Input image with predicted pixels alpha-blended in blue and, when a
// ground-truth mask is given, its boundary drawn in red. Masks are 0/1 bytes.
Image8 RenderOverlay(const Image8& rgb, std::span<const std::uint8_t> pred,
                     std::span<const std::uint8_t> truth = {});

// Stacks samples into [B,3,H,W] images and [B,1,H,W] masks.
void StackBatch(std::span<const Sample> samples, Tensor* images, Tensor* masks,
                std::vector<int>* labels);

}  // namespace eqseg

#endif  // EQSEG_DATA_HPP_
