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

#include "eqseg/model.hpp"

#include <cmath>
#include <sstream>

#include "eqseg/error.hpp"

namespace eqseg {

std::string VariantName(Variant v) {
  return v == Variant::kCnn ? "cnn" : "equivariant";
}

std::string HeadName(Head h) {
  switch (h) {
    case Head::kInvariantPool:
      return "invariant_pool";
    case Head::kFlatten:
      return "flatten";
    case Head::kPooledFlatten:
      return "pooled_flatten";
  }
  return "?";
}

void ModelConfig::Validate() const {
  if (image_size <= 0 || image_size % 16 != 0) {
    throw ConfigError("image_size must be a positive multiple of 16, got " +
                      std::to_string(image_size));
  }
  if (group_n < 1) {
    throw ConfigError("group_n must be >= 1, got " + std::to_string(group_n));
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ConfigError("kernel_size must be odd, got " +
                      std::to_string(kernel_size));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ConfigError("dropout_p must lie in [0,1), got " +
                      std::to_string(dropout_p));
  }
  if (num_classes < 2) {
    throw ConfigError("num_classes must be >= 2, got " +
                      std::to_string(num_classes));
  }
  for (int h : mlp_hidden) {
    if (h < 1) throw ConfigError("mlp_hidden entries must be positive");
  }
  Multiplicities();
}

GroupSpec ModelConfig::Group() const {
  return GroupSpec::Cyclic(variant == Variant::kEquivariant ? group_n : 1);
}

std::array<int, 5> ModelConfig::Multiplicities() const {
  std::array<int, 5> m{};
  const int n = variant == Variant::kEquivariant ? group_n : 1;
  for (int i = 0; i < 5; ++i) {
    if (widths[i] < 1) {
      throw ConfigError("widths must be positive, got " +
                        std::to_string(widths[i]));
    }
    m[i] = static_cast<int>(std::lround(static_cast<double>(widths[i]) / n));
    if (m[i] < 1) {
      throw ConfigError("width " + std::to_string(widths[i]) +
                        " cannot be rounded to a positive multiple of " +
                        std::to_string(n));
    }
  }
  return m;
}

ModelConfig ModelConfig::FromKeyValues(const KeyValues& kv) {
  ModelConfig cfg;
  const std::string variant = kv.GetString("variant", "equivariant");
  if (variant == "cnn") {
    cfg.variant = Variant::kCnn;
  } else if (variant == "equivariant") {
    cfg.variant = Variant::kEquivariant;
  } else {
    throw ConfigError("variant must be cnn or equivariant, got " + variant);
  }
  cfg.group_n = static_cast<int>(kv.GetInt("group_n", cfg.group_n));
  cfg.image_size = static_cast<int>(kv.GetInt("image_size", cfg.image_size));
  auto widths = kv.GetIntList(
      "widths", std::vector<int>(cfg.widths.begin(), cfg.widths.end()));
  if (widths.size() != 5) {
    throw ConfigError("widths must list exactly 5 stage widths");
  }
  std::copy(widths.begin(), widths.end(), cfg.widths.begin());
  cfg.num_classes = static_cast<int>(kv.GetInt("num_classes", cfg.num_classes));
  cfg.dropout_p = kv.GetDouble("dropout_p", cfg.dropout_p);
  const std::string head = kv.GetString("head", HeadName(cfg.head));
  if (head == "invariant_pool") {
    cfg.head = Head::kInvariantPool;
  } else if (head == "flatten") {
    cfg.head = Head::kFlatten;
  } else if (head == "pooled_flatten") {
    cfg.head = Head::kPooledFlatten;
  } else {
    throw ConfigError("head must be invariant_pool, flatten or pooled_flatten, "
                      "got " + head);
  }
  auto hidden = kv.GetIntList(
      "mlp_hidden",
      std::vector<int>(cfg.mlp_hidden.begin(), cfg.mlp_hidden.end()));
  if (hidden.size() != 2) throw ConfigError("mlp_hidden must list 2 sizes");
  cfg.mlp_hidden = {hidden[0], hidden[1]};
  cfg.kernel_size = static_cast<int>(kv.GetInt("kernel_size", cfg.kernel_size));
  cfg.Validate();
  return cfg;
}

void ModelConfig::ToKeyValues(KeyValues& kv) const {
  auto join = [](const auto& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(xs[i]);
    }
    return s;
  };
  kv.Set("variant", VariantName(variant));
  kv.Set("group_n", std::to_string(group_n));
  kv.Set("image_size", std::to_string(image_size));
  kv.Set("widths", join(widths));
  kv.Set("num_classes", std::to_string(num_classes));
  kv.Set("dropout_p", FormatDouble(dropout_p));
  kv.Set("head", HeadName(head));
  kv.Set("mlp_hidden", join(mlp_hidden));
  kv.Set("kernel_size", std::to_string(kernel_size));
}

template <typename T>
UNetModel<T>::UNetModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      input_type_(FieldType::Trivial(cfg.Group(), 3)),
      dropout_rng_(seed, 2) {}

template <typename T>
UNetModel<T> UNetModel<T>::Build(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.Validate();
  UNetModel model(cfg, seed);
  const GroupSpec group = cfg.Group();
  const auto mult = cfg.Multiplicities();
  std::vector<FieldType> stage;
  for (int m : mult) stage.push_back(FieldType::Regular(group, m));
  const int k = cfg.kernel_size;
  const double p = cfg.dropout_p;

  model.encoder_.emplace_back(model.input_type_, stage[0], k, p);
  for (int i = 1; i < 5; ++i) model.encoder_.emplace_back(stage[i - 1], stage[i], k, p);

  // Decoder block j runs at the resolution of encoder block 5-j; its input is
  // the upsampled previous decoder output concatenated with that encoder
  // output (block 1 consumes the bottleneck directly).
  const FieldType dec_out[5] = {stage[3], stage[2], stage[1], stage[0], stage[0]};
  model.decoder_.emplace_back(stage[4], dec_out[0], k, p);
  for (int j = 1; j < 5; ++j) {
    model.decoder_.emplace_back(dec_out[j - 1].Concat(stage[4 - j]), dec_out[j],
                                k, p);
  }
  model.seg_head_ = std::make_unique<EquivariantConv<T>>(
      stage[0], FieldType::Trivial(group, 1), 1);

  const std::int64_t cells =
      static_cast<std::int64_t>(cfg.image_size / 16) * (cfg.image_size / 16);
  std::int64_t mlp_in = 0;
  switch (cfg.head) {
    case Head::kInvariantPool:
      mlp_in = mult[4];
      break;
    case Head::kFlatten:
      mlp_in = stage[4].total_dim() * cells;
      break;
    case Head::kPooledFlatten:
      mlp_in = mult[4] * cells;
      break;
  }
  const std::int64_t dims[4] = {mlp_in, cfg.mlp_hidden[0], cfg.mlp_hidden[1],
                                cfg.num_classes};

  Rng rng(seed, 1);
  for (auto& b : model.encoder_) b.Init(rng);
  for (auto& b : model.decoder_) b.Init(rng);
  model.seg_head_->Init(rng);
  for (int l = 0; l < 3; ++l) {
    Linear lin{BasicTensor<T>::Zeros({dims[l + 1], dims[l]}),
               BasicTensor<T>::Zeros({dims[l + 1]})};
    const double sd = std::sqrt(2.0 / static_cast<double>(dims[l]));
    for (auto& w : lin.weight.data()) w = static_cast<T>(sd * rng.Normal());
    lin.weight.set_requires_grad(true);
    lin.bias.set_requires_grad(true);
    model.mlp_.push_back(std::move(lin));
  }
  return model;
}

template <typename T>
ModelOutput<T> UNetModel<T>::Forward(const BasicTensor<T>& images, Mode mode) {
  const std::int64_t s = cfg_.image_size;
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != s ||
      images.dim(3) != s) {
    throw ValidationError("model expects images [B,3," + std::to_string(s) +
                          "," + std::to_string(s) + "], got " +
                          ShapeString(images.shape()));
  }
  GeometricTensor<T> x(images, input_type_);
  std::vector<GeometricTensor<T>> skips;
  for (int i = 0; i < 5; ++i) {
    if (i > 0) x = MaxPoolField(x);
    x = encoder_[i].Forward(x, mode, dropout_rng_);
    skips.push_back(x);
  }
  const GeometricTensor<T> bottleneck = x;
  x = decoder_[0].Forward(x, mode, dropout_rng_);
  for (int j = 1; j < 5; ++j) {
    x = ConcatFields(UpsampleField(x), skips[4 - j]);
    x = decoder_[j].Forward(x, mode, dropout_rng_);
  }
  ModelOutput<T> out;
  out.seg_logits = seg_head_->Forward(x).tensor;

  BasicTensor<T> feat;
  switch (cfg_.head) {
    case Head::kInvariantPool:
      feat = ops::GlobalAvgPool(GroupPool(bottleneck).tensor);
      break;
    case Head::kFlatten:
      feat = ops::Flatten(bottleneck.tensor);
      break;
    case Head::kPooledFlatten:
      feat = ops::Flatten(GroupPool(bottleneck).tensor);
      break;
  }
  for (std::size_t l = 0; l < mlp_.size(); ++l) {
    feat = ops::MatMulBias(feat, mlp_[l].weight, mlp_[l].bias);
    if (l + 1 < mlp_.size()) feat = ops::Relu(feat);
  }
  out.class_logits = feat;
  return out;
}

template <typename T>
std::vector<ParamRef<T>> UNetModel<T>::Params() const {
  std::vector<ParamRef<T>> out;
  for (int i = 0; i < 5; ++i) {
    encoder_[i].CollectParams("enc" + std::to_string(i + 1), out);
  }
  for (int j = 0; j < 5; ++j) {
    decoder_[j].CollectParams("dec" + std::to_string(j + 1), out);
  }
  seg_head_->CollectParams("seg_head", out);
  for (std::size_t l = 0; l < mlp_.size(); ++l) {
    const std::string p = "mlp.fc" + std::to_string(l + 1);
    out.push_back({p + ".weight", mlp_[l].weight});
    out.push_back({p + ".bias", mlp_[l].bias});
  }
  return out;
}

template <typename T>
std::vector<BufferRef<T>> UNetModel<T>::Buffers() {
  std::vector<BufferRef<T>> out;
  for (int i = 0; i < 5; ++i) {
    encoder_[i].CollectBuffers("enc" + std::to_string(i + 1), out);
  }
  for (int j = 0; j < 5; ++j) {
    decoder_[j].CollectBuffers("dec" + std::to_string(j + 1), out);
  }
  return out;
}

template <typename T>
std::int64_t UNetModel<T>::ParamCount() const {
  std::int64_t n = 0;
  for (const auto& p : Params()) n += p.tensor.numel();
  return n;
}

template class UNetModel<float>;
template class UNetModel<double>;

}  // namespace eqseg
