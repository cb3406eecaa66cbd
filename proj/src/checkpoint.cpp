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

#include "eqseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eqseg/config.hpp"
#include "eqseg/error.hpp"

namespace eqseg {
namespace {

class Writer {
 public:
  void Bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void Str(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::span<const std::uint8_t> Bytes(std::size_t n) {
    if (n > b_.size() - pos_) throw FormatError("checkpoint truncated");
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t U8() { return Bytes(1)[0]; }
  std::uint32_t U32() {
    auto s = Bytes(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{s[i]} << (8 * i);
    return v;
  }
  std::uint64_t U64() {
    auto s = Bytes(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{s[i]} << (8 * i);
    return v;
  }
  std::string Str() {
    auto s = Bytes(U32());
    return std::string(s.begin(), s.end());
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::size_t ElementSize(DType d) { return d == DType::kFloat64 ? 8 : 4; }

std::vector<std::uint8_t> EncodeFloats(std::span<const float> v) {
  std::vector<std::uint8_t> out;
  out.reserve(v.size() * 4);
  for (float f : v) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  return out;
}

void DecodeFloats(const NamedArray& a, std::span<float> dst) {
  if (a.dtype != DType::kFloat32) {
    throw FormatError("checkpoint array '" + a.name + "' is not float32");
  }
  if (a.payload.size() != dst.size() * 4) {
    throw FormatError("checkpoint array '" + a.name + "' has " +
                      std::to_string(a.payload.size() / 4) +
                      " elements, model expects " + std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::uint32_t u = 0;
    for (int k = 0; k < 4; ++k) u |= std::uint32_t{a.payload[i * 4 + k]} << (8 * k);
    dst[i] = std::bit_cast<float>(u);
  }
}

}  // namespace

std::vector<std::uint8_t> Checkpoint::Serialize() const {
  Writer w;
  w.Bytes(kCheckpointMagic, 4);
  w.U32(kCheckpointVersion);
  w.Str(config_text);
  w.U32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    w.Str(a.name);
    w.U8(static_cast<std::uint8_t>(a.dtype));
    w.U32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto e : a.shape) w.U64(static_cast<std::uint64_t>(e));
    w.Bytes(a.payload.data(), a.payload.size());
  }
  w.Str(metrics_text);
  return w.Take();
}

Checkpoint Checkpoint::Parse(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic");
  }
  r.Bytes(4);
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.config_text = r.Str();
  const std::uint32_t n = r.U32();
  for (std::uint32_t i = 0; i < n; ++i) {
    NamedArray a;
    a.name = r.Str();
    const std::uint8_t tag = r.U8();
    if (tag != static_cast<std::uint8_t>(DType::kFloat32) &&
        tag != static_cast<std::uint8_t>(DType::kFloat64)) {
      throw FormatError("checkpoint array '" + a.name + "' has unknown dtype tag " +
                        std::to_string(tag));
    }
    a.dtype = static_cast<DType>(tag);
    const std::uint32_t rank = r.U32();
    if (rank > 8) throw FormatError("checkpoint array '" + a.name + "' rank too large");
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t e = r.U64();
      if (e > (std::uint64_t{1} << 32)) {
        throw FormatError("checkpoint array '" + a.name + "' extent too large");
      }
      a.shape.push_back(static_cast<std::int64_t>(e));
      numel *= e;
      if (numel > (std::uint64_t{1} << 34)) {
        throw FormatError("checkpoint array '" + a.name + "' too large");
      }
    }
    auto payload = r.Bytes(static_cast<std::size_t>(numel) * ElementSize(a.dtype));
    a.payload.assign(payload.begin(), payload.end());
    c.arrays.push_back(std::move(a));
  }
  c.metrics_text = r.Str();
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  return c;
}

void Checkpoint::Save(const std::string& path) const {
  const auto bytes = Serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for checkpoint " + path);
}

Checkpoint Checkpoint::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return Parse(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

const NamedArray* Checkpoint::Find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

Checkpoint CaptureModel(UNetModel<float>& model, std::string config_text,
                        std::string metrics_text) {
  Checkpoint c;
  c.config_text = std::move(config_text);
  c.metrics_text = std::move(metrics_text);
  for (const auto& p : model.Params()) {
    c.arrays.push_back(
        {p.name, DType::kFloat32, p.tensor.shape(), EncodeFloats(p.tensor.data())});
  }
  for (const auto& b : model.Buffers()) {
    c.arrays.push_back({b.name, DType::kFloat32,
                        Shape{static_cast<std::int64_t>(b.values->size())},
                        EncodeFloats(*b.values)});
  }
  return c;
}

UNetModel<float> RestoreModel(const Checkpoint& ckpt) {
  const KeyValues kv = KeyValues::Parse(ckpt.config_text, "checkpoint config");
  auto model = UNetModel<float>::Build(ModelConfig::FromKeyValues(kv), 0);
  auto find = [&](const std::string& name) -> const NamedArray& {
    const NamedArray* a = ckpt.Find(name);
    if (a == nullptr) throw FormatError("checkpoint lacks array '" + name + "'");
    return *a;
  };
  for (auto& p : model.Params()) {
    const NamedArray& a = find(p.name);
    if (a.shape != p.tensor.shape()) {
      throw FormatError("checkpoint array '" + p.name + "' has shape " +
                        ShapeString(a.shape) + ", model expects " +
                        ShapeString(p.tensor.shape()));
    }
    DecodeFloats(a, p.tensor.data());
  }
  for (auto& b : model.Buffers()) DecodeFloats(find(b.name), *b.values);
  return model;
}

}  // namespace eqseg
