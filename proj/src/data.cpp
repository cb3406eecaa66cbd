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

#include "eqseg/data.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include "eqseg/error.hpp"
#include "eqseg/group.hpp"
#include "eqseg/rng.hpp"

namespace eqseg {
namespace {

namespace fs = std::filesystem;

constexpr std::array<std::string_view, kNumDriverGroups> kGroupNames = {
    "Plantation", "Grassland/shrubland", "Smallholder agriculture", "Other"};

struct CategoryEntry {
  const char* name;
  int group;
};

constexpr std::array<CategoryEntry, 11> kCategories = {{
    {"Oil palm plantation", 0},
    {"Timber plantation", 0},
    {"Other large-scale plantations", 0},
    {"Grassland/shrubland", 1},
    {"Small-scale agriculture", 2},
    {"Small-scale mixed plantation", 2},
    {"Small-scale oil palm plantation", 2},
    {"Mining", 3},
    {"Fish pond", 3},
    {"Logging road", 3},
    {"Secondary forest", 3},
}};

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string Unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string SampleId(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "syn_%05d", i);
  return buf;
}

using Rgb = std::array<double, 3>;

// Bilinearly interpolated lattice of uniform values, period `cell` pixels.
std::vector<double> ValueNoise(Rng& rng, int size, double cell) {
  const int g = static_cast<int>(std::ceil(size / cell)) + 2;
  std::vector<double> lattice(static_cast<std::size_t>(g) * g);
  for (double& v : lattice) v = rng.Uniform(-1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    const double fy = (y + 0.5) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < size; ++x) {
      const double fx = (x + 0.5) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      auto at = [&](int yy, int xx) { return lattice[yy * g + xx]; };
      const double top = at(y0, x0) * (1 - tx) + at(y0, x0 + 1) * tx;
      const double bot = at(y0 + 1, x0) * (1 - tx) + at(y0 + 1, x0 + 1) * tx;
      out[static_cast<std::size_t>(y) * size + x] = top * (1 - ty) + bot * ty;
    }
  }
  return out;
}

class Canvas {
 public:
  explicit Canvas(int size)
      : size_(size),
        rgb_(static_cast<std::size_t>(size) * size),
        mask_(static_cast<std::size_t>(size) * size, 0) {}

  int size() const { return size_; }
  Rgb& px(int y, int x) { return rgb_[static_cast<std::size_t>(y) * size_ + x]; }
  std::uint8_t& mask(int y, int x) {
    return mask_[static_cast<std::size_t>(y) * size_ + x];
  }

  // Paints every pixel whose center satisfies `inside`, colored by `color`.
  template <typename Inside, typename Color>
  void Paint(Inside inside, Color color) {
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        const double cx = x + 0.5, cy = y + 0.5;
        if (!inside(cx, cy)) continue;
        px(y, x) = color(cx, cy);
        mask(y, x) = 1;
      }
    }
  }

  std::int64_t MaskCount() const {
    return std::count(mask_.begin(), mask_.end(), std::uint8_t{1});
  }

 private:
  int size_;
  std::vector<Rgb> rgb_;
  std::vector<std::uint8_t> mask_;
};

void PaintForest(Canvas& c, Rng& rng) {
  const int s = c.size();
  const auto coarse = ValueNoise(rng, s, s / 4.0);
  const auto fine = ValueNoise(rng, s, 3.0);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * s + x;
      const double n = 0.65 * coarse[i] + 0.35 * fine[i];
      c.px(y, x) = {0.12 + 0.05 * n, 0.33 + 0.10 * n, 0.13 + 0.04 * n};
    }
  }
}

std::string PaintPlantation(Canvas& c, Rng& rng) {
  const double s = c.size();
  const double cx = rng.Uniform(0.4, 0.6) * s, cy = rng.Uniform(0.4, 0.6) * s;
  const double a = rng.Uniform(0.22, 0.30) * s, b = rng.Uniform(0.14, 0.20) * s;
  const double th = rng.Uniform(0.0, std::numbers::pi);
  const double period = std::max(3.0, std::round(s / 16.0));
  const double ct = std::cos(th), st = std::sin(th);
  auto uv = [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{dx * ct + dy * st, -dx * st + dy * ct};
  };
  c.Paint(
      [&](double x, double y) {
        auto [u, v] = uv(x, y);
        return std::abs(u) <= a && std::abs(v) <= b;
      },
      [&](double x, double y) -> Rgb {
        const double v = uv(x, y).second + b;
        if (std::fmod(v, period) < period / 2) return {0.58, 0.47, 0.33};
        return {0.30, 0.52, 0.22};
      });
  static constexpr const char* kNames[] = {"Oil palm plantation",
                                           "Timber plantation",
                                           "Other large-scale plantations"};
  return kNames[rng.Below(3)];
}

std::string PaintGrassland(Canvas& c, Rng& rng) {
  const double s = c.size();
  const double cx = rng.Uniform(0.35, 0.65) * s, cy = rng.Uniform(0.35, 0.65) * s;
  const double r0 = rng.Uniform(0.17, 0.25) * s;
  const double p1 = rng.Uniform(0, 2 * std::numbers::pi);
  const double p2 = rng.Uniform(0, 2 * std::numbers::pi);
  const auto tint = ValueNoise(rng, c.size(), s / 6.0);
  c.Paint(
      [&](double x, double y) {
        const double dx = x - cx, dy = y - cy;
        const double t = std::atan2(dy, dx);
        const double r =
            r0 * (1 + 0.2 * std::sin(2 * t + p1) + 0.12 * std::sin(3 * t + p2));
        return dx * dx + dy * dy <= r * r;
      },
      [&](double x, double y) -> Rgb {
        const double n = 0.05 * tint[static_cast<std::size_t>(y) * c.size() +
                                     static_cast<std::size_t>(x)];
        return {0.66 + n, 0.68 + n, 0.40 + n};
      });
  return "Grassland/shrubland";
}

std::string PaintSmallholder(Canvas& c, Rng& rng) {
  const double s = c.size();
  static constexpr Rgb kColors[] = {
      {0.60, 0.48, 0.34}, {0.45, 0.62, 0.28}, {0.72, 0.64, 0.50}};
  const int patches = 3 + static_cast<int>(rng.Below(4));
  for (int i = 0; i < patches; ++i) {
    const double cx = rng.Uniform(0.1, 0.9) * s, cy = rng.Uniform(0.1, 0.9) * s;
    const double a = std::max(1.5, rng.Uniform(0.03, 0.07) * s);
    const double b = std::max(1.5, rng.Uniform(0.03, 0.07) * s);
    const double th = rng.Uniform(0.0, std::numbers::pi);
    const Rgb color = kColors[rng.Below(3)];
    const double ct = std::cos(th), st = std::sin(th);
    c.Paint(
        [&](double x, double y) {
          const double dx = x - cx, dy = y - cy;
          return std::abs(dx * ct + dy * st) <= a &&
                 std::abs(-dx * st + dy * ct) <= b;
        },
        [&](double, double) { return color; });
  }
  static constexpr const char* kNames[] = {"Small-scale agriculture",
                                           "Small-scale mixed plantation",
                                           "Small-scale oil palm plantation"};
  return kNames[rng.Below(3)];
}

std::string PaintOther(Canvas& c, Rng& rng) {
  const double s = c.size();
  if (rng.Bernoulli(0.5)) {
    const double cx = rng.Uniform(0.35, 0.65) * s, cy = rng.Uniform(0.35, 0.65) * s;
    const double half_len = rng.Uniform(0.30, 0.45) * s;
    const double half_w = rng.Uniform(0.9, 1.6);
    const double th = rng.Uniform(0.0, std::numbers::pi);
    const double amp = rng.Uniform(0.0, 0.06) * s;
    const double freq = rng.Uniform(0.5, 1.5) * std::numbers::pi / half_len;
    const double ct = std::cos(th), st = std::sin(th);
    c.Paint(
        [&](double x, double y) {
          const double dx = x - cx, dy = y - cy;
          const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
          return std::abs(u) <= half_len &&
                 std::abs(v - amp * std::sin(freq * u)) <= half_w;
        },
        [](double, double) -> Rgb { return {0.78, 0.72, 0.60}; });
    return "Logging road";
  }
  const double cx = rng.Uniform(0.25, 0.75) * s, cy = rng.Uniform(0.25, 0.75) * s;
  const double r = rng.Uniform(0.06, 0.10) * s;
  const bool water = rng.Bernoulli(0.5);
  const Rgb color = water ? Rgb{0.25, 0.35, 0.48} : Rgb{0.62, 0.60, 0.58};
  c.Paint(
      [&](double x, double y) {
        return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
      },
      [&](double, double) { return color; });
  return water ? "Fish pond" : "Mining";
}

std::uint8_t Quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
}

std::vector<std::string> ReadIdList(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("missing split file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    std::string id = Trim(line);
    if (!id.empty()) ids.push_back(std::move(id));
  }
  return ids;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor As4d(const Tensor& chw) {
  const auto& s = chw.shape();
  auto d = chw.data();
  return Tensor({1, s[0], s[1], s[2]}, std::vector<float>(d.begin(), d.end()));
}

Tensor As3d(const Tensor& bchw) {
  const auto& s = bchw.shape();
  auto d = bchw.data();
  return Tensor({s[1], s[2], s[3]}, std::vector<float>(d.begin(), d.end()));
}

}  // namespace

std::string_view DriverGroupName(int id) {
  if (id < 0 || id >= kNumDriverGroups) {
    throw IndexError("driver group id " + std::to_string(id) +
                     " outside [0, " + std::to_string(kNumDriverGroups) + ")");
  }
  return kGroupNames[static_cast<std::size_t>(id)];
}

const std::vector<std::string>& ExpertCategories() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : kCategories) v.emplace_back(e.name);
    return v;
  }();
  return names;
}

std::vector<std::string> ExpertCategoriesOf(int id) {
  DriverGroupName(id);
  std::vector<std::string> v;
  for (const auto& e : kCategories) {
    if (e.group == id) v.emplace_back(e.name);
  }
  return v;
}

int MapExpertCategory(std::string_view category) {
  for (const auto& e : kCategories) {
    if (category == e.name) return e.group;
  }
  std::string msg = "unknown expert category '" + std::string(category) +
                    "'; valid categories:";
  for (const auto& e : kCategories) msg += std::string(" '") + e.name + "'";
  throw LookupError(msg);
}

int ParseDriverLabel(std::string_view text) {
  for (int i = 0; i < kNumDriverGroups; ++i) {
    if (text == kGroupNames[static_cast<std::size_t>(i)]) return i;
  }
  return MapExpertCategory(text);
}

Image8 ReadPng(const std::string& path, int channels) {
  if (channels != 1 && channels != 3) {
    throw ValidationError("ReadPng: channels must be 1 or 3");
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    const std::string why = img.message;
    png_image_free(&img);
    if (!fs::exists(path)) throw IoError("cannot open " + path);
    throw FormatError("cannot decode " + path + ": " + why);
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image8 out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = channels;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string why = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode " + path + ": " + why);
  }
  return out;
}

void WritePng(const std::string& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ValidationError("WritePng: channels must be 1 or 3");
  }
  if (image.pixels.size() !=
      static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw ValidationError("WritePng: pixel buffer size mismatch");
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0,
                               nullptr)) {
    const std::string why = img.message;
    png_image_free(&img);
    throw IoError("cannot write " + path + ": " + why);
  }
}

Tensor ImageToTensor(const Image8& image) {
  const int c = image.channels, h = image.height, w = image.width;
  std::vector<float> v(static_cast<std::size_t>(c) * h * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        v[(static_cast<std::size_t>(k) * h + y) * w + x] =
            image.pixels[(static_cast<std::size_t>(y) * w + x) * c + k] / 255.0f;
      }
    }
  }
  return Tensor({c, h, w}, std::move(v));
}

Image8 TensorToImage(const Tensor& chw) {
  if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3)) {
    throw ValidationError("TensorToImage expects [1|3,H,W], got " +
                          ShapeString(chw.shape()));
  }
  Image8 out;
  out.channels = static_cast<int>(chw.dim(0));
  out.height = static_cast<int>(chw.dim(1));
  out.width = static_cast<int>(chw.dim(2));
  out.pixels.resize(chw.numel());
  auto d = chw.data();
  const int c = out.channels, h = out.height, w = out.width;
  for (int k = 0; k < c; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.pixels[(static_cast<std::size_t>(y) * w + x) * c + k] =
            Quantize(d[(static_cast<std::size_t>(k) * h + y) * w + x]);
      }
    }
  }
  return out;
}

void Sample::Validate() const {
  auto fail = [&](const std::string& why) {
    throw ValidationError("sample '" + id + "': " + why);
  };
  if (image.rank() != 3 || image.dim(0) != 3) {
    fail("image must be [3,H,W], got " + ShapeString(image.shape()));
  }
  if (mask.rank() != 3 || mask.dim(0) != 1) {
    fail("mask must be [1,H,W], got " + ShapeString(mask.shape()));
  }
  if (mask.dim(1) != image.dim(1) || mask.dim(2) != image.dim(2)) {
    fail("mask size " + ShapeString(mask.shape()) + " differs from image " +
         ShapeString(image.shape()));
  }
  for (float v : image.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) fail("image value outside [0,1]");
  }
  for (float v : mask.data()) {
    if (v != 0.0f && v != 1.0f) fail("mask value outside {0,1}");
  }
  if (PositivePixels() == 0) fail("mask has no positive pixel");
  if (label < 0 || label >= kNumDriverGroups) fail("label out of range");
}

std::int64_t Sample::PositivePixels() const {
  auto d = mask.data();
  return std::count(d.begin(), d.end(), 1.0f);
}

std::vector<Sample> Dataset::Subset(const std::string& name) const {
  if (name == "all") return samples;
  const std::vector<std::string>* ids = nullptr;
  if (name == "train") ids = &split.train;
  if (name == "val") ids = &split.val;
  if (name == "test") ids = &split.test;
  if (ids == nullptr) {
    throw LookupError("unknown split '" + name +
                      "'; expected train, val, test or all");
  }
  std::map<std::string_view, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;
  std::vector<Sample> out;
  out.reserve(ids->size());
  for (const auto& id : *ids) out.push_back(*by_id.at(id));
  return out;
}

Sample SynthesizeSample(int index, int size, std::uint64_t seed,
                        std::string* category) {
  if (size < 32) throw ValidationError("synthetic image size must be >= 32");
  Rng rng(seed, static_cast<std::uint64_t>(index));
  Canvas canvas(size);
  PaintForest(canvas, rng);
  const int label = index % kNumDriverGroups;
  std::string cat;
  switch (label) {
    case 0: cat = PaintPlantation(canvas, rng); break;
    case 1: cat = PaintGrassland(canvas, rng); break;
    case 2: cat = PaintSmallholder(canvas, rng); break;
    default: cat = PaintOther(canvas, rng); break;
  }
  if (canvas.MaskCount() == 0) {
    canvas.mask(size / 2, size / 2) = 1;
    canvas.px(size / 2, size / 2) = {0.58, 0.47, 0.33};
  }
  const auto grain = ValueNoise(rng, size, 1.0);
  Sample s;
  s.id = SampleId(index);
  s.label = label;
  std::vector<float> img(static_cast<std::size_t>(3) * size * size);
  std::vector<float> mask(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * size + x;
      for (int k = 0; k < 3; ++k) {
        const double v = canvas.px(y, x)[static_cast<std::size_t>(k)] +
                         0.02 * grain[p];
        img[static_cast<std::size_t>(k) * size * size + p] =
            Quantize(v) / 255.0f;
      }
      mask[p] = canvas.mask(y, x);
    }
  }
  s.image = Tensor({3, size, size}, std::move(img));
  s.mask = Tensor({1, size, size}, std::move(mask));
  if (category != nullptr) *category = cat;
  return s;
}

void GenerateSynthetic(const std::string& dir, int n, int size,
                       std::uint64_t seed) {
  if (n < 4) throw ValidationError("synthetic dataset needs n >= 4");
  if (size < 32) throw ValidationError("synthetic image size must be >= 32");
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks", ec);
  fs::create_directories(root / "splits", ec);
  if (ec || !fs::is_directory(root / "splits")) {
    throw IoError("cannot create dataset directory " + dir +
                  (ec ? ": " + ec.message() : ""));
  }
  std::ostringstream labels;
  labels << "id,category\n";
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    std::string category;
    const Sample s = SynthesizeSample(i, size, seed, &category);
    WritePng((root / "images" / (s.id + ".png")).string(), TensorToImage(s.image));
    Image8 m = TensorToImage(s.mask);
    WritePng((root / "masks" / (s.id + ".png")).string(), m);
    labels << s.id << ',' << category << '\n';
    ids.push_back(s.id);
  }
  WriteText(root / "labels.csv", labels.str());

  std::vector<std::string> order = ids;
  std::stable_sort(order.begin(), order.end(),
                   [](const std::string& a, const std::string& b) {
                     return Fnv1a(a) < Fnv1a(b);
                   });
  const auto n_train = static_cast<std::size_t>(std::lround(0.70 * n));
  const auto n_trval = static_cast<std::size_t>(std::lround(0.85 * n));
  auto write_split = [&](const char* name, std::size_t lo, std::size_t hi) {
    std::vector<std::string> part(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                  order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(part.begin(), part.end());
    std::string text;
    for (const auto& id : part) text += id + "\n";
    WriteText(root / "splits" / (std::string(name) + ".txt"), text);
  };
  write_split("train", 0, n_train);
  write_split("val", n_train, n_trval);
  write_split("test", n_trval, order.size());
}

Dataset LoadDataset(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "labels.csv");
  if (!in) throw IoError("cannot open " + (root / "labels.csv").string());
  std::string line;
  if (!std::getline(in, line) || Trim(line) != "id,category") {
    throw FormatError("labels.csv must start with header 'id,category'");
  }
  Dataset ds;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    const std::string row = Trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string::npos) {
      throw FormatError("labels.csv: malformed row '" + row + "'");
    }
    Sample s;
    s.id = Unquote(Trim(row.substr(0, comma)));
    if (!seen.insert(s.id).second) {
      throw IntegrityError("sample '" + s.id + "': duplicate id in labels.csv");
    }
    const std::string category = Unquote(Trim(row.substr(comma + 1)));
    try {
      s.label = ParseDriverLabel(category);
    } catch (const LookupError& e) {
      throw LookupError("sample '" + s.id + "': " + e.what());
    }
    const fs::path img_path = root / "images" / (s.id + ".png");
    const fs::path mask_path = root / "masks" / (s.id + ".png");
    if (!fs::exists(img_path)) {
      throw IntegrityError("sample '" + s.id + "': missing image " +
                           img_path.string());
    }
    if (!fs::exists(mask_path)) {
      throw IntegrityError("sample '" + s.id + "': missing mask " +
                           mask_path.string());
    }
    try {
      s.image = ImageToTensor(ReadPng(img_path.string(), 3));
      Image8 m = ReadPng(mask_path.string(), 1);
      for (auto& p : m.pixels) p = p > 127 ? 255 : 0;
      s.mask = ImageToTensor(m);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIo || e.code() == ErrorCode::kFormat) {
        throw IntegrityError("sample '" + s.id + "': " + e.what());
      }
      throw;
    }
    s.Validate();
    ds.samples.push_back(std::move(s));
  }

  ds.split.train = ReadIdList(root / "splits" / "train.txt");
  ds.split.val = ReadIdList(root / "splits" / "val.txt");
  ds.split.test = ReadIdList(root / "splits" / "test.txt");
  std::set<std::string> assigned;
  for (const auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) {
    for (const auto& id : *part) {
      if (!seen.count(id)) {
        throw IntegrityError("sample '" + id +
                             "': listed in a split but has no label");
      }
      if (!assigned.insert(id).second) {
        throw IntegrityError("sample '" + id + "': appears in two splits");
      }
    }
  }
  for (const auto& id : seen) {
    if (!assigned.count(id)) {
      throw IntegrityError("sample '" + id + "': not assigned to any split");
    }
  }
  return ds;
}

RotationMode ParseRotationMode(std::string_view text) {
  if (text == "none") return RotationMode::kNone;
  if (text == "quarter") return RotationMode::kQuarter;
  if (text == "arbitrary") return RotationMode::kArbitrary;
  throw LookupError("unknown rotation mode '" + std::string(text) +
                    "'; expected none, quarter or arbitrary");
}

Sample RotateSample(const Sample& s, double degrees) {
  Sample out;
  out.id = s.id;
  out.label = s.label;
  out.image = As3d(RotateImage(As4d(s.image), degrees, false));
  out.mask = As3d(RotateImage(As4d(s.mask), degrees, true));
  return out;
}

std::vector<Sample> RotatedTestSet(std::span<const Sample> samples,
                                   RotationMode mode, std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  Rng rng(seed, 0x526F74ULL);
  for (const auto& s : samples) {
    switch (mode) {
      case RotationMode::kNone:
        out.push_back(s);
        break;
      case RotationMode::kQuarter: {
        const int k = static_cast<int>(rng.Below(4));
        out.push_back(k == 0 ? s : RotateSample(s, 90.0 * k));
        break;
      }
      case RotationMode::kArbitrary: {
        Sample r = RotateSample(s, rng.Uniform(0.0, 360.0));
        out.push_back(r.PositivePixels() > 0 ? std::move(r) : s);
        break;
      }
    }
  }
  return out;
}

Image8 RenderOverlay(const Image8& rgb, std::span<const std::uint8_t> pred,
                     std::span<const std::uint8_t> truth) {
  const std::size_t n = static_cast<std::size_t>(rgb.width) * rgb.height;
  if (rgb.channels != 3) throw ValidationError("overlay needs an RGB image");
  if (pred.size() != n) throw ValidationError("overlay: prediction size mismatch");
  if (!truth.empty() && truth.size() != n) {
    throw ValidationError("overlay: ground-truth size mismatch");
  }
  Image8 out = rgb;
  constexpr int kAlphaNum = 1, kAlphaDen = 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (!pred[i]) continue;
    auto* px = &out.pixels[i * 3];
    px[0] = static_cast<std::uint8_t>(px[0] * (kAlphaDen - kAlphaNum) / kAlphaDen);
    px[1] = static_cast<std::uint8_t>(px[1] * (kAlphaDen - kAlphaNum) / kAlphaDen);
    px[2] = static_cast<std::uint8_t>(
        (px[2] * (kAlphaDen - kAlphaNum) + 255 * kAlphaNum) / kAlphaDen);
  }
  if (truth.empty()) return out;
  const int w = rgb.width, h = rgb.height;
  auto on = [&](int y, int x) {
    return y >= 0 && y < h && x >= 0 && x < w &&
           truth[static_cast<std::size_t>(y) * w + x] != 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!on(y, x)) continue;
      const bool interior = (y == 0 || on(y - 1, x)) && (y == h - 1 || on(y + 1, x)) &&
                            (x == 0 || on(y, x - 1)) && (x == w - 1 || on(y, x + 1));
      if (interior) continue;
      auto* px = &out.pixels[(static_cast<std::size_t>(y) * w + x) * 3];
      px[0] = 255;
      px[1] = 0;
      px[2] = 0;
    }
  }
  return out;
}

void StackBatch(std::span<const Sample> samples, Tensor* images, Tensor* masks,
                std::vector<int>* labels) {
  if (samples.empty()) throw ValidationError("StackBatch: empty batch");
  const auto h = samples[0].image.dim(1), w = samples[0].image.dim(2);
  const auto b = static_cast<std::int64_t>(samples.size());
  std::vector<float> img, msk;
  img.reserve(static_cast<std::size_t>(b * 3 * h * w));
  msk.reserve(static_cast<std::size_t>(b * h * w));
  if (labels) labels->clear();
  for (const auto& s : samples) {
    if (s.image.dim(1) != h || s.image.dim(2) != w) {
      throw ValidationError("sample '" + s.id + "': size " +
                            ShapeString(s.image.shape()) +
                            " differs from the rest of the batch");
    }
    auto di = s.image.data();
    img.insert(img.end(), di.begin(), di.end());
    if (masks) {
      auto dm = s.mask.data();
      msk.insert(msk.end(), dm.begin(), dm.end());
    }
    if (labels) labels->push_back(s.label);
  }
  if (images) *images = Tensor({b, 3, h, w}, std::move(img));
  if (masks) *masks = Tensor({b, 1, h, w}, std::move(msk));
}

}  // namespace eqseg
