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

#include "eqseg/eqseg.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "eqseg/checkpoint.hpp"
#include "eqseg/data.hpp"
#include "eqseg/error.hpp"
#include "eqseg/metrics.hpp"
#include "eqseg/model.hpp"
#include "eqseg/rng.hpp"
#include "eqseg/train.hpp"

struct eqseg_model {
  eqseg::UNetModel<float> net;
  std::string config_text;
  std::string metrics_text;
};

namespace {

thread_local std::string g_last_error;

eqseg_status Fail(eqseg_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
eqseg_status Guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return EQSEG_OK;
  } catch (const eqseg::Error& e) {
    return Fail(static_cast<eqseg_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(EQSEG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(EQSEG_ERR_INTERNAL, e.what());
  }
}

char* Dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void Require(bool ok, const char* what) {
  if (!ok) throw eqseg::ValidationError(std::string("invalid argument: ") + what);
}

}  // namespace

extern "C" {

const char* eqseg_last_error(void) { return g_last_error.c_str(); }

const char* eqseg_status_name(eqseg_status status) {
  switch (status) {
    case EQSEG_OK: return "ok";
    case EQSEG_ERR_VALIDATION: return "validation error";
    case EQSEG_ERR_GEOMETRY: return "geometry error";
    case EQSEG_ERR_INDEX: return "index error";
    case EQSEG_ERR_LOOKUP: return "lookup error";
    case EQSEG_ERR_INTEGRITY: return "integrity error";
    case EQSEG_ERR_IO: return "I/O error";
    case EQSEG_ERR_FORMAT: return "format error";
    case EQSEG_ERR_CONFIG: return "config error";
    case EQSEG_ERR_NUMERIC: return "numeric error";
    case EQSEG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EQSEG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void eqseg_string_free(char* s) { std::free(s); }

eqseg_status eqseg_generate_synthetic(const char* dir, int n, int size,
                                      uint64_t seed) {
  if (dir == nullptr) return Fail(EQSEG_ERR_INVALID_ARGUMENT, "dir is NULL");
  return Guard([&] { eqseg::GenerateSynthetic(dir, n, size, seed); });
}

eqseg_status eqseg_train(const char* config_path, eqseg_log_fn log, void* user) {
  if (config_path == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "config_path is NULL");
  }
  return Guard([&] {
    const auto cfg = eqseg::TrainConfig::Load(config_path);
    eqseg::LogFn fn;
    if (log != nullptr) fn = [&](const std::string& line) { log(line.c_str(), user); };
    eqseg::Train(cfg, fn);
  });
}

eqseg_status eqseg_model_load(const char* checkpoint_path, eqseg_model** out) {
  if (checkpoint_path == nullptr || out == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  *out = nullptr;
  return Guard([&] {
    const auto ckpt = eqseg::Checkpoint::Load(checkpoint_path);
    *out = new eqseg_model{eqseg::RestoreModel(ckpt), ckpt.config_text,
                           ckpt.metrics_text};
  });
}

void eqseg_model_free(eqseg_model* model) { delete model; }

eqseg_status eqseg_model_param_count(const eqseg_model* model, int64_t* out) {
  if (model == nullptr || out == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] { *out = model->net.ParamCount(); });
}

eqseg_status eqseg_model_is_equivariant(const eqseg_model* model, int* out) {
  if (model == nullptr || out == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] {
    *out = model->net.config().variant == eqseg::Variant::kEquivariant;
  });
}

eqseg_status eqseg_model_image_size(const eqseg_model* model, int* out) {
  if (model == nullptr || out == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] { *out = model->net.config().image_size; });
}

eqseg_status eqseg_model_describe(const eqseg_model* model, char** config_text,
                                  char** metrics_text) {
  if (model == nullptr) return Fail(EQSEG_ERR_INVALID_ARGUMENT, "model is NULL");
  return Guard([&] {
    if (config_text) *config_text = Dup(model->config_text);
    if (metrics_text) *metrics_text = Dup(model->metrics_text);
  });
}

eqseg_status eqseg_evaluate(eqseg_model* model, const char* data_dir,
                            const char* split, const char* rotation,
                            uint64_t seed, const char* aggregation, char** table,
                            char** key_values) {
  if (model == nullptr || data_dir == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] {
    const std::string split_name = split ? split : "test";
    const std::string rot_name = rotation ? rotation : "none";
    const auto mode = eqseg::ParseRotationMode(rot_name);
    const auto agg = eqseg::ParseSegAggregation(aggregation ? aggregation : "per_sample");
    const auto data = eqseg::LoadDataset(data_dir);
    auto samples = data.Subset(split_name);
    if (samples.empty()) {
      throw eqseg::ValidationError("split '" + split_name + "' is empty");
    }
    samples = eqseg::RotatedTestSet(samples, mode, seed);
    auto report = eqseg::Evaluate(model->net, samples, agg);
    report.split = split_name;
    report.rotation = rot_name;
    if (table) *table = Dup(report.FormatTable());
    if (key_values) *key_values = Dup(report.FormatKeyValues());
  });
}

eqseg_status eqseg_check_equivariance(eqseg_model* model, const char* data_dir,
                                      const double* angles, size_t n_angles,
                                      int n_images, uint64_t seed,
                                      double* seg_errors, double* class_errors) {
  if (model == nullptr || (n_angles > 0 && angles == nullptr)) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] {
    Require(n_images >= 1, "n_images must be >= 1");
    const int size = model->net.config().image_size;
    eqseg::Rng rng(seed, 0x4571ULL);
    eqseg::Tensor images;
    if (data_dir != nullptr) {
      const auto data = eqseg::LoadDataset(data_dir);
      std::vector<eqseg::Sample> picked;
      for (int i = 0; i < n_images; ++i) {
        picked.push_back(data.samples[rng.Below(data.samples.size())]);
      }
      eqseg::StackBatch(picked, &images, nullptr, nullptr);
    } else {
      std::vector<float> v(static_cast<std::size_t>(n_images) * 3 * size * size);
      for (float& x : v) x = static_cast<float>(rng.Uniform());
      images = eqseg::Tensor({n_images, 3, size, size}, std::move(v));
    }
    const std::span<const double> a(angles, n_angles);
    const auto seg = eqseg::EquivarianceError(model->net, images, a);
    const auto cls = eqseg::InvarianceError(model->net, images, a);
    for (std::size_t i = 0; i < n_angles; ++i) {
      if (seg_errors) seg_errors[i] = seg.at(angles[i]);
      if (class_errors) class_errors[i] = cls.at(angles[i]);
    }
  });
}

eqseg_status eqseg_predict(eqseg_model* model, const float* image_chw, int size,
                           uint8_t* mask_out, int* class_out, float* probs_out) {
  if (model == nullptr || image_chw == nullptr || mask_out == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] {
    const int expected = model->net.config().image_size;
    if (size != expected) {
      throw eqseg::ValidationError("image is " + std::to_string(size) + "x" +
                                   std::to_string(size) + " but the model expects " +
                                   std::to_string(expected) + "x" +
                                   std::to_string(expected));
    }
    const std::size_t n = static_cast<std::size_t>(3) * size * size;
    eqseg::NoGradGuard no_grad;
    eqseg::Tensor x({1, 3, size, size}, std::vector<float>(image_chw, image_chw + n));
    const auto out = model->net.Forward(x, eqseg::Mode::kEval);
    const auto mask = eqseg::ThresholdLogits<float>(out.seg_logits.data());
    std::memcpy(mask_out, mask.data(), mask.size());
    auto cl = out.class_logits.data();
    if (class_out) *class_out = eqseg::ArgMax<float>(cl);
    if (probs_out) {
      double mx = cl[0], z = 0;
      for (float v : cl) mx = std::max<double>(mx, v);
      for (float v : cl) z += std::exp(v - mx);
      for (std::size_t k = 0; k < cl.size(); ++k) {
        probs_out[k] = static_cast<float>(std::exp(cl[k] - mx) / z);
      }
    }
  });
}

eqseg_status eqseg_predict_png(eqseg_model* model, const char* image_png,
                               const char* truth_png, const char* overlay_out,
                               const char* mask_out, int* class_out) {
  if (model == nullptr || image_png == nullptr) {
    return Fail(EQSEG_ERR_INVALID_ARGUMENT, "NULL argument");
  }
  return Guard([&] {
    const eqseg::Image8 rgb = eqseg::ReadPng(image_png, 3);
    if (rgb.width != rgb.height) {
      throw eqseg::ValidationError(std::string(image_png) + " is not square");
    }
    const eqseg::Tensor x = eqseg::ImageToTensor(rgb);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(rgb.width) * rgb.height);
    int cls = 0;
    const eqseg_status s =
        eqseg_predict(model, x.data().data(), rgb.width, mask.data(), &cls, nullptr);
    if (s != EQSEG_OK) throw eqseg::Error(static_cast<eqseg::ErrorCode>(s), g_last_error);
    std::vector<std::uint8_t> truth;
    if (truth_png != nullptr) {
      eqseg::Image8 t = eqseg::ReadPng(truth_png, 1);
      if (t.width != rgb.width || t.height != rgb.height) {
        throw eqseg::ValidationError(std::string(truth_png) +
                                     " differs in size from " + image_png);
      }
      for (auto p : t.pixels) truth.push_back(p > 127);
    }
    if (overlay_out != nullptr) {
      eqseg::WritePng(overlay_out, eqseg::RenderOverlay(rgb, mask, truth));
    }
    if (mask_out != nullptr) {
      eqseg::Image8 m{rgb.width, rgb.height, 1, {}};
      for (auto p : mask) m.pixels.push_back(p ? 255 : 0);
      eqseg::WritePng(mask_out, m);
    }
    if (class_out) *class_out = cls;
  });
}

const char* eqseg_class_name(int id) {
  if (id < 0 || id >= eqseg::kNumDriverGroups) return nullptr;
  return eqseg::DriverGroupName(id).data();
}

}  // extern "C"
