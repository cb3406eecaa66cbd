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

// Command-line front end over the eqseg C API.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eqseg/eqseg.h"

namespace {

constexpr double kEquivarianceTolerance = 1e-4;

int Report(eqseg_status s, const std::string& context) {
  if (s == EQSEG_OK) return 0;
  std::fprintf(stderr, "eqseg: %s: %s: %s\n", context.c_str(),
               eqseg_status_name(s), eqseg_last_error());
  return 1;
}

struct ModelDeleter {
  void operator()(eqseg_model* m) const { eqseg_model_free(m); }
};
using ModelPtr = std::unique_ptr<eqseg_model, ModelDeleter>;

struct CString {
  char* p = nullptr;
  ~CString() { eqseg_string_free(p); }
};

int LoadModel(const std::string& path, ModelPtr* out) {
  eqseg_model* m = nullptr;
  const eqseg_status s = eqseg_model_load(path.c_str(), &m);
  out->reset(m);
  return Report(s, "loading " + path);
}

std::vector<double> ParseAngles(const std::string& text) {
  std::vector<double> angles;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string tok = text.substr(pos, comma - pos);
    if (!tok.empty()) {
      std::size_t used = 0;
      const double a = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      angles.push_back(a);
    }
    pos = comma + 1;
  }
  return angles;
}

bool IsQuarterTurn(double a) {
  const double q = a / 90.0;
  return std::abs(q - std::round(q)) < 1e-12;
}

void PrintLine(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-equivariant U-Net for deforestation driver "
               "classification and segmentation"};
  app.require_subcommand(1);

  int gen_n = 400, gen_size = 64;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen->add_option("--n", gen_n, "Number of samples")->capture_default_str();
  gen->add_option("--size", gen_size, "Image height and width")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::string train_config;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", train_config, "key = value config file")
      ->required();

  std::string ev_ckpt, ev_data, ev_split = "test", ev_rot = "none",
                        ev_agg = "per_sample", ev_report;
  std::uint64_t ev_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  eval->add_option("--checkpoint", ev_ckpt)->required();
  eval->add_option("--data", ev_data)->required();
  eval->add_option("--split", ev_split)->capture_default_str();
  eval->add_option("--rotated", ev_rot, "none, quarter or arbitrary")
      ->capture_default_str();
  eval->add_option("--seed", ev_seed, "Seed for rotated test draws")
      ->capture_default_str();
  eval->add_option("--seg-aggregation", ev_agg, "per_sample or pooled")
      ->capture_default_str();
  eval->add_option("--report", ev_report, "Write key = value metrics here");

  std::string eq_ckpt, eq_data, eq_angles = "90,180,270";
  int eq_n = 16;
  std::uint64_t eq_seed = 0;
  auto* check = app.add_subcommand("check-equivariance",
                                   "Measure rotation commutation errors");
  check->add_option("--checkpoint", eq_ckpt)->required();
  check->add_option("--angles", eq_angles, "Comma-separated degrees")
      ->capture_default_str();
  check->add_option("--n", eq_n, "Number of images")->capture_default_str();
  check->add_option("--data", eq_data, "Dataset to draw images from (default: noise)");
  check->add_option("--seed", eq_seed)->capture_default_str();

  std::string pr_ckpt, pr_image, pr_out, pr_mask, pr_mask_out;
  auto* predict = app.add_subcommand("predict", "Render a prediction overlay");
  predict->add_option("--checkpoint", pr_ckpt)->required();
  predict->add_option("--image", pr_image, "Input RGB PNG")->required();
  predict->add_option("--out", pr_out, "Overlay PNG to write")->required();
  predict->add_option("--mask", pr_mask, "Ground-truth mask PNG");
  predict->add_option("--mask-out", pr_mask_out,
                      "Predicted mask PNG (default: <out>.mask.png)");

  CLI11_PARSE(app, argc, argv);

  if (*gen) {
    const eqseg_status s =
        eqseg_generate_synthetic(gen_out.c_str(), gen_n, gen_size, gen_seed);
    if (s != EQSEG_OK) return Report(s, "gen-data " + gen_out);
    std::printf("wrote %d samples (%dx%d, seed %llu) to %s\n", gen_n, gen_size,
                gen_size, static_cast<unsigned long long>(gen_seed),
                gen_out.c_str());
    return 0;
  }

  if (*train) {
    return Report(eqseg_train(train_config.c_str(), PrintLine, nullptr), "train");
  }

  if (*eval) {
    ModelPtr model;
    if (int rc = LoadModel(ev_ckpt, &model)) return rc;
    CString table, kv;
    const eqseg_status s =
        eqseg_evaluate(model.get(), ev_data.c_str(), ev_split.c_str(), ev_rot.c_str(),
                       ev_seed, ev_agg.c_str(), &table.p, &kv.p);
    if (s != EQSEG_OK) return Report(s, "eval");
    std::printf("%s", table.p);
    if (!ev_report.empty()) {
      std::ofstream f(ev_report, std::ios::binary);
      f << kv.p;
      if (!f) {
        std::fprintf(stderr, "eqseg: eval: cannot write %s\n", ev_report.c_str());
        return 1;
      }
    }
    return 0;
  }

  if (*check) {
    std::vector<double> angles;
    try {
      angles = ParseAngles(eq_angles);
    } catch (const std::exception&) {
      std::fprintf(stderr, "eqseg: check-equivariance: bad --angles '%s'\n",
                   eq_angles.c_str());
      return 1;
    }
    ModelPtr model;
    if (int rc = LoadModel(eq_ckpt, &model)) return rc;
    int equivariant = 0;
    eqseg_model_is_equivariant(model.get(), &equivariant);
    std::vector<double> seg(angles.size()), cls(angles.size());
    const eqseg_status s = eqseg_check_equivariance(
        model.get(), eq_data.empty() ? nullptr : eq_data.c_str(), angles.data(),
        angles.size(), eq_n, eq_seed, seg.data(), cls.data());
    if (s != EQSEG_OK) return Report(s, "check-equivariance");
    std::printf("%-10s %14s %14s\n", "angle", "seg_error", "class_error");
    bool ok = true;
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const bool checked = equivariant && IsQuarterTurn(angles[i]);
      const bool pass = !checked || seg[i] <= kEquivarianceTolerance;
      ok = ok && pass;
      std::printf("%-10g %14.3e %14.3e%s\n", angles[i], seg[i], cls[i],
                  checked ? (pass ? "  ok" : "  FAIL") : "");
    }
    if (!ok) {
      std::fprintf(stderr,
                   "eqseg: check-equivariance: error above %.0e at a 90-degree "
                   "multiple\n",
                   kEquivarianceTolerance);
      return 1;
    }
    return 0;
  }

  if (*predict) {
    ModelPtr model;
    if (int rc = LoadModel(pr_ckpt, &model)) return rc;
    if (pr_mask_out.empty()) {
      const auto dot = pr_out.rfind('.');
      pr_mask_out = (dot == std::string::npos ? pr_out : pr_out.substr(0, dot)) +
                    ".mask.png";
    }
    int cls = 0;
    const eqseg_status s = eqseg_predict_png(
        model.get(), pr_image.c_str(), pr_mask.empty() ? nullptr : pr_mask.c_str(),
        pr_out.c_str(), pr_mask_out.c_str(), &cls);
    if (s != EQSEG_OK) return Report(s, "predict");
    std::printf("class %d (%s)\noverlay %s\nmask %s\n", cls, eqseg_class_name(cls),
                pr_out.c_str(), pr_mask_out.c_str());
    return 0;
  }
  return 0;
}
