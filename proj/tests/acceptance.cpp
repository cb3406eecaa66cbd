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

// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   eqseg_acceptance [--workdir DIR] [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "eqseg/checkpoint.hpp"
#include "eqseg/data.hpp"
#include "eqseg/error.hpp"
#include "eqseg/kernels.hpp"
#include "eqseg/layers.hpp"
#include "eqseg/metrics.hpp"
#include "eqseg/model.hpp"
#include "eqseg/train.hpp"
#include "kernel_checks.hpp"
#include "kernel_oracle.hpp"
#include "test_util.hpp"

namespace eqseg {
namespace {

namespace fs = std::filesystem;
using testing::CheckGradients;
using testing::OracleField;
using testing::Project;
using testing::RandomAwayFromZero;
using testing::RandomTensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_workdir;

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome BasisDimensions() {
  const std::vector<std::vector<OracleField>> types{
      {{false}}, {{false}, {false}}, {{true}}, {{true}, {true}},
      {{false}, {true}}, {{true}, {false}}};
  int cases = 0, mismatches = 0;
  std::string first;
  for (int n : {2, 4})
    for (int k : {1, 3})
      for (const auto& in : types)
        for (const auto& out : types) {
          const auto G = GroupSpec::Cyclic(n);
          const int got =
              BuildBasis(testing::MakeType(G, in), testing::MakeType(G, out), k).count;
          const int want = testing::OracleNullity(in, out, n, k);
          ++cases;
          if (got != want) {
            if (!mismatches++) {
              first = " first mismatch C" + std::to_string(n) + " k=" + std::to_string(k) +
                      ": " + std::to_string(got) + " vs " + std::to_string(want);
            }
          }
        }
  return {mismatches == 0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches" + first};
}

// ---------------------------------------------------------------- 2

Outcome ProjectorLaws() {
  double idem = 0, constraint = 0, gram = 0;
  Rng rng(7);
  for (int n : {2, 4, 8}) {
    const auto G = GroupSpec::Cyclic(n);
    for (int k : {1, 3, 5}) {
      if (n == 8 && k != 3) continue;
      for (const auto& [in, out] :
           std::vector<std::pair<FieldType, FieldType>>{
               {FieldType::Trivial(G, 2), FieldType::Regular(G, 1)},
               {FieldType::Regular(G, 1), FieldType::Regular(G, 2)},
               {FieldType::Regular(G, 2), FieldType::Trivial(G, 1)},
               {FieldType(G, {Representation::Trivial(G), Representation::Regular(G)}),
                FieldType::Regular(G, 1)}}) {
        const std::size_t size =
            static_cast<std::size_t>(in.total_dim() * out.total_dim() * k * k);
        std::vector<double> raw(size);
        for (auto& v : raw) v = rng.Uniform(-1, 1);
        const auto p1 = ReynoldsProject(raw, in, out, k);
        const auto p2 = ReynoldsProject(p1, in, out, k);
        idem = std::max(idem, testing::MaxAbsDiff<double>(p1, p2));

        const auto basis = BuildBasis(in, out, k);
        for (int i = 0; i < basis.count; ++i) {
          const auto e = basis.Element(i);
          for (int q = 0; q < 4; ++q) {
            if ((q * n) % 4 != 0) continue;
            const auto g = G.Rotation(90.0 * q);
            constraint = std::max(
                constraint, testing::MaxAbsDiff<double>(
                                testing::ConstraintMap(e, in, out, g, k), e));
          }
          for (int j = 0; j < basis.count; ++j) {
            const auto f = basis.Element(j);
            double dot = 0;
            for (std::size_t t = 0; t < e.size(); ++t) dot += e[t] * f[t];
            gram = std::max(gram, std::abs(dot - (i == j ? 1.0 : 0.0)));
          }
        }
      }
    }
  }
  const bool pass = idem <= 1e-12 && constraint <= 1e-10 && gram <= 1e-10;
  return {pass, "idempotence " + Fmt("%.2e", idem) + ", constraint " + Fmt("%.2e", constraint) +
                    ", gram " + Fmt("%.2e", gram)};
}

// ---------------------------------------------------------------- 3

// Index-level action of a quarter turn q on a [B,C,H,W] map whose channels are
// laid out as `fields` (true = regular field of a C_n group).
std::vector<float> QuarterTurn(std::span<const float> x, std::int64_t batch,
                               const std::vector<bool>& fields, int n, std::int64_t hw,
                               int q) {
  std::int64_t channels = 0;
  for (bool r : fields) channels += r ? n : 1;
  auto spatial = testing::Rot90<float>(x, batch * channels, hw, q);
  std::vector<float> out(spatial.size());
  const std::int64_t plane = hw * hw;
  const int shift = q * n / 4;
  for (std::int64_t b = 0; b < batch; ++b) {
    std::int64_t c0 = 0;
    for (bool r : fields) {
      const int dim = r ? n : 1;
      for (int c = 0; c < dim; ++c) {
        // rho(g) e_h = e_{gh}: channel h moves to h + shift.
        const int dst = r ? (c + shift) % n : c;
        std::copy_n(&spatial[((b * channels) + c0 + c) * plane], plane,
                    &out[((b * channels) + c0 + dst) * plane]);
      }
      c0 += dim;
    }
  }
  return out;
}

Outcome LayerAndModelEquivariance() {
  double layer_err = 0, seg_err = 0, cls_err = 0;
  const int kBatch = 16;
  Rng rng(31);
  for (int n : {4, 8}) {
    const auto G = GroupSpec::Cyclic(n);
    struct LayerCase {
      std::vector<bool> in, out;
    };
    for (const auto& lc : std::vector<LayerCase>{{{false, false, false}, {true, true}},
                                                 {{true, true}, {true, false, true}},
                                                 {{true, false}, {false, false}}}) {
      auto make = [&](const std::vector<bool>& f) {
        std::vector<Representation> reps;
        for (bool r : f) reps.push_back(r ? Representation::Regular(G) : Representation::Trivial(G));
        return FieldType(G, reps);
      };
      EquivariantConv<float> conv(make(lc.in), make(lc.out), 3);
      conv.Init(rng);
      for (auto& b : conv.bias().data()) b = static_cast<float>(rng.Uniform(-1, 1));
      const std::int64_t hw = 17;
      const Tensor x = RandomTensor<float>({kBatch, conv.in_type().total_dim(), hw, hw}, rng);
      NoGradGuard ng;
      const Tensor y = conv.Forward(GeometricTensor<float>(x, conv.in_type())).tensor;
      for (int q = 1; q < 4; ++q) {
        const Tensor xr(x.shape(), QuarterTurn(x.data(), kBatch, lc.in, n, hw, q));
        const Tensor yr = conv.Forward(GeometricTensor<float>(xr, conv.in_type())).tensor;
        layer_err = std::max(layer_err, testing::MaxAbsDiff<float>(
                                            yr.data(), QuarterTurn(y.data(), kBatch, lc.out, n, hw, q)));
      }
    }

    ModelConfig cfg;
    cfg.group_n = n;
    cfg.head = Head::kInvariantPool;
    auto model = UNetModel<float>::Build(cfg, 100 + n);
    // Give BN non-trivial running statistics before evaluating.
    {
      NoGradGuard ng;
      for (int i = 0; i < 3; ++i) {
        model.Forward(RandomTensor<float>({4, 3, 64, 64}, rng, 0, 1), Mode::kTrain);
      }
    }
    const Tensor x = RandomTensor<float>({kBatch, 3, 64, 64}, rng, 0, 1);
    NoGradGuard ng;
    const auto base = model.Forward(x, Mode::kEval);
    for (int q = 1; q < 4; ++q) {
      const Tensor xr(x.shape(), QuarterTurn(x.data(), kBatch, {false, false, false}, n, 64, q));
      const auto rot = model.Forward(xr, Mode::kEval);
      seg_err = std::max(seg_err, testing::MaxAbsDiff<float>(
                                      rot.seg_logits.data(),
                                      QuarterTurn(base.seg_logits.data(), kBatch, {false}, n, 64, q)));
      cls_err = std::max(cls_err, testing::MaxAbsDiff<float>(rot.class_logits.data(),
                                                             base.class_logits.data()));
    }
  }
  const bool pass = layer_err <= 1e-4 && seg_err <= 1e-4 && cls_err <= 1e-4;
  return {pass, "layers " + Fmt("%.2e", layer_err) + ", U-Net seg " + Fmt("%.2e", seg_err) +
                    ", class " + Fmt("%.2e", cls_err) + " over 16 inputs, C4 and C8"};
}

// ---------------------------------------------------------------- 4

Outcome GradientChecks() {
  const auto G = GroupSpec::Cyclic(4);
  const auto reg2 = FieldType::Regular(G, 2);
  const auto mixed = FieldType(G, {Representation::Regular(G), Representation::Trivial(G)});
  Rng rng(77);
  std::vector<std::pair<std::string, testing::GradCheckResult>> results;
  auto run = [&](const std::string& name, auto fn, std::vector<Tensor64> inputs) {
    results.emplace_back(name, CheckGradients(fn, std::move(inputs)));
  };

  {
    EquivariantConv<double> conv(FieldType::Trivial(G, 2), reg2, 3);
    conv.Init(rng);
    run("conv trivial->regular",
        [&](const std::vector<Tensor64>& in) {
          return Project(conv.Forward(GeometricTensor<double>(in[0], conv.in_type())).tensor);
        },
        {RandomTensor<double>({2, 2, 6, 6}, rng), conv.coeffs(), conv.bias()});
  }
  {
    EquivariantConv<double> conv(reg2, mixed, 3);
    conv.Init(rng);
    run("conv regular->mixed",
        [&](const std::vector<Tensor64>& in) {
          return Project(conv.Forward(GeometricTensor<double>(in[0], reg2)).tensor);
        },
        {RandomTensor<double>({2, 8, 5, 5}, rng), conv.coeffs(), conv.bias()});
  }
  {
    FieldBatchNorm<double> bn(mixed);
    for (auto& g : bn.gamma().data()) g = rng.Uniform(0.5, 1.5);
    run("field batchnorm",
        [&](const std::vector<Tensor64>& in) {
          return Project(bn.Forward(GeometricTensor<double>(in[0], mixed), Mode::kTrain).tensor);
        },
        {RandomTensor<double>({3, 5, 4, 4}, rng), bn.gamma(), bn.beta()});
  }
  run("group pool",
      [&](const std::vector<Tensor64>& in) {
        return Project(GroupPool(GeometricTensor<double>(in[0], reg2)).tensor);
      },
      {RandomTensor<double>({2, 8, 3, 3}, rng)});
  run("relu",
      [&](const std::vector<Tensor64>& in) {
        return Project(ReluField(GeometricTensor<double>(in[0], reg2)).tensor);
      },
      {RandomAwayFromZero<double>({2, 8, 3, 3}, rng)});
  run("max pool",
      [&](const std::vector<Tensor64>& in) {
        return Project(MaxPoolField(GeometricTensor<double>(in[0], reg2)).tensor);
      },
      {RandomTensor<double>({2, 8, 4, 4}, rng)});
  run("upsample",
      [&](const std::vector<Tensor64>& in) {
        return Project(UpsampleField(GeometricTensor<double>(in[0], reg2)).tensor);
      },
      {RandomTensor<double>({2, 8, 3, 3}, rng)});
  run("concat",
      [&](const std::vector<Tensor64>& in) {
        return Project(ConcatFields(GeometricTensor<double>(in[0], reg2),
                                    GeometricTensor<double>(in[1], mixed))
                           .tensor);
      },
      {RandomTensor<double>({2, 8, 3, 3}, rng), RandomTensor<double>({2, 5, 3, 3}, rng)});
  {
    FieldDropout<double> drop(reg2, 0.3);
    run("field dropout",
        [&](const std::vector<Tensor64>& in) {
          Rng fixed(5);
          return Project(drop.Forward(GeometricTensor<double>(in[0], reg2), Mode::kTrain, fixed)
                             .tensor);
        },
        {RandomTensor<double>({2, 8, 4, 4}, rng)});
  }
  {
    ConvBlock<double> block(FieldType::Trivial(G, 3), reg2, 3, 0.0);
    block.Init(rng);
    std::vector<ParamRef<double>> params;
    block.CollectParams("b", params);
    std::vector<Tensor64> inputs{RandomTensor<double>({2, 3, 6, 6}, rng)};
    for (const auto& p : params) inputs.push_back(p.tensor);
    Rng unused(0);
    run("conv block",
        [&](const std::vector<Tensor64>& in) {
          return Project(block.Forward(GeometricTensor<double>(in[0], block.in_type()),
                                       Mode::kTrain, unused)
                             .tensor);
        },
        inputs);
  }
  run("linear",
      [&](const std::vector<Tensor64>& in) {
        return Project(ops::MatMulBias(in[0], in[1], in[2]));
      },
      {RandomTensor<double>({3, 5}, rng), RandomTensor<double>({4, 5}, rng),
       RandomTensor<double>({4}, rng)});
  {
    std::vector<double> t(24);
    for (auto& v : t) v = rng.Bernoulli(0.4) ? 1.0 : 0.0;
    const Tensor64 target({2, 1, 3, 4}, t);
    run("bce loss",
        [&](const std::vector<Tensor64>& in) { return ops::BceWithLogits(in[0], target); },
        {RandomTensor<double>({2, 1, 3, 4}, rng, -3, 3)});
    const std::vector<int> labels{0, 3, 2};
    run("cross entropy",
        [&](const std::vector<Tensor64>& in) { return ops::SoftmaxCrossEntropy(in[0], labels); },
        {RandomTensor<double>({3, 4}, rng, -3, 3)});
  }
  {
    ModelConfig cfg;
    cfg.group_n = 4;
    cfg.image_size = 16;
    cfg.widths = {4, 4, 4, 8, 8};
    cfg.mlp_hidden = {6, 5};
    cfg.dropout_p = 0.0;
    auto model = UNetModel<double>::Build(cfg, 12);
    const auto x = RandomTensor<double>({2, 3, 16, 16}, rng, 0, 1);
    std::vector<double> mask(2 * 16 * 16);
    for (auto& m : mask) m = rng.Bernoulli(0.3) ? 1.0 : 0.0;
    const Tensor64 target({2, 1, 16, 16}, mask);
    const std::vector<int> labels{1, 3};
    std::vector<Tensor64> inputs;
    for (const auto& p : model.Params()) inputs.push_back(p.tensor);
    run("full pipeline",
        [&](const std::vector<Tensor64>&) {
          const auto out = model.Forward(x, Mode::kTrain);
          return ops::Add(ops::BceWithLogits(out.seg_logits, target),
                          ops::SoftmaxCrossEntropy(out.class_logits, labels));
        },
        inputs);
  }

  bool pass = true;
  double worst = 0;
  std::string worst_name, empty;
  for (const auto& [name, r] : results) {
    if (r.checked == 0) {
      pass = false;
      empty += " " + name;
    }
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = name;
    }
  }
  pass = pass && worst <= 1e-4;
  return {pass, std::to_string(results.size()) + " checks, worst rel. error " + Fmt("%.2e", worst) +
                    " (" + worst_name + ")" + (empty.empty() ? "" : "; nothing checked:" + empty)};
}

// ---------------------------------------------------------------- 5

struct VariantRun {
  double train_acc = 0, test_acc = 0, rotated_acc = 0;
  double seconds = 0;
};

VariantRun TrainVariant(Variant v, const Dataset& data, const std::string& data_dir) {
  TrainConfig cfg;
  cfg.model.variant = v;
  cfg.model.widths = {16, 16, 32, 64, 64};
  cfg.model.dropout_p = 0.0;
  cfg.epochs = 20;
  cfg.seed = 2026;
  cfg.data_dir = data_dir;
  cfg.out_dir = (g_workdir / ("train_" + VariantName(v))).string();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = Train(cfg, data);
  VariantRun out;
  out.train_acc = r.final_train.classification_accuracy;
  auto model = RestoreModel(Checkpoint::Load(r.best_checkpoint));
  const auto test = data.Subset("test");
  out.test_acc = Evaluate(model, test, cfg.seg_aggregation).classification_accuracy;
  const auto rotated = RotatedTestSet(test, RotationMode::kQuarter, cfg.seed);
  out.rotated_acc = Evaluate(model, rotated, cfg.seg_aggregation).classification_accuracy;
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  %-11s train %.4f  test %.4f  rotated test %.4f  gap %+.2f pp  (%.0f s)\n",
              VariantName(v).c_str(), out.train_acc, out.test_acc, out.rotated_acc,
              100 * (out.rotated_acc - out.test_acc), out.seconds);
  std::fflush(stdout);
  return out;
}

Outcome TrainingComparison() {
  const fs::path dir = g_workdir / "synthetic400";
  fs::remove_all(dir);
  GenerateSynthetic(dir.string(), 400, 64, 2026);
  const Dataset data = LoadDataset(dir.string());
  const VariantRun cnn = TrainVariant(Variant::kCnn, data, dir.string());
  const VariantRun eq = TrainVariant(Variant::kEquivariant, data, dir.string());
  const double gap = std::abs(eq.rotated_acc - eq.test_acc);
  const bool pass = cnn.train_acc >= 0.9 && eq.train_acc >= 0.9 && gap <= 0.02;
  return {pass, "train acc cnn " + Fmt("%.3f", cnn.train_acc) + ", equivariant " +
                    Fmt("%.3f", eq.train_acc) + "; equivariant rotation gap " +
                    Fmt("%.1f", 100 * gap) + " pp, cnn gap " +
                    Fmt("%.1f", 100 * std::abs(cnn.rotated_acc - cnn.test_acc)) + " pp"};
}

// ---------------------------------------------------------------- 6

Outcome ParameterEfficiency() {
  ModelConfig eq;
  eq.group_n = 8;
  ModelConfig cnn = eq;
  cnn.variant = Variant::kCnn;
  const auto n_eq = UNetModel<float>::Build(eq, 0).ParamCount();
  const auto n_cnn = UNetModel<float>::Build(cnn, 0).ParamCount();
  return {n_eq < n_cnn,
          "C8 " + std::to_string(n_eq) + " vs cnn " + std::to_string(n_cnn) + " parameters"};
}

// ---------------------------------------------------------------- 7

Outcome MetricOracles() {
  Rng rng(404);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.Below(500));
    std::vector<std::uint8_t> pred(n), truth(n);
    std::vector<int> cp(n), cl(n);
    const double p_pos = rng.Uniform(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      truth[i] = rng.Bernoulli(p_pos);
      pred[i] = rng.Bernoulli(0.5);
      cp[i] = static_cast<int>(rng.Below(4));
      cl[i] = static_cast<int>(rng.Below(4));
    }
    truth[rng.Below(n)] = 1;
    std::int64_t tp = 0, fn = 0, tn = 0, fp = 0, hits = 0;
    for (int i = 0; i < n; ++i) {
      if (truth[i]) {
        pred[i] ? ++tp : ++fn;
      } else {
        pred[i] ? ++fp : ++tn;
      }
      hits += cp[i] == cl[i];
    }
    const double pos = static_cast<double>(tp + fn), neg = static_cast<double>(tn + fp);
    const double want_bal =
        neg == 0 ? tp / pos : (tp * neg + tn * pos) / (2.0 * pos * neg);
    if (BalancedSegAccuracy(pred, truth) != want_bal) ++mismatches;
    if (ClassificationAccuracy(cp, cl) != static_cast<double>(hits) / n) ++mismatches;
  }
  const double worked = BalancedSegAccuracy(std::vector<std::uint8_t>{1, 0, 0, 0},
                                            std::vector<std::uint8_t>{1, 1, 0, 0});
  return {mismatches == 0 && worked == 0.75,
          "1000 cases, " + std::to_string(mismatches) + " mismatches; worked example " +
              Fmt("%.4f", worked)};
}

// ---------------------------------------------------------------- 8

std::string ReadBytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome Reproducibility() {
  const fs::path data_dir = g_workdir / "repro_data";
  fs::remove_all(data_dir);
  GenerateSynthetic(data_dir.string(), 24, 32, 8);
  TrainConfig cfg;
  cfg.model.image_size = 32;
  cfg.model.group_n = 4;
  cfg.model.widths = {4, 8, 8, 16, 16};
  cfg.model.mlp_hidden = {16, 8};
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 99;
  cfg.data_dir = data_dir.string();
  cfg.out_dir = (g_workdir / "repro_run").string();
  const std::vector<std::string> files{"checkpoint.eqsg", "last.eqsg", "train.log",
                                       "metrics.txt"};
  std::vector<std::string> first;
  std::vector<std::string> lines_a, lines_b;
  fs::remove_all(cfg.out_dir);
  Train(cfg, [&](const std::string& l) { lines_a.push_back(l); });
  for (const auto& f : files) first.push_back(ReadBytes(fs::path(cfg.out_dir) / f));
  fs::remove_all(cfg.out_dir);
  Train(cfg, [&](const std::string& l) { lines_b.push_back(l); });
  int differing = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string again = ReadBytes(fs::path(cfg.out_dir) / files[i]);
    if (again.empty() || again != first[i]) ++differing;
  }
  const bool same_log = lines_a == lines_b && !lines_a.empty();
  return {differing == 0 && same_log,
          std::to_string(files.size() - differing) + "/" + std::to_string(files.size()) +
              " output files identical, streamed log " + (same_log ? "identical" : "differs")};
}

}  // namespace
}  // namespace eqseg

int main(int argc, char** argv) {
  using namespace eqseg;
  std::set<int> only;
  fs::path workdir = fs::temp_directory_path() / "eqseg_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      workdir = argv[++i];
    } else {
      only.insert(std::atoi(a.c_str()));
    }
  }
  fs::create_directories(workdir);
  g_workdir = workdir;

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"kernel basis dimension matches brute-force null space", BasisDimensions},
      {"projector idempotence, constraint and orthonormality", ProjectorLaws},
      {"layer and U-Net rotation equivariance", LayerAndModelEquivariance},
      {"finite-difference gradient checks", GradientChecks},
      {"desk-scale training comparison", TrainingComparison},
      {"parameter efficiency", ParameterEfficiency},
      {"metric oracles", MetricOracles},
      {"reproducibility", Reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL",
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
