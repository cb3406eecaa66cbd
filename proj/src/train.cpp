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

#include "eqseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "eqseg/checkpoint.hpp"
#include "eqseg/error.hpp"
#include "eqseg/ops.hpp"
#include "eqseg/rng.hpp"

namespace eqseg {
namespace {

namespace fs = std::filesystem;

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void TrainConfig::Validate() const {
  model.Validate();
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("beta1 must be in [0,1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must be in [0,1)");
  if (!(adam_eps > 0)) throw ConfigError("adam_eps must be > 0");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
}

TrainConfig TrainConfig::FromKeyValues(const KeyValues& kv) {
  TrainConfig c;
  c.model = ModelConfig::FromKeyValues(kv);
  c.learning_rate = kv.GetDouble("learning_rate", c.learning_rate);
  c.beta1 = kv.GetDouble("beta1", c.beta1);
  c.beta2 = kv.GetDouble("beta2", c.beta2);
  c.adam_eps = kv.GetDouble("adam_eps", c.adam_eps);
  c.weight_decay = kv.GetDouble("weight_decay", c.weight_decay);
  c.epochs = static_cast<int>(kv.GetInt("epochs", c.epochs));
  c.batch_size = static_cast<int>(kv.GetInt("batch_size", c.batch_size));
  c.lambda = kv.GetDouble("lambda", c.lambda);
  const std::int64_t seed = kv.GetInt("seed", 0);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.data_dir = kv.GetString("data", "");
  c.out_dir = kv.GetString("out", "");
  c.seg_aggregation = ParseSegAggregation(
      kv.GetString("seg_aggregation", SegAggregationName(c.seg_aggregation)));
  const auto unused = kv.UnusedKeys();
  if (!unused.empty()) {
    std::string msg = "unknown config key(s):";
    for (const auto& k : unused) msg += " " + k;
    throw ConfigError(msg);
  }
  c.Validate();
  return c;
}

TrainConfig TrainConfig::Load(const std::string& path) {
  return FromKeyValues(KeyValues::Load(path));
}

KeyValues TrainConfig::ToKeyValues() const {
  KeyValues kv;
  model.ToKeyValues(kv);
  kv.Set("learning_rate", FormatDouble(learning_rate));
  kv.Set("beta1", FormatDouble(beta1));
  kv.Set("beta2", FormatDouble(beta2));
  kv.Set("adam_eps", FormatDouble(adam_eps));
  kv.Set("weight_decay", FormatDouble(weight_decay));
  kv.Set("epochs", std::to_string(epochs));
  kv.Set("batch_size", std::to_string(batch_size));
  kv.Set("lambda", FormatDouble(lambda));
  kv.Set("seed", std::to_string(seed));
  kv.Set("data", data_dir);
  kv.Set("out", out_dir);
  kv.Set("seg_aggregation", SegAggregationName(seg_aggregation));
  return kv;
}

Adam::Adam(std::vector<ParamRef<float>> params, double lr, double beta1,
           double beta2, double eps, double weight_decay)
    : params_(std::move(params)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      wd_(weight_decay) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
  }
}

void Adam::ZeroGrad() {
  for (auto& p : params_) p.tensor.ZeroGrad();
}

void Adam::Step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].tensor;
    auto w = p.data();
    auto g = p.grad().data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      m[j] = beta1_ * m[j] + (1 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1 - beta2_) * gj * gj;
      const double step = lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
      w[j] = static_cast<float>(w[j] - step - lr_ * wd_ * w[j]);
    }
  }
}

LossParts ComputeLoss(const ModelOutput<float>& out, const Tensor& masks,
                      std::span<const int> labels, double lambda) {
  LossParts parts;
  Tensor seg = ops::BceWithLogits(out.seg_logits, masks);
  parts.seg = seg.item();
  if (lambda == 0.0) {
    parts.total = seg;
    return parts;
  }
  Tensor cls = ops::SoftmaxCrossEntropy(out.class_logits, labels);
  parts.cls = cls.item();
  parts.total = ops::Add(seg, ops::Scale(cls, static_cast<float>(lambda)));
  return parts;
}

TrainResult Train(const TrainConfig& cfg, const LogFn& log) {
  if (cfg.data_dir.empty()) throw ConfigError("config key 'data' is required");
  return Train(cfg, LoadDataset(cfg.data_dir), log);
}

TrainResult Train(const TrainConfig& cfg, const Dataset& data, const LogFn& log) {
  cfg.Validate();
  if (cfg.out_dir.empty()) throw ConfigError("config key 'out' is required");
  const fs::path out_dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + cfg.out_dir);
  }

  const std::vector<Sample> train = data.Subset("train");
  const std::vector<Sample> val = data.Subset("val");
  if (train.empty()) throw ValidationError("train split is empty");
  for (const auto& s : train) {
    if (s.image.dim(1) != cfg.model.image_size || s.image.dim(2) != cfg.model.image_size) {
      throw ValidationError("sample '" + s.id + "' is " + ShapeString(s.image.shape()) +
                            " but image_size is " + std::to_string(cfg.model.image_size));
    }
  }

  std::string log_text;
  auto emit = [&](const std::string& line) {
    log_text += line + "\n";
    if (log) log(line);
  };
  const std::string config_text = cfg.ToKeyValues().Format();
  emit("# config");
  {
    std::string line;
    for (char c : config_text) {
      if (c == '\n') {
        emit("#   " + line);
        line.clear();
      } else {
        line += c;
      }
    }
  }

  auto model = UNetModel<float>::Build(cfg.model, cfg.seed);
  emit(Fmt("# model %s params %lld train %zu val %zu",
           VariantName(cfg.model.variant).c_str(),
           static_cast<long long>(model.ParamCount()), train.size(), val.size()));
  Adam adam(model.Params(), cfg.learning_rate, cfg.beta1, cfg.beta2,
            cfg.adam_eps, cfg.weight_decay);
  Rng shuffle_rng(cfg.seed, 3);

  TrainResult result;
  double best_score = -1;
  std::vector<std::uint8_t> best_bytes;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.Below(i)]);
    }
    double loss_sum = 0, seg_sum = 0, cls_sum = 0;
    std::int64_t hits = 0, seen = 0;
    int step = 0;
    for (std::size_t lo = 0; lo < order.size();
         lo += static_cast<std::size_t>(cfg.batch_size)) {
      ++step;
      const auto hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Sample> batch;
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(train[order[i]]);
      Tensor images, masks;
      std::vector<int> labels;
      StackBatch(batch, &images, &masks, &labels);

      adam.ZeroGrad();
      const auto out = model.Forward(images, Mode::kTrain);
      const LossParts loss = ComputeLoss(out, masks, labels, cfg.lambda);
      const double total = loss.total.item();
      if (!std::isfinite(total)) {
        throw NumericError(Fmt("non-finite loss at epoch %d step %d: seg %g cls %g "
                               "total %g",
                               epoch, step, loss.seg, loss.cls, total));
      }
      Backward(loss.total);
      adam.Step();

      const auto n = static_cast<double>(batch.size());
      loss_sum += total * n;
      seg_sum += loss.seg * n;
      cls_sum += loss.cls * n;
      const auto k = static_cast<std::size_t>(out.class_logits.dim(1));
      auto cl = out.class_logits.data();
      for (std::size_t b = 0; b < batch.size(); ++b) {
        hits += ArgMax<float>(cl.subspan(b * k, k)) == labels[b];
      }
      seen += static_cast<std::int64_t>(batch.size());
    }

    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(seen);
    st.seg_loss = seg_sum / static_cast<double>(seen);
    st.cls_loss = cls_sum / static_cast<double>(seen);
    st.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
    double score = st.train_accuracy;
    if (!val.empty()) {
      const EvalReport v = Evaluate(model, val, cfg.seg_aggregation);
      st.val_accuracy = v.classification_accuracy;
      st.val_seg_accuracy = v.balanced_seg_accuracy;
      score = v.classification_accuracy + v.balanced_seg_accuracy;
    }
    result.epochs.push_back(st);
    emit(Fmt("epoch %d/%d loss %.6f seg_loss %.6f cls_loss %.6f train_acc %.4f "
             "val_acc %.4f val_seg_acc %.4f",
             epoch, cfg.epochs, st.loss, st.seg_loss, st.cls_loss,
             st.train_accuracy, st.val_accuracy, st.val_seg_accuracy));
    if (score > best_score) {
      best_score = score;
      result.best_epoch = epoch;
      KeyValues m;
      m.Set("epoch", std::to_string(epoch));
      m.Set("train_loss", FormatDouble(st.loss));
      m.Set("val_classification_accuracy", FormatDouble(st.val_accuracy));
      m.Set("val_balanced_seg_accuracy", FormatDouble(st.val_seg_accuracy));
      best_bytes = CaptureModel(model, config_text, m.Format()).Serialize();
    }
  }

  result.final_train = Evaluate(model, train, cfg.seg_aggregation);
  result.final_train.split = "train";
  if (!val.empty()) {
    result.final_val = Evaluate(model, val, cfg.seg_aggregation);
    result.final_val.split = "val";
  }
  emit(Fmt("final train_acc %.4f train_seg_acc %.4f val_acc %.4f val_seg_acc %.4f "
           "best_epoch %d",
           result.final_train.classification_accuracy,
           result.final_train.balanced_seg_accuracy,
           result.final_val.classification_accuracy,
           result.final_val.balanced_seg_accuracy, result.best_epoch));

  KeyValues metrics;
  metrics.Set("epochs", std::to_string(cfg.epochs));
  metrics.Set("best_epoch", std::to_string(result.best_epoch));
  metrics.Set("final_train_loss", FormatDouble(result.epochs.back().loss));
  metrics.Set("train_classification_accuracy",
              FormatDouble(result.final_train.classification_accuracy));
  metrics.Set("train_balanced_seg_accuracy",
              FormatDouble(result.final_train.balanced_seg_accuracy));
  metrics.Set("val_classification_accuracy",
              FormatDouble(result.final_val.classification_accuracy));
  metrics.Set("val_balanced_seg_accuracy",
              FormatDouble(result.final_val.balanced_seg_accuracy));
  const std::string metrics_text = metrics.Format();

  result.best_checkpoint = (out_dir / "checkpoint.eqsg").string();
  result.last_checkpoint = (out_dir / "last.eqsg").string();
  {
    std::ofstream f(result.best_checkpoint, std::ios::binary);
    f.write(reinterpret_cast<const char*>(best_bytes.data()),
            static_cast<std::streamsize>(best_bytes.size()));
    if (!f) throw IoError("cannot write " + result.best_checkpoint);
  }
  CaptureModel(model, config_text, metrics_text).Save(result.last_checkpoint);
  WriteFile(out_dir / "train.log", log_text);
  WriteFile(out_dir / "metrics.txt", metrics_text);
  return result;
}

}  // namespace eqseg
