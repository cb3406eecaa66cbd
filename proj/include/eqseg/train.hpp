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

#ifndef EQSEG_TRAIN_HPP_
#define EQSEG_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eqseg/config.hpp"
#include "eqseg/data.hpp"
#include "eqseg/metrics.hpp"
#include "eqseg/model.hpp"

namespace eqseg {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  int epochs = 30;
  int batch_size = 16;
  double lambda = 1.0;  // weight of the classification loss
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string out_dir;
  SegAggregation seg_aggregation = SegAggregation::kPerSample;

  void Validate() const;
  // Unknown keys are a ConfigError.
  static TrainConfig FromKeyValues(const KeyValues& kv);
  static TrainConfig Load(const std::string& path);
  KeyValues ToKeyValues() const;
};

// Adam with bias correction and decoupled weight decay.
class Adam {
 public:
  Adam(std::vector<ParamRef<float>> params, double lr, double beta1,
       double beta2, double eps, double weight_decay);

  void ZeroGrad();
  void Step();
  std::int64_t steps() const { return t_; }

 private:
  std::vector<ParamRef<float>> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_, wd_;
  std::int64_t t_ = 0;
};

struct LossParts {
  Tensor total;
  double seg = 0;
  double cls = 0;
};

// bce(seg) + lambda * ce(class). The classification term is omitted
// entirely when lambda is 0.
LossParts ComputeLoss(const ModelOutput<float>& out, const Tensor& masks,
                      std::span<const int> labels, double lambda);

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double seg_loss = 0;
  double cls_loss = 0;
  double train_accuracy = 0;  // running, train mode
  double val_accuracy = 0;
  double val_seg_accuracy = 0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  EvalReport final_train;
  EvalReport final_val;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

using LogFn = std::function<void(const std::string&)>;

// Trains on the dataset's train split, validates on val after every epoch,
// and writes checkpoint.eqsg (best val), last.eqsg, train.log and
// metrics.txt under out_dir.
TrainResult Train(const TrainConfig& cfg, const LogFn& log = nullptr);

// Same, on an already loaded dataset.
TrainResult Train(const TrainConfig& cfg, const Dataset& data,
                  const LogFn& log = nullptr);

}  // namespace eqseg

#endif  // EQSEG_TRAIN_HPP_
