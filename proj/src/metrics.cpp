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

#include "eqseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "eqseg/config.hpp"
#include "eqseg/error.hpp"
#include "eqseg/group.hpp"

namespace eqseg {

double ClassificationAccuracy(std::span<const int> preds,
                              std::span<const int> labels) {
  if (preds.empty()) throw ValidationError("classification accuracy: empty input");
  if (preds.size() != labels.size()) {
    throw ValidationError("classification accuracy: " +
                          std::to_string(preds.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
  }
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

SegCounts& SegCounts::operator+=(const SegCounts& o) {
  tp += o.tp;
  fn += o.fn;
  tn += o.tn;
  fp += o.fp;
  return *this;
}

SegCounts CountSegmentation(std::span<const std::uint8_t> pred,
                            std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ValidationError("segmentation masks differ in size: " +
                          std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()));
  }
  SegCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    if (t) {
      (p ? c.tp : c.fn)++;
    } else {
      (p ? c.fp : c.tn)++;
    }
  }
  return c;
}

double BalancedAccuracy(const SegCounts& c) {
  const std::int64_t pos = c.tp + c.fn, neg = c.tn + c.fp;
  if (pos == 0) {
    throw ValidationError("balanced accuracy: true mask has no positive pixel");
  }
  if (neg == 0) return static_cast<double>(c.tp) / static_cast<double>(pos);
  // Single division over a common denominator.
  return static_cast<double>(c.tp * neg + c.tn * pos) /
         static_cast<double>(2 * pos * neg);
}

double BalancedSegAccuracy(std::span<const std::uint8_t> pred,
                           std::span<const std::uint8_t> truth) {
  return BalancedAccuracy(CountSegmentation(pred, truth));
}

SegAggregation ParseSegAggregation(std::string_view text) {
  if (text == "per_sample") return SegAggregation::kPerSample;
  if (text == "pooled") return SegAggregation::kPooled;
  throw LookupError("unknown segmentation aggregation '" + std::string(text) +
                    "'; expected per_sample or pooled");
}

std::string SegAggregationName(SegAggregation a) {
  return a == SegAggregation::kPooled ? "pooled" : "per_sample";
}

double DatasetBalancedSegAccuracy(std::span<const SegCounts> per_sample,
                                  SegAggregation aggregation) {
  if (per_sample.empty()) throw ValidationError("segmentation accuracy: empty input");
  if (aggregation == SegAggregation::kPooled) {
    SegCounts total;
    for (const auto& c : per_sample) total += c;
    return BalancedAccuracy(total);
  }
  double sum = 0;
  for (const auto& c : per_sample) sum += BalancedAccuracy(c);
  return sum / static_cast<double>(per_sample.size());
}

template <typename T>
std::vector<std::uint8_t> ThresholdLogits(std::span<const T> logits) {
  std::vector<std::uint8_t> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] > T(0);
  return out;
}

template <typename T>
int ArgMax(std::span<const T> values) {
  if (values.empty()) throw ValidationError("ArgMax: empty input");
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

namespace {

template <typename T>
double MaxAbsDiff(std::span<const T> a, std::span<const T> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return m;
}

}  // namespace

template <typename T>
std::map<double, double> EquivarianceError(UNetModel<T>& model,
                                           const BasicTensor<T>& images,
                                           std::span<const double> angles) {
  NoGradGuard no_grad;
  const auto base = model.Forward(images, Mode::kEval).seg_logits;
  std::map<double, double> out;
  for (double a : angles) {
    const auto rotated_in = model.Forward(RotateImage(images, a), Mode::kEval);
    const auto rotated_out = RotateImage(base, a);
    out[a] = MaxAbsDiff<T>(rotated_out.data(), rotated_in.seg_logits.data());
  }
  return out;
}

template <typename T>
std::map<double, double> InvarianceError(UNetModel<T>& model,
                                         const BasicTensor<T>& images,
                                         std::span<const double> angles) {
  NoGradGuard no_grad;
  const auto base = model.Forward(images, Mode::kEval).class_logits;
  std::map<double, double> out;
  for (double a : angles) {
    const auto rotated = model.Forward(RotateImage(images, a), Mode::kEval);
    out[a] = MaxAbsDiff<T>(base.data(), rotated.class_logits.data());
  }
  return out;
}

std::string EvalReport::FormatTable() const {
  std::ostringstream os;
  char buf[160];
  os << "split " << split << " (rotation " << rotation << ", " << n_samples
     << " samples)\n";
  std::snprintf(buf, sizeof(buf), "  %-28s %8.2f%%\n", "classification accuracy",
                100 * classification_accuracy);
  os << buf;
  std::snprintf(buf, sizeof(buf), "  %-28s %8.2f%%  [%s]\n",
                "balanced seg accuracy", 100 * balanced_seg_accuracy,
                aggregation.c_str());
  os << buf;
  for (int k = 0; k < kNumDriverGroups; ++k) {
    const std::string name = "  " + std::string(DriverGroupName(k));
    if (per_class_count[k] == 0) {
      std::snprintf(buf, sizeof(buf), "  %-28s %9s  (n=0)\n", name.c_str(), "-");
    } else {
      std::snprintf(buf, sizeof(buf), "  %-28s %8.2f%%  (n=%lld)\n", name.c_str(),
                    100 * per_class_accuracy[k],
                    static_cast<long long>(per_class_count[k]));
    }
    os << buf;
  }
  for (const auto& [angle, err] : equivariance_errors) {
    std::snprintf(buf, sizeof(buf), "  equivariance error @%-7g %12.3e\n", angle,
                  err);
    os << buf;
  }
  return os.str();
}

std::string EvalReport::FormatKeyValues() const {
  KeyValues kv;
  kv.Set("split", split);
  kv.Set("rotation", rotation);
  kv.Set("seg_aggregation", aggregation);
  kv.Set("n_samples", std::to_string(n_samples));
  kv.Set("classification_accuracy", FormatDouble(classification_accuracy));
  kv.Set("balanced_seg_accuracy", FormatDouble(balanced_seg_accuracy));
  for (int k = 0; k < kNumDriverGroups; ++k) {
    kv.Set("class_accuracy." + std::to_string(k), FormatDouble(per_class_accuracy[k]));
    kv.Set("class_count." + std::to_string(k), std::to_string(per_class_count[k]));
  }
  for (const auto& [angle, err] : equivariance_errors) {
    kv.Set("equivariance_error." + FormatDouble(angle), FormatDouble(err));
  }
  return kv.Format();
}

EvalReport Evaluate(UNetModel<float>& model, std::span<const Sample> samples,
                    SegAggregation aggregation, int batch_size) {
  if (samples.empty()) throw ValidationError("evaluation set is empty");
  if (batch_size < 1) throw ValidationError("evaluation batch size must be >= 1");
  NoGradGuard no_grad;
  std::vector<int> preds, labels;
  std::vector<SegCounts> counts;
  for (std::size_t lo = 0; lo < samples.size();
       lo += static_cast<std::size_t>(batch_size)) {
    const auto hi = std::min(samples.size(), lo + static_cast<std::size_t>(batch_size));
    const auto batch = samples.subspan(lo, hi - lo);
    Tensor images;
    std::vector<int> y;
    StackBatch(batch, &images, nullptr, &y);
    const auto out = model.Forward(images, Mode::kEval);
    const auto k = static_cast<std::size_t>(out.class_logits.dim(1));
    auto cl = out.class_logits.data();
    auto seg = out.seg_logits.data();
    const std::size_t pix = seg.size() / batch.size();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      preds.push_back(ArgMax<float>(cl.subspan(b * k, k)));
      const auto pm = ThresholdLogits<float>(seg.subspan(b * pix, pix));
      const auto tm = ThresholdLogits<float>(batch[b].mask.data());
      counts.push_back(CountSegmentation(pm, tm));
    }
    labels.insert(labels.end(), y.begin(), y.end());
  }
  EvalReport r;
  r.n_samples = static_cast<std::int64_t>(samples.size());
  r.aggregation = SegAggregationName(aggregation);
  r.classification_accuracy = ClassificationAccuracy(preds, labels);
  r.balanced_seg_accuracy = DatasetBalancedSegAccuracy(counts, aggregation);
  std::array<std::int64_t, kNumDriverGroups> hits{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    r.per_class_count[labels[i]]++;
    hits[labels[i]] += preds[i] == labels[i];
  }
  for (int c = 0; c < kNumDriverGroups; ++c) {
    r.per_class_accuracy[c] =
        r.per_class_count[c] ? static_cast<double>(hits[c]) / r.per_class_count[c]
                             : 0.0;
  }
  return r;
}

#define EQSEG_INSTANTIATE(T)                                                  \
  template std::vector<std::uint8_t> ThresholdLogits<T>(std::span<const T>);  \
  template int ArgMax<T>(std::span<const T>);                                 \
  template std::map<double, double> EquivarianceError<T>(                     \
      UNetModel<T>&, const BasicTensor<T>&, std::span<const double>);         \
  template std::map<double, double> InvarianceError<T>(                       \
      UNetModel<T>&, const BasicTensor<T>&, std::span<const double>);
EQSEG_INSTANTIATE(float)
EQSEG_INSTANTIATE(double)
#undef EQSEG_INSTANTIATE

}  // namespace eqseg
