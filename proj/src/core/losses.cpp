/* Copyright 2026 The imbaclass Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "imbaclass/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imbaclass/error.hpp"

namespace imbaclass {

void LossConfig::validate() const {
  IMBACLASS_REQUIRE(std::isfinite(epsilon) && epsilon > 0.0 && epsilon <= 1e-6,
                    "loss epsilon must lie in (0, 1e-6]");
  if (family == LossFamily::kFocal) {
    IMBACLASS_REQUIRE(std::isfinite(alpha) && alpha > 0.0 && alpha <= 8.0,
                      "focal alpha must lie in (0, 8]");
    IMBACLASS_REQUIRE(std::isfinite(gamma) && gamma >= 0.0 && gamma <= 10.0,
                      "focal gamma must lie in [0, 10]");
  }
}

std::string LossConfig::name() const {
  if (family == LossFamily::kCrossEntropy) return "cross_entropy";
  std::ostringstream os;
  os << "focal(alpha=" << alpha << ",gamma=" << gamma << ")";
  return os.str();
}

void PredictionBatch::validate() const {
  IMBACLASS_REQUIRE(num_classes >= 1, "prediction batch needs at least one class");
  IMBACLASS_REQUIRE(probabilities.size() == labels.size() * static_cast<std::size_t>(num_classes),
                    "probability matrix does not match labels x classes");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    IMBACLASS_REQUIRE(labels[i] >= 0 && labels[i] < num_classes, "label out of range");
    double sum = 0.0;
    for (double p : row(i)) {
      IMBACLASS_REQUIRE(p >= 0.0 && p <= 1.0, "probability outside [0, 1]");
      sum += p;
    }
    IMBACLASS_REQUIRE(std::abs(sum - 1.0) <= 1e-6, "probability row does not sum to 1");
  }
}

namespace {

double clamped_log(double p, double epsilon) { return std::log(std::max(p, epsilon)); }

LossValue reduce(std::vector<double> per_sample) {
  LossValue v;
  double sum = 0.0;
  for (double x : per_sample) sum += x;
  v.mean = per_sample.empty() ? 0.0 : sum / static_cast<double>(per_sample.size());
  v.per_sample = std::move(per_sample);
  return v;
}

}  // namespace

LossValue cross_entropy(const PredictionBatch& batch, double epsilon) {
  batch.validate();
  std::vector<double> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out[i] = -clamped_log(batch.p_true(i), epsilon);
  return reduce(std::move(out));
}

LossValue focal_loss(const PredictionBatch& batch, const LossConfig& cfg) {
  cfg.validate();
  batch.validate();
  std::vector<double> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p = batch.p_true(i);
    const double modulating = std::pow(1.0 - p, cfg.gamma);
    out[i] = -cfg.alpha * modulating * clamped_log(p, cfg.epsilon);
  }
  return reduce(std::move(out));
}

LossValue evaluate_loss(const PredictionBatch& batch, const LossConfig& cfg) {
  return cfg.family == LossFamily::kFocal ? focal_loss(batch, cfg)
                                          : cross_entropy(batch, cfg.epsilon);
}

std::vector<double> softmax(std::span<const double> logits, int num_classes) {
  IMBACLASS_REQUIRE(num_classes >= 1 && logits.size() % num_classes == 0,
                    "logit matrix is not a multiple of the class count");
  std::vector<double> out(logits.size());
  const std::size_t c = static_cast<std::size_t>(num_classes);
  for (std::size_t r = 0; r < logits.size() / c; ++r) {
    const auto row = logits.subspan(r * c, c);
    const double mx = *std::max_element(row.begin(), row.end());
    IMBACLASS_REQUIRE(std::isfinite(mx), "non-finite logits");
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += out[r * c + j] = std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] /= z;
  }
  return out;
}

PredictionBatch softmax_batch(std::span<const double> logits, std::span<const int> labels,
                              int num_classes) {
  PredictionBatch b;
  b.num_classes = num_classes;
  b.probabilities = softmax(logits, num_classes);
  b.labels.assign(labels.begin(), labels.end());
  IMBACLASS_REQUIRE(b.probabilities.size() == b.labels.size() * num_classes,
                    "logits and labels disagree on batch size");
  return b;
}

std::vector<double> loss_gradient(std::span<const double> logits, std::span<const int> labels,
                                  int num_classes, const LossConfig& cfg) {
  cfg.validate();
  const std::size_t c = static_cast<std::size_t>(num_classes);
  const std::vector<double> prob = softmax(logits, num_classes);
  IMBACLASS_REQUIRE(prob.size() == labels.size() * c, "logits and labels disagree on batch size");
  const double n = static_cast<double>(labels.size());
  std::vector<double> grad(prob.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    IMBACLASS_REQUIRE(t >= 0 && t < num_classes, "label out of range");
    // Scalar multiplying (p_j - [j == t]).
    double factor = 1.0;
    if (cfg.family == LossFamily::kFocal) {
      const double p = prob[i * c + t];
      const double q = 1.0 - p;
      double focus = 0.0;
      if (cfg.gamma != 0.0 && q > 0.0 && p > 0.0)
        focus = cfg.gamma * std::pow(q, cfg.gamma - 1.0) * p * std::log(p);
      factor = cfg.alpha * (std::pow(q, cfg.gamma) - focus);
    }
    for (std::size_t j = 0; j < c; ++j) {
      const double onehot = static_cast<int>(j) == t ? 1.0 : 0.0;
      grad[i * c + j] = factor * (prob[i * c + j] - onehot) / n;
    }
  }
  return grad;
}

}  // namespace imbaclass
