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

#ifndef IMBACLASS_LOSSES_HPP_
#define IMBACLASS_LOSSES_HPP_

#include <span>
#include <string>
#include <vector>

namespace imbaclass {

enum class LossFamily { kCrossEntropy, kFocal };

struct LossConfig {
  LossFamily family = LossFamily::kCrossEntropy;
  double alpha = 1.0;
  double gamma = 2.0;
  // Floor applied to the argument of the logarithm only.
  double epsilon = 1e-12;

  static LossConfig cross_entropy() { return {}; }
  static LossConfig focal(double alpha, double gamma) {
    return {LossFamily::kFocal, alpha, gamma, 1e-12};
  }

  void validate() const;
  std::string name() const;
};

// Row-major batch of probability vectors plus one label per row.
struct PredictionBatch {
  int num_classes = 0;
  std::vector<double> probabilities;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(probabilities).subspan(i * num_classes, num_classes);
  }
  double p_true(std::size_t i) const { return probabilities[i * num_classes + labels[i]]; }

  // Rows on the simplex (within 1e-6), labels in range.
  void validate() const;
};

struct LossValue {
  std::vector<double> per_sample;
  double mean = 0.0;
};

// -ln(max(p_t, epsilon)), averaged over the batch.
LossValue cross_entropy(const PredictionBatch& batch, double epsilon = 1e-12);

// -alpha (1 - p_t)^gamma ln(max(p_t, epsilon)). The modulating factor is not
// clamped, so p_t = 1 gives exactly 0.
LossValue focal_loss(const PredictionBatch& batch, const LossConfig& cfg);

// Dispatches on cfg.family.
LossValue evaluate_loss(const PredictionBatch& batch, const LossConfig& cfg);

// Numerically stable softmax of each row of a (n x classes) logit matrix.
std::vector<double> softmax(std::span<const double> logits, int num_classes);

PredictionBatch softmax_batch(std::span<const double> logits, std::span<const int> labels,
                              int num_classes);

// d(mean loss)/d(logits) through the softmax, same layout as `logits`.
//   cross-entropy: (softmax - one_hot) / n
//   focal:         alpha [(1-p)^gamma - gamma (1-p)^(gamma-1) p ln p] (p_j - [j=t]) / n
// The derivative of the unclamped logarithm is used; the clamp only guards
// the loss value.
std::vector<double> loss_gradient(std::span<const double> logits, std::span<const int> labels,
                                  int num_classes, const LossConfig& cfg);

}  // namespace imbaclass

#endif  // IMBACLASS_LOSSES_HPP_
