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

#ifndef IMBACLASS_METRICS_HPP_
#define IMBACLASS_METRICS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "imbaclass/losses.hpp"

namespace imbaclass {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;

  std::int64_t at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
  }
  std::int64_t total() const;
  std::vector<std::int64_t> row_sums() const;
  std::vector<std::int64_t> column_sums() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int num_classes);

// trace / total; InvalidArgument for an empty matrix.
double accuracy(const ConfusionMatrix& cm);

struct F1Scores {
  std::vector<double> per_class;
  double macro = 0.0;
};

// One-vs-rest F1 per class and their unweighted mean. A class with neither
// support nor predictions scores 0 (logged).
F1Scores f1_scores(const ConfusionMatrix& cm);

// Probability that a random positive outranks a random negative, ties
// counting one half, computed from average ranks. NaN when either side is
// empty.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AurocScores {
  std::vector<double> per_class;  // NaN where undefined
  double macro = 0.0;             // mean over defined classes, NaN if none
  std::vector<int> undefined_classes;
};

// One-vs-rest AUROC using column c of the probability matrix for class c.
AurocScores roc_auc(const PredictionBatch& batch);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Exact ROC staircase from (0,0) to (1,1), one point per distinct score.
std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive);

// max / min over class counts; InvalidArgument for a zero count.
double imbalance_ratio(std::span<const std::int64_t> class_counts);

// 100 (focal - baseline) / baseline; InvalidArgument for a zero baseline.
double relative_improvement(double metric_focal, double metric_baseline);

// Rounds half away from zero to two decimals, as reported.
double round2(double v);

// Index of the largest entry of each probability row (first on ties).
std::vector<int> argmax_rows(const PredictionBatch& batch);

struct EvaluationReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::vector<double> f1_per_class;
  double f1_macro = 0.0;
  std::vector<double> auroc_per_class;
  double auroc_macro = 0.0;
  double rho = 1.0;
};

EvaluationReport evaluate(const PredictionBatch& batch, double rho);

nlohmann::json to_json(const EvaluationReport& r);

}  // namespace imbaclass

#endif  // IMBACLASS_METRICS_HPP_
