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

#include "imbaclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "imbaclass/error.hpp"
#include "imbaclass/log.hpp"

namespace imbaclass {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::vector<std::int64_t> ConfusionMatrix::row_sums() const {
  std::vector<std::int64_t> s(static_cast<std::size_t>(num_classes), 0);
  for (int t = 0; t < num_classes; ++t)
    for (int p = 0; p < num_classes; ++p) s[t] += at(t, p);
  return s;
}

std::vector<std::int64_t> ConfusionMatrix::column_sums() const {
  std::vector<std::int64_t> s(static_cast<std::size_t>(num_classes), 0);
  for (int t = 0; t < num_classes; ++t)
    for (int p = 0; p < num_classes; ++p) s[p] += at(t, p);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int num_classes) {
  IMBACLASS_REQUIRE(num_classes >= 1, "confusion matrix needs at least one class");
  IMBACLASS_REQUIRE(truth.size() == predicted.size(),
                    "true and predicted label lists differ in length");
  ConfusionMatrix cm{num_classes,
                     std::vector<std::int64_t>(static_cast<std::size_t>(num_classes) * num_classes, 0)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    IMBACLASS_REQUIRE(truth[i] >= 0 && truth[i] < num_classes, "true label out of range");
    IMBACLASS_REQUIRE(predicted[i] >= 0 && predicted[i] < num_classes,
                      "predicted label out of range");
    ++cm.counts[static_cast<std::size_t>(truth[i]) * num_classes + predicted[i]];
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  IMBACLASS_REQUIRE(total > 0, "accuracy of an empty confusion matrix is undefined");
  std::int64_t trace = 0;
  for (int c = 0; c < cm.num_classes; ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

F1Scores f1_scores(const ConfusionMatrix& cm) {
  IMBACLASS_REQUIRE(cm.total() > 0, "F1 of an empty confusion matrix is undefined");
  const auto support = cm.row_sums();
  const auto predicted = cm.column_sums();
  F1Scores f;
  for (int c = 0; c < cm.num_classes; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    // 2PR/(P+R) rewritten as 2TP/(support + predicted) avoids 0/0 when TP=0.
    const double denom = static_cast<double>(support[c] + predicted[c]);
    if (denom == 0.0) {
      log().info("class {} has no samples and no predictions; its F1 is taken as 0", c);
      f.per_class.push_back(0.0);
    } else {
      f.per_class.push_back(2.0 * tp / denom);
    }
  }
  f.macro = std::accumulate(f.per_class.begin(), f.per_class.end(), 0.0) /
            static_cast<double>(f.per_class.size());
  return f;
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  IMBACLASS_REQUIRE(scores.size() == positive.size(), "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives. Ranks are kept
  // doubled so that averages of tied ranks stay integral.
  std::int64_t doubled_rank_sum = 0, n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const auto doubled_avg = static_cast<std::int64_t>(i + 1 + j);  // 2 * mean of i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        doubled_rank_sum += doubled_avg;
        ++n_pos;
      }
    i = j;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(scores.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) return kNaN;
  // Mann-Whitney U = rank_sum - n_pos (n_pos + 1) / 2, in doubled units.
  const std::int64_t doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AurocScores roc_auc(const PredictionBatch& batch) {
  batch.validate();
  AurocScores out;
  std::vector<double> column(batch.size());
  std::vector<std::uint8_t> positive(batch.size());
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < batch.num_classes; ++c) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      column[i] = batch.row(i)[c];
      positive[i] = batch.labels[i] == c ? 1 : 0;
    }
    const double a = auroc(column, positive);
    out.per_class.push_back(a);
    if (std::isnan(a)) {
      out.undefined_classes.push_back(c);
      log().info("AUROC of class {} is undefined (needs positives and negatives)", c);
    } else {
      sum += a;
      ++defined;
    }
  }
  out.macro = defined > 0 ? sum / defined : kNaN;
  return out;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive) {
  IMBACLASS_REQUIRE(scores.size() == positive.size(), "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto n_pos = std::count_if(positive.begin(), positive.end(), [](auto p) { return p != 0; });
  const auto n_neg = static_cast<std::ptrdiff_t>(scores.size()) - n_pos;
  std::vector<RocPoint> curve{{0.0, 0.0}};
  if (n_pos == 0 || n_neg == 0) return curve;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) (positive[order[j]] ? tp : fp)++;
    curve.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                     static_cast<double>(tp) / static_cast<double>(n_pos)});
    i = j;
  }
  return curve;
}

double imbalance_ratio(std::span<const std::int64_t> class_counts) {
  IMBACLASS_REQUIRE(!class_counts.empty(), "imbalance ratio of no classes");
  for (std::int64_t c : class_counts)
    IMBACLASS_REQUIRE(c >= 1, "imbalance ratio needs every class count >= 1");
  const auto [lo, hi] = std::minmax_element(class_counts.begin(), class_counts.end());
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

double relative_improvement(double metric_focal, double metric_baseline) {
  IMBACLASS_REQUIRE(std::isfinite(metric_focal) && std::isfinite(metric_baseline),
                    "relative improvement needs finite metrics");
  IMBACLASS_REQUIRE(metric_baseline != 0.0, "relative improvement over a zero baseline");
  return 100.0 * (metric_focal - metric_baseline) / metric_baseline;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::vector<int> argmax_rows(const PredictionBatch& batch) {
  std::vector<int> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto r = batch.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

EvaluationReport evaluate(const PredictionBatch& batch, double rho) {
  batch.validate();
  IMBACLASS_REQUIRE(batch.size() > 0, "cannot evaluate an empty prediction batch");
  EvaluationReport r;
  r.confusion = confusion_matrix(batch.labels, argmax_rows(batch), batch.num_classes);
  r.accuracy = accuracy(r.confusion);
  const F1Scores f1 = f1_scores(r.confusion);
  r.f1_per_class = f1.per_class;
  r.f1_macro = f1.macro;
  const AurocScores au = roc_auc(batch);
  r.auroc_per_class = au.per_class;
  r.auroc_macro = au.macro;
  r.rho = rho;
  return r;
}

nlohmann::json to_json(const EvaluationReport& r) {
  auto nullable = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json matrix = nlohmann::json::array();
  for (int t = 0; t < r.confusion.num_classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < r.confusion.num_classes; ++p) row.push_back(r.confusion.at(t, p));
    matrix.push_back(row);
  }
  nlohmann::json auroc_pc = nlohmann::json::array();
  for (double a : r.auroc_per_class) auroc_pc.push_back(nullable(a));
  return {{"confusion", matrix},
          {"accuracy", r.accuracy},
          {"f1_per_class", r.f1_per_class},
          {"f1_macro", r.f1_macro},
          {"f1_averaging", "macro"},
          {"auroc_per_class", auroc_pc},
          {"auroc_macro", nullable(r.auroc_macro)},
          {"auroc_averaging", "macro one-vs-rest over defined classes"},
          {"rho", r.rho}};
}

}  // namespace imbaclass
