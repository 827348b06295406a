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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "imbaclass/error.hpp"
#include "imbaclass/json_io.hpp"
#include "imbaclass/losses.hpp"
#include "imbaclass/rng.hpp"

namespace imbaclass {
namespace {

// Independent scalar forms used as oracles.
double ce_oracle(double p) { return -std::log(std::max(p, 1e-12)); }
double fl_oracle(double p, double alpha, double gamma) {
  return -alpha * std::pow(1.0 - p, gamma) * std::log(std::max(p, 1e-12));
}

PredictionBatch two_class_batch(std::vector<double> p_true) {
  PredictionBatch b;
  b.num_classes = 2;
  for (double p : p_true) {
    b.probabilities.push_back(p);
    b.probabilities.push_back(1.0 - p);
    b.labels.push_back(0);
  }
  return b;
}

double mean_loss_from_logits(const std::vector<double>& logits, const std::vector<int>& labels,
                             int classes, const LossConfig& cfg) {
  return evaluate_loss(softmax_batch(logits, labels, classes), cfg).mean;
}

TEST(Losses, CrossEntropyMatchesOracle) {
  const auto b = two_class_batch({0.9, 0.5, 0.1, 1.0});
  const auto v = cross_entropy(b);
  ASSERT_EQ(v.per_sample.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(v.per_sample[i], ce_oracle(b.p_true(i)));
  EXPECT_DOUBLE_EQ(v.per_sample[3], 0.0);
}

TEST(Losses, CrossEntropyClampsZeroProbability) {
  const auto v = cross_entropy(two_class_batch({0.0}));
  EXPECT_NEAR(v.mean, -std::log(1e-12), 1e-9);
  EXPECT_TRUE(std::isfinite(v.mean));
}

TEST(Losses, FocalMatchesOracle) {
  const auto b = two_class_batch({0.95, 0.6, 0.2, 0.01});
  for (double alpha : {0.25, 1.0, 1.75})
    for (double gamma : {0.0, 0.5, 2.0, 5.0}) {
      const auto v = focal_loss(b, LossConfig::focal(alpha, gamma));
      for (std::size_t i = 0; i < b.size(); ++i)
        EXPECT_NEAR(v.per_sample[i], fl_oracle(b.p_true(i), alpha, gamma), 1e-14);
    }
}

TEST(Losses, FocalIsZeroAtCertainty) {
  EXPECT_EQ(focal_loss(two_class_batch({1.0}), LossConfig::focal(1.0, 2.0)).mean, 0.0);
}

TEST(Losses, FocalDownweightsEasyExamples) {
  // The ratio FL/CE = alpha (1-p)^gamma shrinks as p grows.
  const auto cfg = LossConfig::focal(1.0, 2.0);
  double prev = 2.0;
  for (double p : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const auto b = two_class_batch({p});
    const double ratio = focal_loss(b, cfg).mean / cross_entropy(b).mean;
    EXPECT_LT(ratio, prev);
    EXPECT_NEAR(ratio, std::pow(1.0 - p, 2.0), 1e-12);
    prev = ratio;
  }
}

TEST(Losses, FocalGammaZeroScalesCrossEntropy) {
  Rng rng(3);
  std::vector<double> p(200);
  for (double& x : p) x = rng.uniform(1e-6, 1.0);
  const auto b = two_class_batch(p);
  const double ce = cross_entropy(b).mean;
  for (double alpha : {0.5, 1.0, 1.5})
    EXPECT_NEAR(focal_loss(b, LossConfig::focal(alpha, 0.0)).mean, alpha * ce, 1e-12);
}

TEST(Losses, RejectsInvalidConfig) {
  const auto b = two_class_batch({0.5});
  EXPECT_THROW(focal_loss(b, LossConfig::focal(0.0, 2.0)), InvalidArgument);
  EXPECT_THROW(focal_loss(b, LossConfig::focal(1.0, -1.0)), InvalidArgument);
  EXPECT_THROW(focal_loss(b, LossConfig::focal(std::nan(""), 2.0)), InvalidArgument);
}

TEST(Losses, RejectsOffSimplexRows) {
  PredictionBatch b;
  b.num_classes = 2;
  b.probabilities = {0.7, 0.7};
  b.labels = {0};
  EXPECT_THROW(cross_entropy(b), InvalidArgument);
  b.probabilities = {0.5, 0.5};
  b.labels = {2};
  EXPECT_THROW(cross_entropy(b), InvalidArgument);
}

TEST(Losses, SoftmaxIsStableAndNormalized) {
  const auto p = softmax(std::vector<double>{1000.0, 1001.0, 999.0}, 3);
  double sum = 0.0;
  for (double x : p) {
    EXPECT_TRUE(std::isfinite(x));
    sum += x;
  }
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_GT(p[1], p[0]);
  EXPECT_GT(p[0], p[2]);
}

TEST(Losses, CrossEntropyGradientIsSoftmaxMinusOneHot) {
  const std::vector<double> logits{0.2, -1.0, 0.5, 1.5, 0.0, -0.3};
  const std::vector<int> labels{2, 0};
  const auto g = loss_gradient(logits, labels, 3, LossConfig::cross_entropy());
  const auto p = softmax(logits, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(g[i * 3 + j], (p[i * 3 + j] - (j == labels[i] ? 1.0 : 0.0)) / 2.0, 1e-15);
}

// Central differences over random logits; relative error measured against
// the gradient norm.
double fd_relative_error(const std::vector<double>& logits, const std::vector<int>& labels,
                         int classes, const LossConfig& cfg) {
  const auto g = loss_gradient(logits, labels, classes, cfg);
  const double h = 1e-5;
  double diff2 = 0.0, norm2 = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    auto up = logits, down = logits;
    up[k] += h;
    down[k] -= h;
    const double fd = (mean_loss_from_logits(up, labels, classes, cfg) -
                       mean_loss_from_logits(down, labels, classes, cfg)) /
                      (2.0 * h);
    diff2 += (fd - g[k]) * (fd - g[k]);
    norm2 += g[k] * g[k] + fd * fd;
  }
  return std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12);
}

TEST(Losses, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  for (int draw = 0; draw < 60; ++draw) {
    const int classes = 2 + static_cast<int>(rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(5));
    std::vector<double> logits(static_cast<std::size_t>(n * classes));
    for (double& z : logits) z = rng.uniform(-3.0, 3.0);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int& t : labels) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    const LossConfig cfg = draw % 2 == 0 ? LossConfig::cross_entropy()
                                         : LossConfig::focal(rng.uniform(0.25, 1.75), rng.uniform(0.0, 5.0));
    EXPECT_LT(fd_relative_error(logits, labels, classes, cfg), 1e-6) << "draw " << draw;
  }
}

TEST(Losses, FocalGradientVanishesAtCertaintyAndIsFiniteForGammaBelowOne) {
  const std::vector<double> confident{60.0, -60.0};
  const std::vector<int> label{0};
  for (double gamma : {0.5, 2.0}) {
    const auto g = loss_gradient(confident, label, 2, LossConfig::focal(1.0, gamma));
    for (double x : g) {
      EXPECT_TRUE(std::isfinite(x));
      EXPECT_NEAR(x, 0.0, 1e-20);
    }
  }
}

TEST(Losses, JsonRoundTrip) {
  const nlohmann::json j = nlohmann::json::parse(R"({"family":"focal","alpha":1.5,"gamma":2.0})");
  const LossConfig cfg = loss_config_from_json(j);
  EXPECT_EQ(cfg.family, LossFamily::kFocal);
  EXPECT_DOUBLE_EQ(cfg.alpha, 1.5);
  EXPECT_DOUBLE_EQ(cfg.gamma, 2.0);
  const LossConfig back = loss_config_from_json(to_json(cfg));
  EXPECT_EQ(back.family, cfg.family);
  EXPECT_DOUBLE_EQ(back.alpha, cfg.alpha);
  EXPECT_THROW(loss_config_from_json(nlohmann::json::parse(R"({"family":"hinge"})")), InvalidArgument);
  EXPECT_THROW(loss_config_from_json(nlohmann::json::parse(R"({"family":"focal","beta":1})")),
               InvalidArgument);
}

}  // namespace
}  // namespace imbaclass
