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

#ifndef IMBACLASS_EXPERIMENT_HPP_
#define IMBACLASS_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imbaclass/dataset.hpp"
#include "imbaclass/metrics.hpp"
#include "imbaclass/nn.hpp"
#include "imbaclass/sampling.hpp"
#include "imbaclass/synthgen.hpp"

namespace imbaclass {

struct DatasetSource {
  std::optional<std::filesystem::path> directory;
  // When the plan leaves the synthetic seed out it is derived from the
  // master seed.
  std::optional<SynthConfig> synthetic;
  bool synthetic_seed_given = false;
};

enum class MethodKind { kCrossEntropy, kFocal, kUnderSampling, kOverSampling };

struct MethodSpec {
  MethodKind kind = MethodKind::kCrossEntropy;
  std::vector<double> alphas;  // focal only
  double gamma = 2.0;          // focal only
  AugmentationConfig augmentation;  // over-sampling only; seed is derived per run

  // "cross_entropy", "focal", "under_sampling", "over_sampling".
  std::string name() const;
  // Loss candidates swept by cross-validation; one entry unless focal.
  std::vector<LossConfig> candidates() const;
};

struct ExperimentPlan {
  DatasetSource dataset;
  std::vector<std::string> models{"mini_res"};
  std::vector<MethodSpec> methods;
  double split = 0.70;
  int folds = 5;
  TrainConfig train;
  std::vector<std::vector<std::int64_t>> distribution_schedule;
  std::uint64_t seed = 0;

  void validate() const;
};

// Relative dataset directories are resolved against base_dir.
ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentPlan& plan);
// NotFound when the file is missing.
ExperimentPlan load_plan(const std::filesystem::path& path);

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

// Stratified: for each class, floor(n * fraction) randomly chosen samples
// (at least 1, at most n - 1) go to train, the rest to test. Both parts keep
// the input order.
TrainTestSplit split_dataset(const LabeledDataset& data, double fraction, std::uint64_t seed);

// Fold index per sample. Each class is shuffled and dealt round-robin, with
// the dealing position carried across classes so fold sizes differ by at
// most one.
std::vector<int> stratified_folds(const LabeledDataset& data, int folds, std::uint64_t seed);

// Seeded random subset with exactly targets[c] samples of class c.
LabeledDataset build_distribution(const LabeledDataset& data, std::span<const std::int64_t> targets,
                                  std::uint64_t seed);

struct CvSurface {
  std::vector<double> alphas;                      // 1 for non-focal candidates
  std::vector<std::vector<double>> mean_val_loss;  // [candidate][epoch - 1]
};

struct Selection {
  std::size_t candidate = 0;
  int epoch = 1;
};

// Minimizes mean_val_loss / alpha, which puts every alpha on the
// cross-entropy scale. Ties go to the smaller epoch, then the smaller alpha.
Selection select_alpha_epoch(const CvSurface& surface);

struct CrossValidation {
  CvSurface surface;
  Selection selected;
};

// For each candidate loss, trains one model per fold to cfg.max_epochs and
// averages the per-epoch validation losses across folds. Resampling methods
// resample the fold-training part only. Fold training seeds are
// derive_seed(seed, "cv-train", fold) for every candidate and method.
CrossValidation cross_validate(const NetworkSpec& spec, const LabeledDataset& train,
                               const MethodSpec& method, const TrainConfig& cfg, int folds,
                               std::uint64_t seed, int jobs = 1);

struct ExperimentRow {
  std::string model;
  std::string method;
  std::optional<double> alpha;
  std::optional<double> gamma;
  int epoch = 0;
  std::vector<std::int64_t> class_counts;
  EvaluationReport report;
  PredictionBatch test_predictions;
  CrossValidation cv;
  std::vector<EpochRecord> final_history;
  NetworkSpec spec;
  ParameterSet<float> params;
};

// The whole protocol: one block of rows per distribution (or one for the
// plain dataset), per model, per method, in plan order.
std::vector<ExperimentRow> run_experiment(const ExperimentPlan& plan, int jobs = 1);

// results.csv text: method,alpha,gamma,epoch,accuracy,f1_macro,auroc_macro,rho,model
std::string results_csv(std::span<const ExperimentRow> rows);

// Writes results.csv, plan.json and one directory per row under runs/ with
// report.json, loss_history.csv, cv_surface.csv, confusion.csv, roc.csv and
// model.bin.
void write_results(std::span<const ExperimentRow> rows, const ExperimentPlan& plan,
                   const std::filesystem::path& out_dir);

struct ResultRecord {
  std::string method;
  std::optional<double> alpha;
  std::optional<double> gamma;
  int epoch = 0;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double auroc_macro = 0.0;
  double rho = 0.0;
  std::string model;
};

std::vector<ResultRecord> parse_results_csv(const std::string& text);

// Markdown summary: a per-run metrics table and the relative improvement of
// focal over cross-entropy for each metric and imbalance level, averaged
// across models.
std::string render_report(std::span<const ResultRecord> records);

}  // namespace imbaclass

#endif  // IMBACLASS_EXPERIMENT_HPP_
