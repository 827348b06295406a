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

// Acceptance driver. Usage: acceptance [criterion ...]; runs 1-9 when no
// arguments are given. Prints one PASS/FAIL line per criterion and exits
// non-zero when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "imbaclass/experiment.hpp"
#include "imbaclass/imgproc.hpp"
#include "imbaclass/log.hpp"
#include "imbaclass/losses.hpp"
#include "imbaclass/metrics.hpp"
#include "imbaclass/nn.hpp"
#include "imbaclass/rng.hpp"
#include "imbaclass/sampling.hpp"
#include "imbaclass/synthgen.hpp"
#include "support/oracles.hpp"

namespace {

using namespace imbaclass;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

const std::vector<std::vector<std::int64_t>> kTableCounts{
    {345, 356, 701}, {345, 356, 1052}, {345, 356, 1636}, {345, 356, 2691},
    {237, 237, 2691}, {150, 150, 2691}, {71, 71, 2691}};
const std::vector<double> kFocalAlphas{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75};

// Training protocol for the imbalance experiments.
constexpr double kExperimentNoise = 100.0;
constexpr int kExperimentEpochs = 8;

Verdict focal_equals_ce() {
  constexpr int kGrid = 10000;
  PredictionBatch batch;
  batch.num_classes = 3;
  for (int i = 0; i < kGrid; ++i) {
    const double p = static_cast<double>(i) / (kGrid - 1);
    const int label = i % 3;
    for (int c = 0; c < 3; ++c) batch.probabilities.push_back(c == label ? p : (1.0 - p) / 2.0);
    batch.labels.push_back(label);
  }
  const auto ce = cross_entropy(batch);
  const auto focal = focal_loss(batch, LossConfig::focal(1.0, 0.0));
  double worst = 0.0;
  for (int i = 0; i < kGrid; ++i) {
    const double p = batch.p_true(i);
    const double reference = -std::log(std::max(p, 1e-12));
    worst = std::max({worst, std::abs(focal.per_sample[i] - ce.per_sample[i]),
                      std::abs(ce.per_sample[i] - reference)});
  }
  return {worst <= 1e-12, fmt::format("max |focal - ce| = {:.3g} over {} pairs", worst, kGrid)};
}

Verdict gradients_match() {
  Rng rng(2024);
  double worst_loss = 0.0;
  constexpr int kDraws = 120;
  for (int d = 0; d < kDraws; ++d) {
    const int classes = 2 + static_cast<int>(rng.below(4));
    const int n = 1 + static_cast<int>(rng.below(6));
    std::vector<double> logits(static_cast<std::size_t>(n) * classes);
    for (double& z : logits) z = rng.uniform(-4.0, 4.0);
    std::vector<int> labels(n);
    for (int& t : labels) t = static_cast<int>(rng.below(classes));
    const LossConfig cfg = d % 2 == 0 ? LossConfig::cross_entropy()
                                      : LossConfig::focal(rng.uniform(0.25, 1.75), rng.uniform(0.0, 5.0));
    const auto analytic = loss_gradient(logits, labels, classes, cfg);
    const auto numeric = oracle::fd_logit_gradient(logits, labels, classes, cfg);
    worst_loss = std::max(worst_loss, oracle::relative_error(analytic, numeric));
  }
  double worst_net = 0.0;
  for (const auto& spec : {NetworkSpec::mini_res(), NetworkSpec::mini_dense()})
    for (const auto& cfg : {LossConfig::cross_entropy(), LossConfig::focal(1.5, 2.0)}) {
      const auto check = oracle::check_network_gradient(spec, 2, cfg, 77, 150);
      worst_net = std::max(worst_net, oracle::relative_error(check.analytic, check.numeric));
    }
  return {worst_loss < 1e-5 && worst_net < 1e-3,
          fmt::format("loss rel err {:.3g} over {} draws, network rel err {:.3g}", worst_loss,
                      kDraws, worst_net)};
}

Verdict imbalance_ratios() {
  const std::vector<double> expected{2.03, 3.05, 4.74, 7.80, 11.35, 17.94, 37.90};
  std::string got;
  bool ok = true;
  for (std::size_t i = 0; i < kTableCounts.size(); ++i) {
    const double r = round2(imbalance_ratio(kTableCounts[i]));
    ok = ok && r == expected[i];
    got += fmt::format("{}{:.2f}", i ? " " : "", r);
  }
  return {ok, "rho = " + got};
}

Verdict auroc_matches_brute_force() {
  Rng rng(99);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> positive(n);
    // Coarse scores so ties are common.
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 20.0) / 20.0;
      positive[i] = rng.coin() ? 1 : 0;
    }
    positive[0] = 1;
    positive[1] = 0;
    if (auroc(scores, positive) != oracle::brute_force_auroc(scores, positive)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} of 50 instances differ", mismatches)};
}

Verdict resampling_contracts() {
  SynthConfig cfg;
  cfg.image_size = 32;
  cfg.class_counts = {345, 356, 2691};
  cfg.seed = 5;
  const LabeledDataset data = generate_dataset(cfg);
  const auto under = undersample(data, 11).class_counts();
  AugmentationConfig aug;
  aug.seed = 12;
  const auto over = oversample(data, aug).class_counts();
  const bool ok = std::all_of(under.begin(), under.end(), [](auto c) { return c == 345; }) &&
                  std::all_of(over.begin(), over.end(), [](auto c) { return c == 2691; }) &&
                  imbalance_ratio(under) == 1.0 && imbalance_ratio(over) == 1.0;
  return {ok, fmt::format("under ({}) over ({})", fmt::join(under, ", "), fmt::join(over, ", "))};
}

Verdict segmentation_recall() {
  constexpr int kSmears = 20, kCells = 5, kSize = 160, kDiameter = 224;
  SegmentationConfig cfg;
  cfg.expected_cell_diameter = kDiameter;
  cfg.source_cell_diameter = 42.0;
  cfg.hough_min_radius = 88.0;
  cfg.hough_max_radius = 136.0;
  cfg.hough_min_center_distance = 160.0;
  int found = 0, crops_bad = 0;
  double worst_center = 0.0, worst_radius = 0.0;
  for (int s = 0; s < kSmears; ++s) {
    const Smear smear = generate_smear(kCells, kSize, 1000 + s);
    const auto cells = segment_cells(smear.image, cfg);
    const double up_width = std::lround(kSize * kDiameter / 42.0);
    const double to_up = (up_width - 1) / (kSize - 1);
    for (const auto& cell : cells) {
      const Image& img = cell.image;
      if (img.width() != kDiameter || img.height() != kDiameter) {
        ++crops_bad;
        continue;
      }
      // Everything outside the square cut around the detection must be zero.
      const double half = std::min(kDiameter / 2.0, std::round(cell.detection.radius * to_up)) + 1.0;
      bool border_zero = true;
      for (int y = 0; y < kDiameter; ++y)
        for (int x = 0; x < kDiameter; ++x) {
          const double dx = std::abs(x + 0.5 - kDiameter / 2.0), dy = std::abs(y + 0.5 - kDiameter / 2.0);
          if (std::max(dx, dy) <= half) continue;
          for (int c = 0; c < img.channels(); ++c) border_zero = border_zero && img.at(x, y, c) == 0.0f;
        }
      if (!border_zero) ++crops_bad;
    }
    for (const auto& t : smear.truth) {
      double best = 1e9, radius_err = 1e9;
      for (const auto& cell : cells) {
        const double d = std::hypot(cell.detection.center_x - t.center_x, cell.detection.center_y - t.center_y);
        if (d < best) {
          best = d;
          radius_err = std::abs(cell.detection.radius - t.radius) / t.radius;
        }
      }
      if (best <= 2.0 && radius_err <= 0.10) {
        ++found;
        worst_center = std::max(worst_center, best);
        worst_radius = std::max(worst_radius, radius_err);
      }
    }
  }
  const double recall = static_cast<double>(found) / (kSmears * kCells);
  return {recall >= 0.95 && crops_bad == 0,
          fmt::format("recall {:.2f} ({}/{}), worst matched center err {:.2f} px, radius err {:.1f}%, "
                      "{} malformed crops",
                      recall, found, kSmears * kCells, worst_center, 100.0 * worst_radius, crops_bad)};
}

ExperimentPlan focal_vs_ce_plan(std::uint64_t seed, const std::vector<std::string>& models) {
  ExperimentPlan plan;
  SynthConfig synth;
  synth.image_size = 32;
  synth.class_counts = {345, 356, 2691};
  synth.noise_std = kExperimentNoise;
  plan.dataset.synthetic = synth;
  plan.models = models;
  MethodSpec focal;
  focal.kind = MethodKind::kFocal;
  focal.alphas = kFocalAlphas;
  focal.gamma = 2.0;
  plan.methods = {focal, MethodSpec{}};
  plan.train.max_epochs = kExperimentEpochs;
  plan.seed = seed;
  return plan;
}

const ExperimentRow& find_row(const std::vector<ExperimentRow>& rows, const std::string& model,
                              const std::string& method, double rho) {
  for (const auto& r : rows)
    if (r.model == model && r.method == method && round2(r.report.rho) == round2(rho)) return r;
  throw std::runtime_error("missing result row " + model + "/" + method);
}

Verdict focal_beats_ce() {
  const std::vector<std::string> models{"mini_dense", "mini_res"};
  std::map<std::string, std::vector<double>> delta;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto rows = run_experiment(focal_vs_ce_plan(seed, models), 1);
    for (const auto& m : models) {
      const double rho = imbalance_ratio(std::vector<std::int64_t>{345, 356, 2691});
      const auto& f = find_row(rows, m, "focal", rho);
      const auto& c = find_row(rows, m, "cross_entropy", rho);
      delta[m].push_back(f.report.f1_macro - c.report.f1_macro);
      std::cout << fmt::format("  seed {} {:<10} focal(alpha={:.2f}) F1 {:.4f}  ce F1 {:.4f}\n", seed, m,
                               f.alpha.value_or(0.0), f.report.f1_macro, c.report.f1_macro);
    }
  }
  bool ok = true;
  std::string detail;
  for (const auto& m : models) {
    const auto& d = delta[m];
    const auto wins = std::count_if(d.begin(), d.end(), [](double x) { return x >= 0.0; });
    double mean = 0.0;
    for (double x : d) mean += x;
    mean /= static_cast<double>(d.size());
    ok = ok && wins >= 3 && mean >= 0.0;
    detail += fmt::format("{}{}: focal >= ce in {}/5 seeds, mean dF1 {:+.4f}", detail.empty() ? "" : "; ",
                          m, wins, mean);
  }
  return {ok, detail};
}

Verdict improvement_grows_with_imbalance() {
  const std::vector<std::vector<std::int64_t>> schedule{kTableCounts[0], kTableCounts[3], kTableCounts[6]};
  const double lo = imbalance_ratio(schedule.front()), hi = imbalance_ratio(schedule.back());
  int holds = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ExperimentPlan plan = focal_vs_ce_plan(seed, {"mini_res"});
    plan.distribution_schedule = schedule;
    const auto rows = run_experiment(plan, 1);
    auto gain = [&](double rho) {
      return relative_improvement(find_row(rows, "mini_res", "focal", rho).report.f1_macro,
                                  find_row(rows, "mini_res", "cross_entropy", rho).report.f1_macro);
    };
    const double g_lo = gain(lo), g_mid = gain(imbalance_ratio(schedule[1])), g_hi = gain(hi);
    std::cout << fmt::format("  seed {} relative F1 gain: rho 2.03 {:+.2f}%  rho 7.80 {:+.2f}%  rho 37.90 {:+.2f}%\n",
                             seed, g_lo, g_mid, g_hi);
    if (g_hi >= g_lo) ++holds;
  }
  return {holds >= 2, fmt::format("gain at rho 37.90 >= gain at rho 2.03 in {}/3 seeds", holds)};
}

Verdict deterministic_results() {
  ExperimentPlan plan;
  SynthConfig synth;
  synth.image_size = 16;
  synth.class_counts = {12, 14, 40};
  plan.dataset.synthetic = synth;
  plan.models = {"mini_res", "mini_dense"};
  MethodSpec focal;
  focal.kind = MethodKind::kFocal;
  focal.alphas = {0.5, 1.5};
  MethodSpec under, over;
  under.kind = MethodKind::kUnderSampling;
  over.kind = MethodKind::kOverSampling;
  plan.methods = {focal, MethodSpec{}, under, over};
  plan.folds = 3;
  plan.train.max_epochs = 2;
  plan.train.batch_size = 16;
  plan.distribution_schedule = {{12, 14, 40}, {6, 6, 40}};
  plan.seed = 31;

  const fs::path root = fs::temp_directory_path() / "imbaclass_acceptance_determinism";
  fs::remove_all(root);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  write_results(run_experiment(plan, 1), plan, root / "a");
  write_results(run_experiment(plan, 1), plan, root / "b");
  write_results(run_experiment(plan, 3), plan, root / "c");
  const std::string a = slurp(root / "a" / "results.csv");
  const bool ok = !a.empty() && a == slurp(root / "b" / "results.csv") && a == slurp(root / "c" / "results.csv");
  const auto lines = std::count(a.begin(), a.end(), '\n');
  fs::remove_all(root);
  return {ok, fmt::format("results.csv ({} lines) {} across 3 runs", lines, ok ? "identical" : "differs")};
}

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;  // 0 = no hard limit
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  set_log_level("warn");
  const std::vector<Criterion> all{
      {1, "focal with gamma=0, alpha=1 equals cross-entropy", 1, focal_equals_ce},
      {2, "analytic gradients match finite differences", 30, gradients_match},
      {3, "imbalance ratios of the reference count triples", 1, imbalance_ratios},
      {4, "AUROC equals brute-force pair enumeration", 5, auroc_matches_brute_force},
      {5, "under/over-sampling balance the classes", 10, resampling_contracts},
      {6, "segmentation recall on synthetic smears", 60, segmentation_recall},
      {7, "focal macro-F1 vs cross-entropy across seeds", 0, focal_beats_ce},
      {8, "focal gain grows with imbalance", 30 * 60, improvement_grows_with_imbalance},
      {9, "identical results.csv for identical seeds", 0, deterministic_results},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  bool all_pass = true;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::string timing = fmt::format("{:.1f} s", secs);
    if (c.budget_seconds > 0) {
      timing += fmt::format(" of {:.0f} s", c.budget_seconds);
      if (secs >= c.budget_seconds) {
        v.pass = false;
        timing += ", over budget";
      }
    }
    all_pass = all_pass && v.pass;
    std::cout << fmt::format("criterion {}: {} - {}: {} [{}]\n", c.id, v.pass ? "PASS" : "FAIL",
                             c.title, v.detail, timing)
              << std::flush;
  }
  return all_pass ? 0 : 1;
}
